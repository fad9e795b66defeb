#ifndef SUBIQC_SDP_HPP
#define SUBIQC_SDP_HPP

// Small dense semidefinite programs in LMI form
//
//   maximize   b'y
//   subject to S = C - sum_i y_i A_i  >= 0   (block diagonal),
//
// whose conic dual is min <C,X> s.t. <A_i,X> = b_i, X >= 0. Solved with an
// infeasible-start primal-dual path-following method using the HKM search
// direction and Mehrotra's predictor-corrector. Diagonal blocks are plain
// nonnegativity constraints.

#include <subiqc/core.hpp>

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <unistd.h>

namespace subiqc::sdp {

struct Block {
  Index dim = 0;
  bool diagonal = false;
  Matrix C;  // dim x dim, or dim x 1 when diagonal
  std::vector<std::pair<Index, Matrix>> terms;  // (variable, A_i restricted)
};

struct Problem {
  Index m = 0;  // number of free variables y
  Vector b;
  std::vector<Block> blocks;

  Index add_block(Index dim, bool diagonal) {
    Block blk;
    blk.dim = dim;
    blk.diagonal = diagonal;
    blk.C = diagonal ? Matrix::Zero(dim, 1) : Matrix::Zero(dim, dim);
    blocks.push_back(std::move(blk));
    return static_cast<Index>(blocks.size()) - 1;
  }
};

enum class Status {
  Optimal,
  Infeasible,  // certificate that no y makes C - A*(y) PSD
  Unbounded,   // certificate of an improving ray
  MaxIterations,
  NumericalFailure,
};

inline const char* to_string(Status s) {
  switch (s) {
    case Status::Optimal: return "optimal";
    case Status::Infeasible: return "infeasible";
    case Status::Unbounded: return "unbounded";
    case Status::MaxIterations: return "max_iterations";
    case Status::NumericalFailure: return "numerical_failure";
  }
  return "?";
}

struct Settings {
  int max_iter = 120;
  double gap_tol = 1e-9;
  double feas_tol = 1e-9;
  double infeas_tol = 1e-8;
  double step_fraction = 0.95;
  bool verbose = false;
};

struct Result {
  Status status = Status::NumericalFailure;
  Vector y;
  std::vector<Matrix> X, S;
  double primal_obj = 0.0;  // <C, X>
  double dual_obj = 0.0;    // b'y
  double rel_gap = 0.0;
  double primal_infeas = 0.0;
  double dual_infeas = 0.0;
  int iterations = 0;
};

namespace detail {

inline double inner(const Block& blk, const Matrix& a, const Matrix& z) {
  if (blk.diagonal) return a.col(0).dot(z.col(0));
  return a.cwiseProduct(z).sum();
}

// A(Z)_i = sum_blocks <A_i, Z_k>.
inline Vector apply_a(const Problem& p, const std::vector<Matrix>& z) {
  Vector out = Vector::Zero(p.m);
  for (std::size_t k = 0; k < p.blocks.size(); ++k) {
    const Block& blk = p.blocks[k];
    for (const auto& [i, a] : blk.terms) out(i) += inner(blk, a, z[k]);
  }
  return out;
}

// C - A*(y) per block.
inline std::vector<Matrix> slack(const Problem& p, const Vector& y) {
  std::vector<Matrix> out;
  out.reserve(p.blocks.size());
  for (const Block& blk : p.blocks) {
    Matrix s = blk.C;
    for (const auto& [i, a] : blk.terms) s.noalias() -= y(i) * a;
    out.push_back(std::move(s));
  }
  return out;
}

inline std::vector<Matrix> adjoint(const Problem& p, const Vector& y) {
  std::vector<Matrix> out;
  out.reserve(p.blocks.size());
  for (const Block& blk : p.blocks) {
    Matrix s = Matrix::Zero(blk.C.rows(), blk.C.cols());
    for (const auto& [i, a] : blk.terms) s.noalias() += y(i) * a;
    out.push_back(std::move(s));
  }
  return out;
}

inline double total_inner(const Problem& p, const std::vector<Matrix>& a,
                          const std::vector<Matrix>& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < p.blocks.size(); ++k)
    s += inner(p.blocks[k], a[k], b[k]);
  return s;
}

inline double total_norm(const std::vector<Matrix>& a) {
  double s = 0.0;
  for (const auto& m : a) s += m.squaredNorm();
  return std::sqrt(s);
}

// Largest alpha with V + alpha dV >= 0 (infinity when unrestricted).
inline double max_step(const Block& blk, const Matrix& v, const Matrix& dv) {
  const double inf = std::numeric_limits<double>::infinity();
  if (blk.diagonal) {
    double a = inf;
    for (Index i = 0; i < blk.dim; ++i)
      if (dv(i, 0) < 0.0) a = std::min(a, -v(i, 0) / dv(i, 0));
    return a;
  }
  Eigen::LLT<Matrix> llt(v);
  if (llt.info() != Eigen::Success) return 0.0;
  Matrix w = llt.matrixL().solve(dv);
  w = llt.matrixL().solve(w.transpose()).transpose();
  const double lmin = linalg::min_eigenvalue(w);
  return lmin >= 0.0 ? inf : -1.0 / lmin;
}

struct Factors {
  std::vector<Matrix> s_inv;
  std::vector<Eigen::LLT<Matrix>> x_chol, s_chol;
};

}  // namespace detail

inline Result solve(const Problem& p, const Settings& set = {}) {
  using detail::Factors;
  const std::size_t nb = p.blocks.size();
  Index n_total = 0;
  for (const Block& blk : p.blocks) n_total += blk.dim;

  // Starting point scaled to the data (infeasible start).
  std::vector<Matrix> x(nb), s(nb);
  Vector y = Vector::Zero(p.m);
  double norm_c = 0.0;
  for (std::size_t k = 0; k < nb; ++k) {
    const Block& blk = p.blocks[k];
    const double n = static_cast<double>(blk.dim);
    double amax = 0.0, ratio = 0.0;
    for (const auto& [i, a] : blk.terms) {
      amax = std::max(amax, a.norm());
      ratio = std::max(ratio, (1.0 + std::abs(p.b(i))) / (1.0 + a.norm()));
    }
    norm_c = std::max(norm_c, blk.C.norm());
    const double xi = std::max({10.0, std::sqrt(n), n * ratio});
    const double eta =
        std::max({10.0, std::sqrt(n), 1.0 + std::max(amax, blk.C.norm())});
    if (blk.diagonal) {
      x[k] = Matrix::Constant(blk.dim, 1, xi);
      s[k] = Matrix::Constant(blk.dim, 1, eta);
    } else {
      x[k] = xi * Matrix::Identity(blk.dim, blk.dim);
      s[k] = eta * Matrix::Identity(blk.dim, blk.dim);
    }
  }
  const double norm_b = p.b.norm();
  std::vector<Matrix> cmat(nb);
  for (std::size_t k = 0; k < nb; ++k) cmat[k] = p.blocks[k].C;

  Result res;
  auto finish = [&](Status st, int it) {
    res.status = st;
    res.y = y;
    res.X = x;
    res.S = s;
    res.iterations = it;
    return res;
  };

  for (int it = 0; it <= set.max_iter; ++it) {
    // Residuals and progress measures.
    const Vector rp = p.b - detail::apply_a(p, x);
    std::vector<Matrix> rd = detail::slack(p, y);
    for (std::size_t k = 0; k < nb; ++k) rd[k] -= s[k];
    const double pobj = detail::total_inner(p, cmat, x);
    const double dobj = p.b.dot(y);
    const double mu = detail::total_inner(p, x, s) / static_cast<double>(n_total);
    res.primal_obj = pobj;
    res.dual_obj = dobj;
    res.primal_infeas = rp.norm() / (1.0 + norm_b);
    res.dual_infeas = detail::total_norm(rd) / (1.0 + norm_c);
    res.rel_gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
    if (set.verbose) {
      std::fprintf(stderr, "%3d pobj %+.9e dobj %+.9e gap %.2e pinf %.2e dinf %.2e mu %.2e\n",
                   it, pobj, dobj, res.rel_gap, res.primal_infeas,
                   res.dual_infeas, mu);
    }
    if (res.rel_gap < set.gap_tol && res.primal_infeas < set.feas_tol &&
        res.dual_infeas < set.feas_tol) {
      return finish(Status::Optimal, it);
    }
    // Farkas-type certificates: X >= 0 with A(X) ~ 0 and <C,X> < 0 means the
    // LMI has no solution; y with A*(y) <= 0 and b'y > 0 means unbounded.
    if (pobj < 0.0) {
      const double scale = -pobj;
      const double ax = detail::apply_a(p, x).norm() / scale;
      // Either X grows without bound relative to <C,X>, or <C,X> itself
      // runs off to -inf while A(X) stays bounded.
      if (ax < set.infeas_tol && (detail::total_norm(x) / scale > 1e6 ||
                                  scale > 1e8 * (1.0 + norm_b))) {
        return finish(Status::Infeasible, it);
      }
    }
    if (dobj > 0.0 && y.norm() > 1e8) {
      const Vector ybar = y / dobj;
      std::vector<Matrix> ay = detail::adjoint(p, ybar);
      double worst = 0.0;
      for (std::size_t k = 0; k < nb; ++k) {
        const double e = p.blocks[k].diagonal ? ay[k].maxCoeff()
                                              : linalg::max_eigenvalue(ay[k]);
        worst = std::max(worst, e);
      }
      if (worst < set.infeas_tol) return finish(Status::Unbounded, it);
    }
    if (it == set.max_iter) break;

    // Factorizations and the Schur complement M_ij = tr(A_i X A_j S^-1).
    Factors f;
    f.s_inv.resize(nb);
    f.x_chol.resize(nb);
    f.s_chol.resize(nb);
    Matrix schur = Matrix::Zero(p.m, p.m);
    for (std::size_t k = 0; k < nb; ++k) {
      const Block& blk = p.blocks[k];
      if (blk.diagonal) {
        f.s_inv[k] = s[k].cwiseInverse();
        const Vector w = x[k].col(0).cwiseProduct(f.s_inv[k].col(0));
        for (std::size_t a = 0; a < blk.terms.size(); ++a) {
          const Vector wa = blk.terms[a].second.col(0).cwiseProduct(w);
          for (std::size_t c = a; c < blk.terms.size(); ++c) {
            const double v = wa.dot(blk.terms[c].second.col(0));
            const Index i = blk.terms[a].first, j = blk.terms[c].first;
            schur(i, j) += v;
            if (c != a) schur(j, i) += v;
          }
        }
        continue;
      }
      f.x_chol[k].compute(x[k]);
      f.s_chol[k].compute(s[k]);
      if (f.x_chol[k].info() != Eigen::Success ||
          f.s_chol[k].info() != Eigen::Success) {
        return finish(Status::NumericalFailure, it);
      }
      f.s_inv[k] = f.s_chol[k].solve(Matrix::Identity(blk.dim, blk.dim));
      f.s_inv[k] = linalg::symmetrize(f.s_inv[k]);
      // B_i = L_X' A_i L_S^{-T}; then M = B'B over the block's variables.
      const Index n = blk.dim;
      Matrix bmat(n * n, static_cast<Index>(blk.terms.size()));
      const Matrix lx_t = f.x_chol[k].matrixL().transpose();
      for (std::size_t a = 0; a < blk.terms.size(); ++a) {
        Matrix t = f.s_chol[k].matrixL().solve(blk.terms[a].second);  // L_S^-1 A
        Matrix bi = lx_t * t.transpose();
        bmat.col(static_cast<Index>(a)) =
            Eigen::Map<const Vector>(bi.data(), n * n);
      }
      const Matrix mk = bmat.transpose() * bmat;
      for (std::size_t a = 0; a < blk.terms.size(); ++a)
        for (std::size_t c = 0; c < blk.terms.size(); ++c)
          schur(blk.terms[a].first, blk.terms[c].first) +=
              mk(static_cast<Index>(a), static_cast<Index>(c));
    }
    schur = linalg::symmetrize(schur);
    Eigen::LLT<Matrix> schur_llt(schur);
    Eigen::LDLT<Matrix> schur_ldlt;
    const bool use_llt = schur_llt.info() == Eigen::Success;
    if (!use_llt) {
      const double reg = 1e-14 * std::max(1.0, schur.diagonal().maxCoeff());
      schur_ldlt.compute(schur + reg * Matrix::Identity(p.m, p.m));
      if (schur_ldlt.info() != Eigen::Success) {
        return finish(Status::NumericalFailure, it);
      }
    }
    auto schur_solve = [&](const Vector& r) -> Vector {
      return use_llt ? Vector(schur_llt.solve(r)) : Vector(schur_ldlt.solve(r));
    };

    // Direction for a given centering target and optional corrector term.
    auto direction = [&](double sigma, const std::vector<Matrix>* dxa,
                         const std::vector<Matrix>* dsa, Vector& dy,
                         std::vector<Matrix>& dx, std::vector<Matrix>& ds) {
      std::vector<Matrix> rhs_mat(nb);
      for (std::size_t k = 0; k < nb; ++k) {
        const Block& blk = p.blocks[k];
        if (blk.diagonal) {
          Matrix z = x[k].cwiseProduct(rd[k]).cwiseProduct(f.s_inv[k]) -
                     sigma * mu * f.s_inv[k];
          if (dxa) z += (*dxa)[k].cwiseProduct((*dsa)[k]).cwiseProduct(f.s_inv[k]);
          rhs_mat[k] = std::move(z);
        } else {
          Matrix z = x[k] * rd[k] * f.s_inv[k] - sigma * mu * f.s_inv[k];
          if (dxa) z += (*dxa)[k] * (*dsa)[k] * f.s_inv[k];
          rhs_mat[k] = std::move(z);
        }
      }
      const Vector rhs = p.b + detail::apply_a(p, rhs_mat);
      dy = schur_solve(rhs);
      const std::vector<Matrix> ady = detail::adjoint(p, dy);
      dx.resize(nb);
      ds.resize(nb);
      for (std::size_t k = 0; k < nb; ++k) {
        ds[k] = rd[k] - ady[k];
        if (p.blocks[k].diagonal) {
          Matrix v = sigma * mu * f.s_inv[k] - x[k] -
                     x[k].cwiseProduct(ds[k]).cwiseProduct(f.s_inv[k]);
          if (dxa) v -= (*dxa)[k].cwiseProduct((*dsa)[k]).cwiseProduct(f.s_inv[k]);
          dx[k] = std::move(v);
        } else {
          Matrix v = sigma * mu * f.s_inv[k] - x[k] - x[k] * ds[k] * f.s_inv[k];
          if (dxa) v -= (*dxa)[k] * (*dsa)[k] * f.s_inv[k];
          dx[k] = linalg::symmetrize(v);
        }
      }
    };
    auto steps = [&](const std::vector<Matrix>& dx,
                     const std::vector<Matrix>& ds) {
      double ap = std::numeric_limits<double>::infinity(), ad = ap;
      for (std::size_t k = 0; k < nb; ++k) {
        ap = std::min(ap, detail::max_step(p.blocks[k], x[k], dx[k]));
        ad = std::min(ad, detail::max_step(p.blocks[k], s[k], ds[k]));
      }
      return std::make_pair(ap, ad);
    };

    // Predictor.
    Vector dy;
    std::vector<Matrix> dx, ds;
    direction(0.0, nullptr, nullptr, dy, dx, ds);
    auto [ap_aff, ad_aff] = steps(dx, ds);
    ap_aff = std::min(1.0, ap_aff);
    ad_aff = std::min(1.0, ad_aff);
    double mu_aff = 0.0;
    for (std::size_t k = 0; k < nb; ++k) {
      const Matrix xa = x[k] + ap_aff * dx[k];
      const Matrix sa = s[k] + ad_aff * ds[k];
      mu_aff += detail::inner(p.blocks[k], xa, sa);
    }
    mu_aff /= static_cast<double>(n_total);
    const double ratio = std::max(0.0, mu_aff / mu);
    double sigma = std::min(1.0, ratio * ratio * ratio);
    // Stay closer to the central path while still far from feasibility.
    if (std::max(res.primal_infeas, res.dual_infeas) > 1e-2)
      sigma = std::max(sigma, 0.1);

    // Corrector.
    const std::vector<Matrix> dxa = dx, dsa = ds;
    direction(sigma, &dxa, &dsa, dy, dx, ds);
    auto [ap, ad] = steps(dx, ds);
    const double gamma = set.step_fraction;
    ap = std::min(1.0, gamma * ap);
    ad = std::min(1.0, gamma * ad);
    if (!(ap > 0.0) || !(ad > 0.0) || !std::isfinite(dy.norm())) {
      return finish(Status::NumericalFailure, it);
    }
    for (std::size_t k = 0; k < nb; ++k) {
      x[k] += ap * dx[k];
      s[k] += ad * ds[k];
    }
    y += ad * dy;
  }
  return finish(Status::MaxIterations, set.max_iter);
}

/// Writes the problem in SDPA sparse format (".dat-s") so an external solver
/// can consume it. Our "maximize b'y s.t. C - sum y_i A_i >= 0" maps to
/// SDPA's "minimize c'x s.t. sum x_i F_i - F_0 >= 0" with c = -b, F_i = -A_i
/// and F_0 = -C.
inline void write_sdpa(const Problem& p, std::ostream& os) {
  os << std::setprecision(17);
  os << p.m << "\n" << p.blocks.size() << "\n";
  for (const Block& blk : p.blocks) os << (blk.diagonal ? -blk.dim : blk.dim) << " ";
  os << "\n";
  for (Index i = 0; i < p.m; ++i) os << -p.b(i) << (i + 1 < p.m ? " " : "\n");
  auto emit = [&](Index mat, std::size_t k, const Block& blk, const Matrix& a,
                  double sign) {
    if (blk.diagonal) {
      for (Index r = 0; r < blk.dim; ++r)
        if (a(r, 0) != 0.0)
          os << mat << " " << k + 1 << " " << r + 1 << " " << r + 1 << " "
             << sign * a(r, 0) << "\n";
      return;
    }
    for (Index r = 0; r < blk.dim; ++r)
      for (Index c = r; c < blk.dim; ++c)
        if (a(r, c) != 0.0)
          os << mat << " " << k + 1 << " " << r + 1 << " " << c + 1 << " "
             << sign * a(r, c) << "\n";
  };
  for (std::size_t k = 0; k < p.blocks.size(); ++k)
    emit(0, k, p.blocks[k], p.blocks[k].C, -1.0);
  for (std::size_t k = 0; k < p.blocks.size(); ++k)
    for (const auto& [i, a] : p.blocks[k].terms) emit(i + 1, k, p.blocks[k], a, -1.0);
}

/// Runs `command in out` on an SDPA file and reads back y (one value per
/// line, preceded by a status word). Used for the optional external backend.
inline Result solve_external(const Problem& p, const std::string& command,
                             const std::string& workdir) {
  // Unique names so concurrent probes do not clobber each other's files.
  static std::atomic<unsigned long> counter{0};
  const std::string stem = workdir + "/subiqc_" + std::to_string(::getpid()) + "_" +
                           std::to_string(counter++);
  const std::string in = stem + ".dat-s";
  const std::string out = stem + ".sol";
  {
    std::ofstream f(in);
    if (!f) throw Error(ErrorCode::Io, "cannot write " + in);
    write_sdpa(p, f);
  }
  const std::string cmd = command + " '" + in + "' '" + out + "'";
  if (std::system(cmd.c_str()) != 0) {
    throw Error(ErrorCode::SolverFailure, "external solver failed: " + cmd);
  }
  std::ifstream f(out);
  if (!f) throw Error(ErrorCode::Io, "no solution file " + out);
  std::remove(in.c_str());
  std::string status;
  f >> status;
  Result res;
  res.y = Vector::Zero(p.m);
  for (Index i = 0; i < p.m; ++i) {
    if (!(f >> res.y(i))) throw Error(ErrorCode::Parse, "short solution file");
  }
  res.status = status == "optimal"      ? Status::Optimal
               : status == "infeasible" ? Status::Infeasible
               : status == "unbounded"  ? Status::Unbounded
                                        : Status::NumericalFailure;
  f.close();
  std::remove(out.c_str());
  res.S = detail::slack(p, res.y);
  res.dual_obj = p.b.dot(res.y);
  return res;
}

}  // namespace subiqc::sdp

#endif  // SUBIQC_SDP_HPP
