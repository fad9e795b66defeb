#ifndef SUBIQC_ALGORITHMS_HPP
#define SUBIQC_ALGORITHMS_HPP

#include <subiqc/core.hpp>
#include <subiqc/objectives.hpp>
#include <subiqc/subspace_gossip.hpp>

#include <array>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace subiqc {

enum class Algorithm {
  DiSPO,
  DAS,
  EXTRA,
  NIDS,
  ED,
  DIGing,
  uDIG,
  uEXTRA,
  AugDGM,
  SVL,
  AccDngdSc,
};

inline constexpr std::array<Algorithm, 11> kAllAlgorithms = {
    Algorithm::DiSPO,  Algorithm::DAS,    Algorithm::EXTRA, Algorithm::NIDS,
    Algorithm::ED,     Algorithm::DIGing, Algorithm::uDIG,  Algorithm::uEXTRA,
    Algorithm::AugDGM, Algorithm::SVL,    Algorithm::AccDngdSc};

inline std::string_view name(Algorithm a) {
  switch (a) {
    case Algorithm::DiSPO: return "DiSPO";
    case Algorithm::DAS: return "DAS";
    case Algorithm::EXTRA: return "EXTRA";
    case Algorithm::NIDS: return "NIDS";
    case Algorithm::ED: return "ED";
    case Algorithm::DIGing: return "DIGing";
    case Algorithm::uDIG: return "uDIG";
    case Algorithm::uEXTRA: return "uEXTRA";
    case Algorithm::AugDGM: return "AugDGM";
    case Algorithm::SVL: return "SVL";
    case Algorithm::AccDngdSc: return "ACC-DNGD-SC";
  }
  return "?";
}

inline Algorithm parse_algorithm(std::string_view s) {
  for (Algorithm a : kAllAlgorithms) {
    if (name(a) == s) return a;
  }
  throw Error(ErrorCode::UnknownAlgorithm, "unknown algorithm '" +
                                               std::string(s) + "'");
}

/// DiSPO and DAS converge to an O(mu)-biased fixed point; the rest do not.
inline bool is_bias_corrected(Algorithm a) {
  return a != Algorithm::DiSPO && a != Algorithm::DAS;
}

inline int state_multiplicity(Algorithm a) {
  switch (a) {
    case Algorithm::DiSPO:
    case Algorithm::DAS: return 1;
    case Algorithm::ED:
    case Algorithm::uDIG:
    case Algorithm::uEXTRA:
    case Algorithm::SVL: return 2;
    case Algorithm::EXTRA:
    case Algorithm::NIDS:
    case Algorithm::DIGing:
    case Algorithm::AugDGM: return 3;
    case Algorithm::AccDngdSc: return 4;
  }
  return 0;
}

struct SvlParams {
  double beta = 0.0;
  double gamma = 1.0;
  double delta = 0.0;
};

/// Global L = max L_k and m = min m_k known to every agent.
struct GlobalSector {
  double L = 0.0;
  double m = 0.0;
};

struct AlgParams {
  double mu = 0.0;
  std::optional<SvlParams> svl;
  std::optional<GlobalSector> sector;

  /// ACC-DNGD-SC momentum sqrt(m mu); needs `sector`.
  double alpha() const {
    if (!sector) throw Error(ErrorCode::MissingParam, "alpha needs m");
    return std::sqrt(sector->m * mu);
  }
};

/// What each N-sized block of the state holds; drives the canonical
/// initialization.
enum class BlockRole {
  Iterate,
  PreviousIterate,
  Tracking,
  GradientHistory,
  Auxiliary,
};

/// xi+ = A xi + B (u + w), y = C_y xi, omega = C_w xi, F_xi xi + F_u u = 0.
struct Realization {
  Algorithm algorithm = Algorithm::DiSPO;
  int n_alg = 1;
  Index agents = 0;
  Matrix A, B, Cy, Cw, Fxi, Fu;
  AlgParams params;
  std::vector<BlockRole> roles;

  Index state_dim() const { return A.rows(); }
};

namespace detail {

class BlockBuilder {
 public:
  BlockBuilder(Index rows, Index cols, Index rb, Index cb)
      : m_(Matrix::Zero(rows * rb, cols * cb)), rb_(rb), cb_(cb) {}
  BlockBuilder& set(Index i, Index j, const Matrix& blk) {
    m_.block(i * rb_, j * cb_, blk.rows(), blk.cols()) = blk;
    return *this;
  }
  Matrix done() { return std::move(m_); }

 private:
  Matrix m_;
  Index rb_, cb_;
};

}  // namespace detail

/// State-space realization of `alg` with the gossip matrix substituted for
/// the consensus weights.
inline Realization build(Algorithm alg, const GossipMatrix& gossip,
                         const Subspace& sub, const AlgParams& params) {
  const Matrix& w = gossip.matrix();
  const Index n = w.rows();
  if (sub.dim() != n) {
    throw Error(ErrorCode::DimensionMismatch, "gossip vs subspace size");
  }
  if (!(params.mu > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "step size mu must be positive");
  }
  const double mu = params.mu;
  const Index q = sub.rank();
  const Matrix id = Matrix::Identity(n, n);
  const Matrix wt = 0.5 * (id + w);
  const Matrix ut = sub.basis().transpose();

  Realization r;
  r.algorithm = alg;
  r.n_alg = state_multiplicity(alg);
  r.agents = n;
  r.params = params;
  const Index k = r.n_alg;
  auto blocks = [&](Index rows, Index cols, Index rb) {
    return detail::BlockBuilder(rows, cols, rb, n);
  };
  auto selector = [&] {
    return blocks(1, k, n).set(0, 0, id).done();
  };
  r.Fu = Matrix::Zero(q, n);

  switch (alg) {
    case Algorithm::DiSPO:
    case Algorithm::DAS:
      r.A = w;
      r.B = alg == Algorithm::DiSPO ? Matrix(-mu * id) : Matrix(-mu * w);
      r.Cy = id;
      r.Cw = id;
      r.Fxi = Matrix::Zero(q, n);
      r.roles = {BlockRole::Iterate};
      break;

    case Algorithm::EXTRA:
    case Algorithm::NIDS: {
      const bool nids = alg == Algorithm::NIDS;
      r.A = blocks(3, 3, n)
                .set(0, 0, id + w)
                .set(0, 1, -wt)
                .set(0, 2, nids ? Matrix(mu * wt) : Matrix(mu * id))
                .set(1, 0, id)
                .done();
      r.B = blocks(3, 1, n)
                .set(0, 0, nids ? Matrix(-mu * wt) : Matrix(-mu * id))
                .set(2, 0, id)
                .done();
      r.Cy = selector();
      r.Cw = selector();
      r.Fxi = detail::BlockBuilder(1, 3, q, n)
                  .set(0, 0, ut)
                  .set(0, 1, -ut)
                  .set(0, 2, mu * ut)
                  .done();
      r.roles = {BlockRole::Iterate, BlockRole::PreviousIterate,
                 BlockRole::GradientHistory};
      break;
    }

    case Algorithm::ED:
      r.A = blocks(2, 2, n).set(0, 0, 2.0 * wt).set(0, 1, -wt).set(1, 0, id)
                .done();
      r.B = blocks(2, 1, n).set(0, 0, -mu * wt).set(1, 0, -mu * id).done();
      r.Cy = selector();
      r.Cw = selector();
      r.Fxi = detail::BlockBuilder(1, 2, q, n).set(0, 0, ut).set(0, 1, -ut)
                  .done();
      r.roles = {BlockRole::Iterate, BlockRole::PreviousIterate};
      break;

    case Algorithm::DIGing:
      r.A = blocks(3, 3, n)
                .set(0, 0, w)
                .set(0, 1, -mu * id)
                .set(1, 1, w)
                .set(1, 2, -id)
                .done();
      r.B = blocks(3, 1, n).set(1, 0, id).set(2, 0, id).done();
      r.Cy = blocks(1, 3, n).set(0, 0, w).set(0, 1, -mu * id).done();
      r.Cw = selector();
      r.Fxi = detail::BlockBuilder(1, 3, q, n).set(0, 1, ut).set(0, 2, -ut)
                  .done();
      r.roles = {BlockRole::Iterate, BlockRole::Tracking,
                 BlockRole::GradientHistory};
      break;

    case Algorithm::uDIG:
    case Algorithm::uEXTRA: {
      if (!params.sector) {
        throw Error(ErrorCode::MissingParam,
                    std::string(name(alg)) + " needs global L and m");
      }
      const double big_l = params.sector->L;
      const double small_m = params.sector->m;
      const Matrix coupling =
          alg == Algorithm::uDIG
              ? Matrix((id - w) * (0.5 * (big_l + small_m)))
              : Matrix((id - w) * (big_l * w));
      r.A = blocks(2, 2, n)
                .set(0, 0, w)
                .set(0, 1, -mu * id)
                .set(1, 0, coupling)
                .set(1, 1, w)
                .done();
      r.B = blocks(2, 1, n).set(0, 0, -mu * id).set(1, 0, w - id).done();
      r.Cy = selector();
      r.Cw = selector();
      r.Fxi = detail::BlockBuilder(1, 2, q, n).set(0, 1, ut).done();
      r.roles = {BlockRole::Iterate, BlockRole::Tracking};
      break;
    }

    case Algorithm::AugDGM:
      r.A = blocks(3, 3, n)
                .set(0, 0, w)
                .set(0, 1, -mu * id)
                .set(1, 1, w)
                .set(1, 2, -w)
                .done();
      r.B = blocks(3, 1, n).set(1, 0, w).set(2, 0, id).done();
      r.Cy = blocks(1, 3, n).set(0, 0, w).set(0, 1, -mu * w).done();
      r.Cw = selector();
      r.Fxi = detail::BlockBuilder(1, 3, q, n).set(0, 1, ut).set(0, 2, -ut)
                  .done();
      r.roles = {BlockRole::Iterate, BlockRole::Tracking,
                 BlockRole::GradientHistory};
      break;

    case Algorithm::SVL: {
      if (!params.svl) {
        throw Error(ErrorCode::MissingParam, "SVL needs beta, gamma, delta");
      }
      const auto& s = *params.svl;
      if (s.gamma == 0.0) {
        throw Error(ErrorCode::InvalidArgument, "SVL gamma must be nonzero");
      }
      r.A = blocks(2, 2, n)
                .set(0, 0, w)
                .set(0, 1, s.beta * id)
                .set(1, 0, (w - id) / s.gamma)
                .set(1, 1, id)
                .done();
      r.B = blocks(2, 1, n).set(0, 0, -mu * id).done();
      r.Cy = blocks(1, 2, n)
                 .set(0, 0, id - (s.delta / s.gamma) * (id - w))
                 .done();
      r.Cw = selector();
      r.Fxi = detail::BlockBuilder(1, 2, q, n).set(0, 1, ut).done();
      r.roles = {BlockRole::Iterate, BlockRole::Auxiliary};
      break;
    }

    case Algorithm::AccDngdSc: {
      if (!params.sector) {
        throw Error(ErrorCode::MissingParam, "ACC-DNGD-SC needs global m");
      }
      const double a = params.alpha();
      const double a1 = 1.0 + a;
      r.A = blocks(4, 4, n)
                .set(0, 0, w / a1)
                .set(0, 1, (a / a1) * w)
                .set(0, 2, -mu * id)
                .set(1, 0, (a / a1) * w)
                .set(1, 1, w / a1)
                .set(1, 2, -(mu / a) * id)
                .set(2, 2, w)
                .set(2, 3, -id)
                .done();
      r.B = blocks(4, 1, n).set(2, 0, id).set(3, 0, id).done();
      r.Cy = blocks(1, 4, n)
                 .set(0, 0, ((a * a + 1.0) / (a1 * a1)) * w)
                 .set(0, 1, (2.0 * a / (a1 * a1)) * w)
                 .set(0, 2, (-2.0 * mu / a1) * id)
                 .done();
      r.Cw = selector();
      r.Fxi = detail::BlockBuilder(1, 4, q, n).set(0, 2, ut).set(0, 3, -ut)
                  .done();
      r.roles = {BlockRole::Iterate, BlockRole::Iterate, BlockRole::Tracking,
                 BlockRole::GradientHistory};
      break;
    }
  }
  return r;
}

/// Residual of the invariant at a single state.
inline double invariant_residual(const Realization& r, const Vector& xi,
                                 const Vector& u) {
  if (r.Fxi.rows() == 0) return 0.0;
  return (r.Fxi * xi + r.Fu * u).norm();
}

/// Canonical start: iterate-like blocks at omega0, gradient-history blocks at
/// grad J(omega0), tracking/auxiliary blocks at zero, then a minimum-norm
/// least-squares correction (tracking blocks if present, else previous-iterate
/// blocks) so the invariant holds at t = 0.
inline Vector canonical_init(const Realization& r, const ObjectiveFamily& fam,
                             const std::optional<Vector>& omega0 = std::nullopt) {
  const Index n = r.agents;
  const Vector w0 = omega0 ? *omega0 : Vector::Zero(n);
  if (w0.size() != n) {
    throw Error(ErrorCode::DimensionMismatch, "omega0 size");
  }
  const Vector g0 = gradient(fam, w0);
  Vector xi = Vector::Zero(r.state_dim());
  std::vector<Index> tracking, previous;
  for (Index b = 0; b < static_cast<Index>(r.roles.size()); ++b) {
    switch (r.roles[b]) {
      case BlockRole::Iterate: xi.segment(b * n, n) = w0; break;
      case BlockRole::PreviousIterate:
        xi.segment(b * n, n) = w0;
        previous.push_back(b);
        break;
      case BlockRole::GradientHistory: xi.segment(b * n, n) = g0; break;
      case BlockRole::Tracking: tracking.push_back(b); break;
      case BlockRole::Auxiliary: break;
    }
  }
  const std::vector<Index>& adjustable = tracking.empty() ? previous : tracking;
  if (adjustable.empty() || r.Fxi.rows() == 0) return xi;

  Matrix f_adj(r.Fxi.rows(), n * static_cast<Index>(adjustable.size()));
  for (std::size_t i = 0; i < adjustable.size(); ++i) {
    f_adj.middleCols(static_cast<Index>(i) * n, n) =
        r.Fxi.middleCols(adjustable[i] * n, n);
  }
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(f_adj);
  for (int pass = 0; pass < 3; ++pass) {
    const Vector u0 = gradient(fam, r.Cy * xi);
    const Vector res = r.Fxi * xi + r.Fu * u0;
    if (res.norm() <= 1e-14 * (1.0 + xi.norm())) break;
    const Vector delta = cod.solve(-res);
    for (std::size_t i = 0; i < adjustable.size(); ++i) {
      xi.segment(adjustable[i] * n, n) +=
          delta.segment(static_cast<Index>(i) * n, n);
    }
  }
  return xi;
}

struct FixedPoint {
  Vector xi_star, y_star, u_star, omega_star;
  double residual = 0.0;
  long iterations = 0;
};

struct FixedPointOptions {
  double tol = 1e-14;
  long max_iter = 1'000'000;
  std::optional<Vector> omega0;
};

inline FixedPoint make_fixed_point(const Realization& r,
                                   const ObjectiveFamily& fam, Vector xi,
                                   long iterations) {
  FixedPoint fp;
  fp.y_star = r.Cy * xi;
  fp.u_star = gradient(fam, fp.y_star);
  fp.omega_star = r.Cw * xi;
  const double eq = (r.A * xi + r.B * fp.u_star - xi).norm();
  fp.residual = std::max(eq, invariant_residual(r, xi, fp.u_star));
  fp.xi_star = std::move(xi);
  fp.iterations = iterations;
  return fp;
}

/// Noiseless iteration from the canonical start. Stops once the remaining
/// distance, estimated from the step and the observed contraction ratio,
/// falls below tol (1 + ||xi||), or the steps reach round-off.
inline FixedPoint fixed_point(const Realization& r, const ObjectiveFamily& fam,
                              const FixedPointOptions& opts = {}) {
  if (fam.agents() != r.agents) {
    throw Error(ErrorCode::DimensionMismatch, "objective vs realization size");
  }
  Vector xi = canonical_init(r, fam, opts.omega0);
  double prev_step = std::numeric_limits<double>::infinity();
  double min_step = prev_step;
  double ratio = 0.0;
  long since_progress = 0;
  for (long it = 1; it <= opts.max_iter; ++it) {
    Vector next = r.A * xi + r.B * gradient(fam, r.Cy * xi);
    const double step = (next - xi).norm();
    xi = std::move(next);
    if (!std::isfinite(step) || xi.norm() > 1e12) {
      throw Error(ErrorCode::NoConvergence,
                  std::string(name(r.algorithm)) + " diverged at step " +
                      std::to_string(it));
    }
    const double scale = 1.0 + xi.norm();
    if (step > 0.0 && prev_step < std::numeric_limits<double>::infinity()) {
      ratio = std::max(0.9 * ratio, std::min(step / prev_step, 0.999999));
    }
    prev_step = step;
    if (step < 0.99 * min_step) {
      min_step = step;
      since_progress = 0;
    } else {
      ++since_progress;
    }
    const double remaining = step * (1.0 + ratio / (1.0 - ratio));
    // Realizations with a unit eigenvalue held in place only by the
    // invariant drift slowly under round-off; stop once steps stop shrinking.
    const bool at_roundoff =
        step < 1e-16 * scale || (since_progress > 50 && step < 1e-12 * scale);
    if (remaining < opts.tol * scale || at_roundoff) {
      return make_fixed_point(r, fam, std::move(xi), it);
    }
  }
  throw Error(ErrorCode::NoConvergence,
              std::string(name(r.algorithm)) + " fixed point not reached in " +
                  std::to_string(opts.max_iter) + " steps");
}

/// Direct solve for quadratic objectives (grad J = H y - H b): the stacked
/// fixed-point and invariant equations solved in least squares.
inline FixedPoint linear_fixed_point(const Realization& r,
                                     const ObjectiveFamily& fam) {
  if (fam.kind() != ObjectiveFamily::Kind::Quadratic) {
    throw Error(ErrorCode::InvalidArgument,
                "linear_fixed_point needs a quadratic family");
  }
  const Index nx = r.state_dim();
  const Matrix h = (2.0 * fam.a()).asDiagonal();
  const Vector hb = h * fam.b();
  Matrix lhs(nx + r.Fxi.rows(), nx);
  Vector rhs(nx + r.Fxi.rows());
  lhs.topRows(nx) = Matrix::Identity(nx, nx) - r.A - r.B * h * r.Cy;
  rhs.head(nx) = -r.B * hb;
  lhs.bottomRows(r.Fxi.rows()) = r.Fxi + r.Fu * h * r.Cy;
  rhs.tail(r.Fxi.rows()) = r.Fu * hb;
  Vector xi = lhs.colPivHouseholderQr().solve(rhs);
  return make_fixed_point(r, fam, std::move(xi), 0);
}

struct InvariantCheck {
  double max_residual = 0.0;
  bool pass = false;
};

/// max_t ||F_xi xi^t + F_u u^t|| over a recorded state/gradient sequence.
inline InvariantCheck check_invariant(const Realization& r,
                                      const std::vector<Vector>& xi,
                                      const std::vector<Vector>& u,
                                      double tol) {
  if (xi.size() != u.size()) {
    throw Error(ErrorCode::DimensionMismatch, "state and gradient series");
  }
  InvariantCheck c;
  for (std::size_t t = 0; t < xi.size(); ++t) {
    c.max_residual = std::max(c.max_residual, invariant_residual(r, xi[t], u[t]));
  }
  c.pass = c.max_residual < tol;
  return c;
}

/// ||F_xi B|| / max(1, ||F_xi||); zero when the invariant survives additive
/// gradient noise.
inline double noise_path_residual(const Realization& r) {
  if (r.Fxi.rows() == 0) return 0.0;
  return linalg::spectral_norm(r.Fxi * r.B) /
         std::max(1.0, linalg::spectral_norm(r.Fxi));
}

}  // namespace subiqc

#endif  // SUBIQC_ALGORITHMS_HPP
