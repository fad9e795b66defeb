#ifndef SUBIQC_IQC_HPP
#define SUBIQC_IQC_HPP

#include <subiqc/algorithms.hpp>
#include <subiqc/core.hpp>
#include <subiqc/objectives.hpp>
#include <subiqc/simulate.hpp>

#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace subiqc {

/// Filter Psi with psi+ = A_psi psi + By y + Bu u and
/// z = C_psi psi + Dy y + Du u, paired with the multiplier M.
struct IqcFilter {
  enum class Kind { Pointwise, RhoHard };

  Kind kind = Kind::Pointwise;
  Index agents = 0;
  Index n_psi = 0;
  Matrix A_psi, By, Bu, C_psi, Dy, Du, M;
  std::optional<double> rho_bar;

  Index z_dim() const { return Dy.rows(); }
};

inline const char* to_string(IqcFilter::Kind k) {
  return k == IqcFilter::Kind::Pointwise ? "pointwise" : "rho_hard";
}

namespace detail {

inline Matrix swap_multiplier(Index n) {
  Matrix m = Matrix::Zero(2 * n, 2 * n);
  m.topRightCorner(n, n).setIdentity();
  m.bottomLeftCorner(n, n).setIdentity();
  return m;
}

}  // namespace detail

/// Static sector filter: z = [L y - u; -m y + u], M = [0 I; I 0].
inline IqcFilter sector_iqc(const SectorBounds& sec) {
  const Index n = sec.agents();
  const Matrix id = Matrix::Identity(n, n);
  IqcFilter f;
  f.kind = IqcFilter::Kind::Pointwise;
  f.agents = n;
  f.n_psi = 0;
  f.A_psi = Matrix(0, 0);
  f.By = Matrix(0, n);
  f.Bu = Matrix(0, n);
  f.C_psi = Matrix(2 * n, 0);
  f.Dy.resize(2 * n, n);
  f.Dy << sec.L_bar(), -sec.m_bar();
  f.Du.resize(2 * n, n);
  f.Du << -id, id;
  f.M = detail::swap_multiplier(n);
  return f;
}

/// Weighted off-by-one filter: psi+ = u - L y (one step of memory),
/// z = [L y - u + rho_bar^2 psi; -m y + u]. Valid for any rho >= rho_bar.
inline IqcFilter off_by_one_iqc(const SectorBounds& sec, double rho_bar) {
  if (!(rho_bar >= 0.0 && rho_bar <= 1.0)) {
    throw Error(ErrorCode::InvalidRhoBar,
                "rho_bar must lie in [0, 1], got " + std::to_string(rho_bar));
  }
  const Index n = sec.agents();
  const Matrix id = Matrix::Identity(n, n);
  IqcFilter f;
  f.kind = IqcFilter::Kind::RhoHard;
  f.agents = n;
  f.n_psi = n;
  f.rho_bar = rho_bar;
  f.A_psi = Matrix::Zero(n, n);
  f.By = -sec.L_bar();
  f.Bu = id;
  f.C_psi.resize(2 * n, n);
  f.C_psi << rho_bar * rho_bar * id, Matrix::Zero(n, n);
  f.Dy.resize(2 * n, n);
  f.Dy << sec.L_bar(), -sec.m_bar();
  f.Du.resize(2 * n, n);
  f.Du << -id, id;
  f.M = detail::swap_multiplier(n);
  return f;
}

/// Stationary filter state (I - A_psi)^{-1} (By y* + Bu u*).
inline Vector filter_fixed_point(const IqcFilter& f, const Vector& y_star,
                                 const Vector& u_star) {
  if (f.n_psi == 0) return Vector(0);
  const Matrix lhs = Matrix::Identity(f.n_psi, f.n_psi) - f.A_psi;
  return lhs.partialPivLu().solve(f.By * y_star + f.Bu * u_star);
}

struct MBlock {
  Matrix M;
  Index offset = 0;  // first row of this filter's output inside z
  Index size = 0;
  IqcFilter::Kind kind = IqcFilter::Kind::Pointwise;
};

/// Algorithm dynamics augmented with the filter states.
struct ExtendedSystem {
  Matrix A_hat, B_hat, C_hat, D_hat;
  Matrix B_noise;  // [B; 0]
  Matrix Cw_hat;   // [C_w, 0]
  Matrix Fxi, Fu;
  Index n_xi = 0;   // n * n_alg
  Index n_psi = 0;  // total filter states
  Index n_z = 0;
  Index agents = 0;
  std::vector<MBlock> m_blocks;
  std::vector<IqcFilter> filters;

  Index state_dim() const { return n_xi + n_psi; }
};

inline ExtendedSystem extend(const Realization& r,
                             const std::vector<IqcFilter>& filters) {
  if (filters.empty()) {
    throw Error(ErrorCode::InvalidArgument, "extend needs at least one IQC");
  }
  const Index n = r.agents;
  ExtendedSystem e;
  e.agents = n;
  e.n_xi = r.state_dim();
  for (const auto& f : filters) {
    if (f.agents != n || f.By.cols() != n || f.Dy.cols() != n ||
        f.C_psi.cols() != f.n_psi || f.Du.rows() != f.Dy.rows() ||
        f.M.rows() != f.Dy.rows()) {
      throw Error(ErrorCode::DimensionMismatch,
                  "filter dimensions do not match the realization");
    }
    e.n_psi += f.n_psi;
    e.n_z += f.z_dim();
  }
  const Index nx = e.state_dim();
  e.A_hat = Matrix::Zero(nx, nx);
  e.A_hat.topLeftCorner(e.n_xi, e.n_xi) = r.A;
  e.B_hat = Matrix::Zero(nx, n);
  e.B_hat.topRows(e.n_xi) = r.B;
  e.C_hat = Matrix::Zero(e.n_z, nx);
  e.D_hat = Matrix::Zero(e.n_z, n);

  Index ps = e.n_xi;
  Index zo = 0;
  for (const auto& f : filters) {
    const Index nz = f.z_dim();
    if (f.n_psi > 0) {
      e.A_hat.block(ps, 0, f.n_psi, e.n_xi) = f.By * r.Cy;
      e.A_hat.block(ps, ps, f.n_psi, f.n_psi) = f.A_psi;
      e.B_hat.middleRows(ps, f.n_psi) = f.Bu;
      e.C_hat.block(zo, ps, nz, f.n_psi) = f.C_psi;
    }
    e.C_hat.block(zo, 0, nz, e.n_xi) = f.Dy * r.Cy;
    e.D_hat.middleRows(zo, nz) = f.Du;
    e.m_blocks.push_back({f.M, zo, nz, f.kind});
    ps += f.n_psi;
    zo += nz;
  }
  e.B_noise = Matrix::Zero(nx, n);
  e.B_noise.topRows(e.n_xi) = r.B;
  e.Cw_hat = Matrix::Zero(r.Cw.rows(), nx);
  e.Cw_hat.leftCols(e.n_xi) = r.Cw;
  e.Fxi = r.Fxi;
  e.Fu = r.Fu;
  e.filters = filters;
  return e;
}

/// Full-size (n_z x n_z) multiplier matrices, one per scalar lambda. With
/// per_agent, each 2N-block [0 I; I 0] splits into N rank-two pieces.
inline std::vector<Matrix> multiplier_terms(const ExtendedSystem& e,
                                            bool per_agent) {
  std::vector<Matrix> out;
  for (const auto& b : e.m_blocks) {
    if (!per_agent) {
      Matrix m = Matrix::Zero(e.n_z, e.n_z);
      m.block(b.offset, b.offset, b.size, b.size) = b.M;
      out.push_back(std::move(m));
      continue;
    }
    const Index half = b.size / 2;
    for (Index k = 0; k < half; ++k) {
      Matrix m = Matrix::Zero(e.n_z, e.n_z);
      for (Index i = 0; i < b.size; ++i) {
        for (Index j = 0; j < b.size; ++j) {
          const bool mine = (i % half == k) && (j % half == k);
          if (mine) m(b.offset + i, b.offset + j) = b.M(i, j);
        }
      }
      out.push_back(std::move(m));
    }
  }
  return out;
}

struct IqcReport {
  double min_value = std::numeric_limits<double>::infinity();
  double scale = 0.0;  // max_t ||z~^t||^2
  long argmin = -1;
  bool pass = true;
};

/// Evaluates the IQC along recorded y/u signals with psi^0 = psi*. Pointwise
/// filters report min_t z~'M z~; rho-hard filters report the minimum over T
/// of the partial sums sum_{t<=T} rho^{-2t} z~'M z~, tracked as
/// rho^{2T} S_T so long horizons do not overflow (the sign is unchanged).
inline IqcReport check_iqc(const IqcFilter& f, const std::vector<Vector>& y,
                           const std::vector<Vector>& u, const Vector& y_star,
                           const Vector& u_star, double rho,
                           double rel_tol = 1e-8) {
  if (y.size() != u.size()) {
    throw Error(ErrorCode::DimensionMismatch, "y and u series lengths");
  }
  IqcReport rep;
  Vector psi_star = filter_fixed_point(f, y_star, u_star);
  Vector psi = psi_star;
  const Vector z_star = f.C_psi * psi_star + f.Dy * y_star + f.Du * u_star;
  const double rho2 = rho * rho;
  double partial = 0.0;
  for (std::size_t t = 0; t < y.size(); ++t) {
    const Vector z = f.C_psi * psi + f.Dy * y[t] + f.Du * u[t];
    const Vector dz = z - z_star;
    const double q = dz.dot(f.M * dz);
    rep.scale = std::max(rep.scale, dz.squaredNorm());
    double v = q;
    if (f.kind == IqcFilter::Kind::RhoHard) {
      partial = rho2 * partial + q;
      v = partial;
    }
    if (v < rep.min_value) {
      rep.min_value = v;
      rep.argmin = static_cast<long>(t);
    }
    if (f.n_psi > 0) psi = f.A_psi * psi + f.By * y[t] + f.Bu * u[t];
  }
  if (y.empty()) rep.min_value = 0.0;
  rep.pass = rep.min_value >= -rel_tol * std::max(rep.scale, 1e-300);
  return rep;
}

inline IqcReport check_iqc(const IqcFilter& f, const Trajectory& tr,
                           const FixedPoint& fp, double rho,
                           double rel_tol = 1e-8) {
  if (tr.y.size() != static_cast<std::size_t>(tr.T)) {
    throw Error(ErrorCode::InvalidArgument,
                "check_iqc needs a trajectory run with record_signals");
  }
  return check_iqc(f, tr.y, tr.u, fp.y_star, fp.u_star, rho, rel_tol);
}

}  // namespace subiqc

#endif  // SUBIQC_IQC_HPP
