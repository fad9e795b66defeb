#ifndef SUBIQC_OBJECTIVES_HPP
#define SUBIQC_OBJECTIVES_HPP

#include <subiqc/core.hpp>
#include <subiqc/subspace_gossip.hpp>

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace subiqc {

/// Per-agent strong convexity m_k and gradient Lipschitz constant L_k.
class SectorBounds {
 public:
  SectorBounds(Vector m, Vector l) : m_(std::move(m)), l_(std::move(l)) {
    if (m_.size() != l_.size() || m_.size() == 0) {
      throw Error(ErrorCode::DimensionMismatch,
                  "sector bounds need matching nonempty m and L");
    }
    for (Index k = 0; k < m_.size(); ++k) {
      if (!(m_(k) > 0.0) || !(m_(k) <= l_(k))) {
        throw Error(ErrorCode::InvalidCoefficient,
                    "need 0 < m_k <= L_k at agent " + std::to_string(k));
      }
    }
  }

  Index agents() const noexcept { return m_.size(); }
  const Vector& m_per_agent() const noexcept { return m_; }
  const Vector& L_per_agent() const noexcept { return l_; }
  double m() const { return m_.minCoeff(); }
  double L() const { return l_.maxCoeff(); }
  double kappa() const { return L() / m(); }
  Matrix m_bar() const { return m_.asDiagonal(); }
  Matrix L_bar() const { return l_.asDiagonal(); }

 private:
  Vector m_;
  Vector l_;
};

/// Scalar per-agent objectives (d = 1) exposed through their gradients.
class ObjectiveFamily {
 public:
  enum class Kind { QuadCos, Quadratic, Custom };
  using ScalarOracle = std::function<double(Index agent, double w)>;

  ObjectiveFamily(Kind kind, Vector a, Vector b, SectorBounds sector,
                  ScalarOracle grad = {}, ScalarOracle value = {})
      : kind_(kind),
        a_(std::move(a)),
        b_(std::move(b)),
        sector_(std::move(sector)),
        grad_(std::move(grad)),
        value_(std::move(value)) {}

  Kind kind() const noexcept { return kind_; }
  Index agents() const noexcept { return sector_.agents(); }
  const SectorBounds& sector() const noexcept { return sector_; }
  const Vector& a() const noexcept { return a_; }
  const Vector& b() const noexcept { return b_; }

  double grad(Index k, double w) const {
    switch (kind_) {
      case Kind::QuadCos: return 2.0 * a_(k) * (w - b_(k)) + std::sin(w);
      case Kind::Quadratic: return 2.0 * a_(k) * (w - b_(k));
      case Kind::Custom: return grad_(k, w);
    }
    return 0.0;
  }

  std::optional<double> value(Index k, double w) const {
    const double d = b_.size() ? w - b_(k) : w;
    switch (kind_) {
      case Kind::QuadCos: return a_(k) * d * d - std::cos(w);
      case Kind::Quadratic: return a_(k) * d * d;
      case Kind::Custom:
        if (value_) return value_(k, w);
        return std::nullopt;
    }
    return std::nullopt;
  }

 private:
  Kind kind_;
  Vector a_;
  Vector b_;
  SectorBounds sector_;
  ScalarOracle grad_;
  ScalarOracle value_;
};

/// J_k(w) = a_k (w - b_k)^2 - cos(w); Hessian 2a_k + cos(w) lies in
/// [2a_k - 1, 2a_k + 1].
inline ObjectiveFamily quad_cos_family(const Vector& a, const Vector& b) {
  if (a.size() != b.size() || a.size() == 0) {
    throw Error(ErrorCode::DimensionMismatch, "a and b must match in length");
  }
  for (Index k = 0; k < a.size(); ++k) {
    if (!(a(k) > 0.5)) {
      throw Error(ErrorCode::InvalidCoefficient,
                  "quad_cos needs a_k > 1/2, got a_" + std::to_string(k) +
                      " = " + std::to_string(a(k)));
    }
  }
  Vector m = (2.0 * a).array() - 1.0;
  Vector l = (2.0 * a).array() + 1.0;
  return ObjectiveFamily(ObjectiveFamily::Kind::QuadCos, a, b,
                         SectorBounds(m, l));
}

/// J_k(w) = a_k (w - b_k)^2, so m_k = L_k = 2a_k.
inline ObjectiveFamily quadratic_family(const Vector& a, const Vector& b) {
  if (a.size() != b.size() || a.size() == 0) {
    throw Error(ErrorCode::DimensionMismatch, "a and b must match in length");
  }
  for (Index k = 0; k < a.size(); ++k) {
    if (!(a(k) > 0.0)) {
      throw Error(ErrorCode::InvalidCoefficient,
                  "quadratic needs a_k > 0 at agent " + std::to_string(k));
    }
  }
  return ObjectiveFamily(ObjectiveFamily::Kind::Quadratic, a, b,
                         SectorBounds(2.0 * a, 2.0 * a));
}

/// Arbitrary gradient oracle with declared sector bounds (test forgeries,
/// piecewise objectives). The declared bounds are not checked here.
inline ObjectiveFamily custom_family(SectorBounds sector,
                                     ObjectiveFamily::ScalarOracle grad,
                                     ObjectiveFamily::ScalarOracle value = {}) {
  const Index n = sector.agents();
  return ObjectiveFamily(ObjectiveFamily::Kind::Custom, Vector::Zero(n),
                         Vector::Zero(n), std::move(sector), std::move(grad),
                         std::move(value));
}

/// Stacked per-agent gradients col{grad J_k(y_k)}.
inline Vector gradient(const ObjectiveFamily& fam, const Vector& y) {
  if (y.size() != fam.agents()) {
    throw Error(ErrorCode::DimensionMismatch,
                "gradient expects " + std::to_string(fam.agents()) +
                    " entries, got " + std::to_string(y.size()));
  }
  Vector u(y.size());
  for (Index k = 0; k < y.size(); ++k) u(k) = fam.grad(k, y(k));
  return u;
}

struct OptResult {
  Vector omega_opt;
  long iterations = 0;
  double residual = 0.0;  // || P_U grad J(omega_opt) ||
};

struct SolveOptOptions {
  std::optional<double> mu;  // defaults to 1/L
  double tol = 1e-13;
  long max_iter = 1'000'000;
  std::optional<Vector> start;
};

/// Projected gradient on range(U): omega <- P_U (omega - mu grad J(omega)).
inline OptResult solve_opt(const ObjectiveFamily& fam, const Subspace& sub,
                           const SolveOptOptions& opts = {}) {
  if (sub.dim() != fam.agents()) {
    throw Error(ErrorCode::DimensionMismatch, "subspace vs objective size");
  }
  const double big_l = fam.sector().L();
  const double mu = opts.mu.value_or(1.0 / big_l);
  if (!(mu > 0.0 && mu < 2.0 / big_l)) {
    throw Error(ErrorCode::InvalidArgument,
                "solve_opt needs 0 < mu < 2/L = " + std::to_string(2.0 / big_l));
  }
  const Matrix& p = sub.projection();
  Vector w = opts.start ? Vector(p * *opts.start) : Vector(Vector::Zero(fam.agents()));
  OptResult res;
  for (long it = 1; it <= opts.max_iter; ++it) {
    Vector next = p * (w - mu * gradient(fam, w));
    const double step = (next - w).norm();
    w = std::move(next);
    if (step < opts.tol) {
      res.omega_opt = w;
      res.iterations = it;
      res.residual = (p * gradient(fam, w)).norm();
      return res;
    }
  }
  throw Error(ErrorCode::NoConvergence,
              "projected gradient did not converge in " +
                  std::to_string(opts.max_iter) + " iterations (residual " +
                  std::to_string((p * gradient(fam, w)).norm()) + ")");
}

inline OptResult solve_opt(const ObjectiveFamily& fam, const Subspace& sub,
                           double mu, double tol, long max_iter) {
  SolveOptOptions o;
  o.mu = mu;
  o.tol = tol;
  o.max_iter = max_iter;
  return solve_opt(fam, sub, o);
}

struct AgentSectorSample {
  double min_ratio = std::numeric_limits<double>::infinity();
  double max_ratio = 0.0;
  bool lipschitz_ok = true;
  bool strong_convexity_ok = true;
};

struct SectorReport {
  bool ok = true;
  std::vector<AgentSectorSample> agents;
};

/// Sampling-based spot check of the declared (m_k, L_k); a test utility,
/// not a proof.
inline SectorReport verify_sector(const ObjectiveFamily& fam, long n_samples,
                                  double lo, double hi, std::uint64_t seed) {
  if (!(std::isfinite(lo) && std::isfinite(hi) && lo < hi)) {
    throw Error(ErrorCode::InvalidArgument, "box must be a finite interval");
  }
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> unif(lo, hi);
  SectorReport rep;
  const auto& sec = fam.sector();
  for (Index k = 0; k < fam.agents(); ++k) {
    AgentSectorSample s;
    for (long i = 0; i < n_samples; ++i) {
      const double wa = unif(gen);
      const double wb = unif(gen);
      const double dw = wa - wb;
      if (std::abs(dw) < 1e-9) continue;
      const double dg = fam.grad(k, wa) - fam.grad(k, wb);
      const double upper = std::abs(dg) / std::abs(dw);
      const double lower = dg * dw / (dw * dw);
      s.max_ratio = std::max(s.max_ratio, upper);
      s.min_ratio = std::min(s.min_ratio, lower);
    }
    s.lipschitz_ok = s.max_ratio <= sec.L_per_agent()(k) + 1e-9;
    s.strong_convexity_ok = s.min_ratio >= sec.m_per_agent()(k) - 1e-9;
    rep.ok = rep.ok && s.lipschitz_ok && s.strong_convexity_ok;
    rep.agents.push_back(s);
  }
  return rep;
}

}  // namespace subiqc

#endif  // SUBIQC_OBJECTIVES_HPP
