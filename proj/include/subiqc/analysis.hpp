#ifndef SUBIQC_ANALYSIS_HPP
#define SUBIQC_ANALYSIS_HPP

#include <subiqc/algorithms.hpp>
#include <subiqc/core.hpp>
#include <subiqc/iqc.hpp>
#include <subiqc/objectives.hpp>
#include <subiqc/sdp.hpp>
#include <subiqc/simulate.hpp>
#include <subiqc/subspace_gossip.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace subiqc {

/// Orthonormal basis of null([F_xi, 0, F_u]); identity when F vanishes.
inline Matrix nullspace_basis(const Matrix& f_xi, const Matrix& f_u,
                              Index n_psi) {
  if (f_xi.rows() != f_u.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "F_xi and F_u row counts");
  }
  Matrix f = Matrix::Zero(f_xi.rows(), f_xi.cols() + n_psi + f_u.cols());
  f.leftCols(f_xi.cols()) = f_xi;
  f.rightCols(f_u.cols()) = f_u;
  return linalg::nullspace(f);
}

enum class RhoBarPolicy { Zero, Rho, Custom };

/// Which IQCs describe the gradient map and how the off-by-one weight is
/// chosen at each rate probe.
struct IqcConfig {
  bool sector = true;
  bool off_by_one = true;
  RhoBarPolicy rho_bar = RhoBarPolicy::Rho;
  double custom_rho_bar = 0.0;
  bool per_agent_multipliers = false;
};

inline std::vector<IqcFilter> build_filters(const SectorBounds& sec,
                                            const IqcConfig& cfg, double rho) {
  std::vector<IqcFilter> out;
  if (cfg.sector) out.push_back(sector_iqc(sec));
  if (cfg.off_by_one) {
    double rb = 0.0;
    switch (cfg.rho_bar) {
      case RhoBarPolicy::Zero: rb = 0.0; break;
      case RhoBarPolicy::Rho: rb = std::min(rho, 1.0); break;
      case RhoBarPolicy::Custom:
        rb = cfg.custom_rho_bar;
        if (rb > rho + 1e-15) {
          throw Error(ErrorCode::InvalidRhoBar,
                      "custom rho_bar " + std::to_string(rb) +
                          " exceeds the probed rate " + std::to_string(rho));
        }
        break;
    }
    out.push_back(off_by_one_iqc(sec, rb));
  }
  if (out.empty()) {
    throw Error(ErrorCode::InvalidArgument, "IQC configuration selects nothing");
  }
  return out;
}

enum class CertMode { Rate, Sensitivity };

struct CertificateCheck {
  double max_eig = 0.0;    // largest eigenvalue of the assembled left side
  double min_eig_p = 0.0;  // smallest eigenvalue of P
  double min_lambda = 0.0;
  double scale = 1.0;      // magnitude of the assembled terms
  double p_norm = 0.0;
  bool pass = false;
};

struct Certificate {
  CertMode mode = CertMode::Rate;
  Matrix P;
  Vector lambdas;
  bool per_agent = false;
  double rho = 1.0;    // probed rate (1 for sensitivity)
  double bound = 0.0;  // certified rho or gamma
  double c = 0.0;      // sqrt(lambda_max(P) / lambda_min(P)), rate only
  CertificateCheck verify;
};

/// Pieces of the LMI that do not depend on P or lambda:
/// E = [I 0] H, K = [A_hat B_hat] H, Q_i = H'[C_hat D_hat]' M_i [C_hat D_hat] H
/// and Omega = (C_w_hat E)'(C_w_hat E).
struct LmiData {
  Matrix H, E, K, Omega;
  std::vector<Matrix> Q;
};

inline LmiData lmi_data(const ExtendedSystem& e, bool per_agent) {
  LmiData d;
  const Index nx = e.state_dim();
  d.H = nullspace_basis(e.Fxi, e.Fu, e.n_psi);
  d.E = d.H.topRows(nx);
  Matrix ab(nx, nx + e.agents);
  ab << e.A_hat, e.B_hat;
  d.K = ab * d.H;
  Matrix cd(e.n_z, nx + e.agents);
  cd << e.C_hat, e.D_hat;
  const Matrix cdh = cd * d.H;
  for (const Matrix& m : multiplier_terms(e, per_agent)) {
    d.Q.push_back(linalg::symmetrize(cdh.transpose() * m * cdh));
  }
  const Matrix ce = e.Cw_hat * d.E;
  d.Omega = ce.transpose() * ce;
  return d;
}

/// Left side of the rate LMI (or of the sensitivity LMI when
/// `with_output`), restricted to range(H).
inline Matrix assemble_lmi(const LmiData& d, const Matrix& p,
                           const Vector& lambdas, double rho, bool with_output) {
  if (lambdas.size() != static_cast<Index>(d.Q.size())) {
    throw Error(ErrorCode::DimensionMismatch, "multiplier count");
  }
  Matrix g = d.K.transpose() * p * d.K - rho * rho * (d.E.transpose() * p * d.E);
  for (std::size_t i = 0; i < d.Q.size(); ++i) g += lambdas(Index(i)) * d.Q[i];
  if (with_output) g += d.Omega;
  return linalg::symmetrize(g);
}

struct VerifyTolerances {
  double lmi = 1e-7;
  double psd = 1e-9;
  double lambda = 1e-12;
};

inline CertificateCheck verify_certificate(const ExtendedSystem& e,
                                           const Certificate& cert,
                                           CertMode mode, double rho,
                                           const VerifyTolerances& tol = {}) {
  if (cert.P.rows() != e.state_dim() || cert.P.cols() != e.state_dim()) {
    throw Error(ErrorCode::DimensionMismatch, "certificate P size");
  }
  const LmiData d = lmi_data(e, cert.per_agent);
  const bool sens = mode == CertMode::Sensitivity;
  const double r = sens ? 1.0 : rho;
  const Matrix lhs = assemble_lmi(d, cert.P, cert.lambdas, r, sens);
  CertificateCheck c;
  c.max_eig = linalg::max_eigenvalue(lhs);
  c.min_eig_p = linalg::min_eigenvalue(cert.P);
  c.p_norm = linalg::spectral_norm(cert.P);
  c.min_lambda = cert.lambdas.size() ? cert.lambdas.minCoeff() : 0.0;
  double scale = linalg::spectral_norm(d.K.transpose() * cert.P * d.K) +
                 r * r * linalg::spectral_norm(d.E.transpose() * cert.P * d.E);
  for (std::size_t i = 0; i < d.Q.size(); ++i)
    scale += std::abs(cert.lambdas(Index(i))) * linalg::spectral_norm(d.Q[i]);
  if (sens) scale += linalg::spectral_norm(d.Omega);
  c.scale = std::max(scale, 1e-300);
  c.pass = c.max_eig <= tol.lmi * c.scale &&
           c.min_eig_p >= -tol.psd * std::max(c.p_norm, 1e-300) &&
           c.min_lambda >= -tol.lambda;
  return c;
}

enum class Backend { Internal, External };

struct SolverOptions {
  Backend backend = Backend::Internal;
  std::string external_command = "python3 tools/external_sdp.py";
  std::string workdir = ".";
  sdp::Settings settings;
  double margin = 1e-9;  // strictness: LMI <= -margin * scale
};

namespace detail {

// Reduced Lyapunov coordinates: only range V = orth([E, K, B_noise]) enters
// the LMI and the trace objective, so P = V P_r V' loses nothing, and any
// multiple of (I - V V') may be added to P without changing either.
struct Reduced {
  Matrix V, Er, Kr;
  Index d = 0;
  std::vector<std::pair<Index, Index>> idx;  // (a, b), a <= b

  Matrix unpack(const Vector& y) const {
    Matrix p(d, d);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      p(idx[k].first, idx[k].second) = y(Index(k));
      p(idx[k].second, idx[k].first) = y(Index(k));
    }
    return p;
  }
};

inline Reduced reduce(const ExtendedSystem& e, const LmiData& d) {
  Reduced r;
  Matrix stack(e.state_dim(), d.E.cols() + d.K.cols() + e.B_noise.cols());
  stack << d.E, d.K, e.B_noise;
  r.V = linalg::orth(stack, 1e-11);
  r.d = r.V.cols();
  r.Er = r.V.transpose() * d.E;
  r.Kr = r.V.transpose() * d.K;
  for (Index a = 0; a < r.d; ++a)
    for (Index b = a; b < r.d; ++b) r.idx.emplace_back(a, b);
  return r;
}

// Basis matrix of G for the P_r entry (a, b).
inline Matrix g_basis(const Reduced& r, Index a, Index b, double rho) {
  const Vector ka = r.Kr.row(a).transpose(), kb = r.Kr.row(b).transpose();
  const Vector ea = r.Er.row(a).transpose(), eb = r.Er.row(b).transpose();
  Matrix g = ka * kb.transpose() - rho * rho * (ea * eb.transpose());
  if (a != b) g += g.transpose().eval();
  return g;
}

inline Matrix unit_sym(Index d, Index a, Index b) {
  Matrix m = Matrix::Zero(d, d);
  m(a, b) = 1.0;
  m(b, a) = 1.0;
  return m;
}

inline sdp::Result run_solver(const sdp::Problem& prob,
                              const SolverOptions& opts) {
  if (opts.backend == Backend::External) {
    return sdp::solve_external(prob, opts.external_command, opts.workdir);
  }
  return sdp::solve(prob, opts.settings);
}

}  // namespace detail

/// Outcome of one rate probe. `cert` is set only when a certificate passed
/// verification with the strict margin; otherwise `infeasibility_proved`
/// tells whether the solver returned a dual certificate (t* >= 0 at optimum).
struct RateProbe {
  std::optional<Certificate> cert;
  double t_star = 0.0;
  sdp::Status status = sdp::Status::NumericalFailure;
  bool infeasibility_proved = false;
};

/// Maximize -t subject to t I - G(P_r, lambda) >= 0, P_r >= 0, lambda >= 0,
/// tr(P_r) + sum lambda <= 1. Always feasible and bounded; the LMI is
/// strictly feasible iff t* < 0.
inline RateProbe rate_probe(const ExtendedSystem& e, double rho,
                            bool per_agent = false,
                            const SolverOptions& opts = {}) {
  if (!(rho > 0.0)) throw Error(ErrorCode::InvalidArgument, "rho must be > 0");
  const LmiData d = lmi_data(e, per_agent);
  const detail::Reduced red = detail::reduce(e, d);
  const Index h = d.H.cols();
  const Index np = static_cast<Index>(red.idx.size());
  const Index nl = static_cast<Index>(d.Q.size());
  const Index it = np + nl;

  sdp::Problem prob;
  prob.m = np + nl + 1;
  prob.b = Vector::Zero(prob.m);
  prob.b(it) = -1.0;
  const Index lmi = prob.add_block(h, false);
  const Index pblk = prob.add_block(red.d, false);
  const Index lp = prob.add_block(nl + 1, true);
  auto& bl = prob.blocks;
  for (Index k = 0; k < np; ++k) {
    const auto [a, b] = red.idx[std::size_t(k)];
    bl[lmi].terms.emplace_back(k, detail::g_basis(red, a, b, rho));
    bl[pblk].terms.emplace_back(k, -detail::unit_sym(red.d, a, b));
    if (a == b) {
      Matrix cap = Matrix::Zero(nl + 1, 1);
      cap(nl, 0) = 1.0;
      bl[lp].terms.emplace_back(k, cap);
    }
  }
  for (Index i = 0; i < nl; ++i) {
    bl[lmi].terms.emplace_back(np + i, d.Q[std::size_t(i)]);
    Matrix col = Matrix::Zero(nl + 1, 1);
    col(i, 0) = -1.0;
    col(nl, 0) = 1.0;
    bl[lp].terms.emplace_back(np + i, col);
  }
  bl[lmi].terms.emplace_back(it, -Matrix::Identity(h, h));
  bl[lp].C(nl, 0) = 1.0;

  RateProbe out;
  const sdp::Result res = detail::run_solver(prob, opts);
  out.status = res.status;
  if (res.y.size() != prob.m || !res.y.allFinite()) {
    throw Error(ErrorCode::SolverFailure, "rate probe returned no iterate");
  }
  out.t_star = res.y(it);
  if (res.status == sdp::Status::NumericalFailure &&
      std::max(res.primal_infeas, res.dual_infeas) > 1e-3) {
    throw Error(ErrorCode::SolverFailure,
                std::string("rate probe broke down: ") + sdp::to_string(res.status));
  }
  out.infeasibility_proved =
      res.status == sdp::Status::Optimal && res.primal_obj > -opts.margin;
  if (!(out.t_star < 0.0)) return out;

  // Certificate: P_r + eps I keeps G <= t*/2 and makes P positive definite.
  Matrix pr = red.unpack(res.y.head(np));
  Vector lam = res.y.segment(np, nl).cwiseMax(0.0);
  const double kk = linalg::spectral_norm(red.Kr.transpose() * red.Kr);
  const double shift = std::max(0.0, -linalg::min_eigenvalue(pr));
  const double eps = 0.5 * std::abs(out.t_star) / std::max(kk, 1e-300);
  pr += (shift + eps) * Matrix::Identity(red.d, red.d);
  const Index nx = e.state_dim();
  Matrix p = red.V * pr * red.V.transpose() +
             eps * (Matrix::Identity(nx, nx) - red.V * red.V.transpose());
  p = linalg::symmetrize(p);
  // Normalize so lambda_min(P) = 1; the LMI is homogeneous.
  const double pmin = linalg::min_eigenvalue(p);
  if (pmin > 0.0) {
    p /= pmin;
    lam /= pmin;
  }

  Certificate cert;
  cert.mode = CertMode::Rate;
  cert.P = p;
  cert.lambdas = lam;
  cert.per_agent = per_agent;
  cert.rho = rho;
  cert.bound = rho;
  cert.verify = verify_certificate(e, cert, CertMode::Rate, rho);
  const double pmax = linalg::max_eigenvalue(p);
  const double pm = linalg::min_eigenvalue(p);
  cert.c = pm > 0.0 ? std::sqrt(pmax / pm)
                    : std::numeric_limits<double>::infinity();
  const bool strict = cert.verify.max_eig <= -opts.margin * cert.verify.scale;
  if (cert.verify.pass && strict && pm > 0.0) out.cert = std::move(cert);
  return out;
}

inline std::optional<Certificate> rate_lmi_feasible(
    const ExtendedSystem& e, double rho, bool per_agent = false,
    const SolverOptions& opts = {}) {
  return rate_probe(e, rho, per_agent, opts).cert;
}

struct BisectionOptions {
  double rho_lo = 0.3;
  double rho_hi = 1.0 - 1e-6;
  double tol = 1e-3;
};

struct RateResult {
  double rho = 1.0;
  Certificate cert;
  int probes = 0;
};

/// Bisection on rho; `system_at(rho)` rebuilds the extended system for each
/// probe (rho-hard filters depend on rho through the rho_bar policy).
inline RateResult certify_rate(
    const std::function<ExtendedSystem(double)>& system_at,
    const BisectionOptions& bo, bool per_agent, const SolverOptions& opts) {
  if (!(bo.rho_lo < bo.rho_hi) || !(bo.rho_hi <= 1.0) || !(bo.rho_lo >= 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "need 0 <= rho_lo < rho_hi <= 1");
  }
  RateResult out;
  auto probe = [&](double rho) {
    ++out.probes;
    return rate_lmi_feasible(system_at(rho), rho, per_agent, opts);
  };
  auto hi_cert = probe(bo.rho_hi);
  if (!hi_cert) {
    throw Error(ErrorCode::InfeasibleAtUpper,
                "no rate certificate at rho = " + std::to_string(bo.rho_hi));
  }
  double hi = bo.rho_hi;
  double lo = bo.rho_lo;
  Certificate best = *hi_cert;
  // Extend the bracket downward while the lower end is still certifiable.
  while (lo > 1e-6) {
    auto c = probe(lo);
    if (!c) break;
    hi = lo;
    best = *c;
    lo = lo > 0.05 ? lo - std::min(0.25, lo / 2.0) : lo / 4.0;
  }
  if (lo <= 1e-6) lo = 0.0;
  while (hi - lo > bo.tol) {
    const double mid = 0.5 * (lo + hi);
    auto c = probe(mid);
    if (c) {
      hi = mid;
      best = *c;
    } else {
      lo = mid;
    }
  }
  out.rho = hi;
  out.cert = std::move(best);
  return out;
}

inline RateResult certify_rate(const ExtendedSystem& e,
                               const BisectionOptions& bo = {},
                               bool per_agent = false,
                               const SolverOptions& opts = {}) {
  return certify_rate([&](double) { return e; }, bo, per_agent, opts);
}

inline RateResult certify_rate(const Realization& r, const SectorBounds& sec,
                               const IqcConfig& cfg,
                               const BisectionOptions& bo = {},
                               const SolverOptions& opts = {}) {
  return certify_rate(
      [&](double rho) { return extend(r, build_filters(sec, cfg, rho)); }, bo,
      cfg.per_agent_multipliers, opts);
}

struct SensitivityResult {
  double gamma = 0.0;
  Certificate cert;
  bool cap_active = false;
};

/// Minimize tr(R B' P11 B) subject to the sensitivity LMI (rho = 1).
inline SensitivityResult certify_sensitivity(const ExtendedSystem& e,
                                             const Matrix& noise_bound,
                                             bool per_agent = false,
                                             const SolverOptions& opts = {}) {
  linalg::require_square(noise_bound, "R");
  if (noise_bound.rows() != e.agents) {
    throw Error(ErrorCode::DimensionMismatch, "R must be N x N");
  }
  if (linalg::min_eigenvalue(noise_bound) < -1e-12) {
    throw Error(ErrorCode::InvalidArgument, "R must be PSD");
  }
  // Strict rate feasibility at rho = 1 is equivalent to feasibility here
  // (scale P until the output term is dominated); it also sizes the caps.
  const RateProbe pre = rate_probe(e, 1.0, per_agent, opts);
  if (!pre.cert) {
    throw Error(ErrorCode::Infeasible,
                "no stability certificate at rho = 1 (t* = " +
                    std::to_string(pre.t_star) + ")");
  }
  const LmiData d = lmi_data(e, per_agent);
  const detail::Reduced red = detail::reduce(e, d);
  const Index h = d.H.cols();
  const Index np = static_cast<Index>(red.idx.size());
  const Index nl = static_cast<Index>(d.Q.size());

  const double omega_norm = linalg::spectral_norm(d.Omega);
  const double t0 = std::abs(pre.t_star);
  // The pre-check solution (trace-normalized) scaled by s satisfies the LMI;
  // the cap leaves several orders of magnitude of room above it.
  const double s = 2.0 * (omega_norm + 1.0) / t0;
  const double cap = 1e4 * s;
  const double margin = opts.margin * std::max(1.0, omega_norm);

  const Matrix w_obj = red.V.transpose() * e.B_noise * noise_bound *
                       e.B_noise.transpose() * red.V;
  sdp::Problem prob;
  prob.m = np + nl;
  prob.b = Vector::Zero(prob.m);
  const Index lmi = prob.add_block(h, false);
  const Index pblk = prob.add_block(red.d, false);
  const Index lp = prob.add_block(nl + 1, true);
  auto& bl = prob.blocks;
  bl[lmi].C = -d.Omega - margin * Matrix::Identity(h, h);
  for (Index k = 0; k < np; ++k) {
    const auto [a, b] = red.idx[std::size_t(k)];
    prob.b(k) = -(a == b ? w_obj(a, a) : 2.0 * w_obj(a, b));
    bl[lmi].terms.emplace_back(k, detail::g_basis(red, a, b, 1.0));
    Matrix u = detail::unit_sym(red.d, a, b);
    bl[pblk].terms.emplace_back(k, -u);
    if (a == b) {
      Matrix c = Matrix::Zero(nl + 1, 1);
      c(nl, 0) = 1.0;
      bl[lp].terms.emplace_back(k, c);
    }
  }
  for (Index i = 0; i < nl; ++i) {
    bl[lmi].terms.emplace_back(np + i, d.Q[std::size_t(i)]);
    Matrix col = Matrix::Zero(nl + 1, 1);
    col(i, 0) = -1.0;
    col(nl, 0) = 1.0;
    bl[lp].terms.emplace_back(np + i, col);
  }
  bl[lp].C(nl, 0) = cap;

  const sdp::Result res = detail::run_solver(prob, opts);
  if (res.y.size() != prob.m || !res.y.allFinite()) {
    throw Error(ErrorCode::SolverFailure, "sensitivity SDP returned no iterate");
  }
  if (res.status == sdp::Status::Infeasible) {
    throw Error(ErrorCode::Infeasible, "sensitivity LMI infeasible");
  }
  if (res.status != sdp::Status::Optimal &&
      std::max(res.primal_infeas, res.dual_infeas) > 1e-6) {
    throw Error(ErrorCode::SolverFailure,
                std::string("sensitivity SDP: ") + sdp::to_string(res.status));
  }
  Matrix pr = red.unpack(res.y.head(np));
  const double shift = std::max(0.0, -linalg::min_eigenvalue(pr));
  pr += shift * Matrix::Identity(red.d, red.d);
  const Vector lam = res.y.segment(np, nl).cwiseMax(0.0);

  SensitivityResult out;
  Certificate& cert = out.cert;
  cert.mode = CertMode::Sensitivity;
  cert.P = linalg::symmetrize(red.V * pr * red.V.transpose());
  cert.lambdas = lam;
  cert.per_agent = per_agent;
  cert.rho = 1.0;
  const double obj =
      (noise_bound * e.B_noise.transpose() * cert.P * e.B_noise).trace();
  out.gamma = std::sqrt(std::max(0.0, obj));
  cert.bound = out.gamma;
  cert.verify = verify_certificate(e, cert, CertMode::Sensitivity, 1.0);
  out.cap_active = pr.trace() + lam.sum() > 0.99 * cap;
  if (!cert.verify.pass) {
    throw Error(ErrorCode::SolverFailure,
                "sensitivity certificate failed re-verification (max eig " +
                    std::to_string(cert.verify.max_eig) + ", scale " +
                    std::to_string(cert.verify.scale) + ")");
  }
  return out;
}

inline SensitivityResult certify_sensitivity(const Realization& r,
                                             const SectorBounds& sec,
                                             const IqcConfig& cfg,
                                             const Matrix& noise_bound,
                                             const SolverOptions& opts = {}) {
  return certify_sensitivity(extend(r, build_filters(sec, cfg, 1.0)),
                             noise_bound, cfg.per_agent_multipliers, opts);
}

/// Everything needed to instantiate one algorithm at a given step size.
struct SweepContext {
  Algorithm algorithm = Algorithm::DiSPO;
  GossipMatrix gossip;
  Subspace subspace;
  AlgParams base;  // mu is overwritten per grid point
  SectorBounds sector;
  Matrix noise_bound;
  IqcConfig iqc;
  BisectionOptions bisection;
  SolverOptions solver;
  std::optional<ObjectiveFamily> family;  // needed only for the bias column
  std::optional<Vector> omega_opt;
};

struct SweepRow {
  double mu = 0.0;
  double rho = std::numeric_limits<double>::quiet_NaN();
  double gamma = std::numeric_limits<double>::quiet_NaN();
  bool rate_feasible = false;
  bool sensitivity_feasible = false;
  std::optional<double> bias;  // ||omega_opt - omega*||
  std::string note;

  bool feasible() const { return rate_feasible && sensitivity_feasible; }
};

struct SweepResult {
  std::string algorithm;
  double sigma = 0.0;
  std::vector<SweepRow> rows;
  std::optional<std::size_t> knee;  // first row where rho and gamma both worsen
};

inline std::vector<double> log_grid(double lo, double hi, int n) {
  if (n < 1 || !(lo > 0.0) || !(hi >= lo)) {
    throw Error(ErrorCode::InvalidArgument, "log grid needs 0 < lo <= hi, n >= 1");
  }
  std::vector<double> g;
  for (int i = 0; i < n; ++i) {
    const double f = n == 1 ? 0.0 : double(i) / double(n - 1);
    g.push_back(std::exp(std::log(lo) + f * (std::log(hi) - std::log(lo))));
  }
  return g;
}

inline SweepRow sweep_point(const SweepContext& ctx, double mu, bool bias) {
  SweepRow row;
  row.mu = mu;
  AlgParams prm = ctx.base;
  prm.mu = mu;
  const Realization r = build(ctx.algorithm, ctx.gossip, ctx.subspace, prm);
  try {
    row.rho = certify_rate(r, ctx.sector, ctx.iqc, ctx.bisection, ctx.solver).rho;
    row.rate_feasible = true;
  } catch (const Error& e) {
    row.note = e.what();
  }
  if (row.rate_feasible) {
    try {
      row.gamma = certify_sensitivity(r, ctx.sector, ctx.iqc, ctx.noise_bound,
                                      ctx.solver)
                      .gamma;
      row.sensitivity_feasible = true;
    } catch (const Error& e) {
      row.note = e.what();
    }
  }
  if (bias && ctx.family && ctx.omega_opt) {
    try {
      const FixedPoint fp = fixed_point(r, *ctx.family);
      row.bias = (fp.omega_star - *ctx.omega_opt).norm();
    } catch (const Error& e) {
      if (row.note.empty()) row.note = e.what();
    }
  }
  return row;
}

inline std::optional<std::size_t> find_knee(const std::vector<SweepRow>& rows) {
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const SweepRow& a = rows[i - 1];
    const SweepRow& b = rows[i];
    if (a.feasible() && b.feasible() && b.rho > a.rho && b.gamma > a.gamma) {
      return i;
    }
  }
  return std::nullopt;
}

/// Certified (rho, gamma) per step size; infeasible points stay in the table.
inline SweepResult tradeoff_sweep(const SweepContext& ctx,
                                  std::vector<double> mu_grid,
                                  bool bias = false, unsigned threads = 0) {
  std::sort(mu_grid.begin(), mu_grid.end());
  SweepResult out;
  out.algorithm = std::string(name(ctx.algorithm));
  out.sigma = ctx.gossip.spectral_gap();
  out.rows.resize(mu_grid.size());
  parallel_for(
      mu_grid.size(),
      [&](std::size_t i) { out.rows[i] = sweep_point(ctx, mu_grid[i], bias); },
      threads);
  out.knee = find_knee(out.rows);
  return out;
}

}  // namespace subiqc

#endif  // SUBIQC_ANALYSIS_HPP
