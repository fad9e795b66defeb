#ifndef SUBIQC_SIMULATE_HPP
#define SUBIQC_SIMULATE_HPP

#include <subiqc/algorithms.hpp>
#include <subiqc/core.hpp>
#include <subiqc/objectives.hpp>

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

namespace subiqc {

/// Zero-mean Gaussian gradient noise whose covariance actual_cov is bounded by
/// R in the PSD order.
class NoiseModel {
 public:
  NoiseModel(Matrix bound, Matrix actual_cov, std::uint64_t seed)
      : bound_(std::move(bound)), actual_(std::move(actual_cov)), seed_(seed) {
    linalg::require_square(bound_, "noise bound R");
    linalg::require_same_size(bound_, actual_, "noise covariance");
    if (linalg::asymmetry(bound_) > 1e-12 * (1.0 + linalg::max_abs(bound_)) ||
        linalg::asymmetry(actual_) > 1e-12 * (1.0 + linalg::max_abs(actual_))) {
      throw Error(ErrorCode::InvalidArgument, "noise matrices must be symmetric");
    }
    if (linalg::min_eigenvalue(actual_) < -1e-12) {
      throw Error(ErrorCode::InvalidArgument, "actual_cov must be PSD");
    }
    if (linalg::min_eigenvalue(bound_ - actual_) < -1e-12) {
      throw Error(ErrorCode::InvalidArgument, "actual_cov must satisfy cov <= R");
    }
    factor_ = linalg::psd_sqrt(actual_);
  }

  NoiseModel(Matrix bound, std::uint64_t seed)
      : NoiseModel(bound, bound, seed) {}

  static NoiseModel isotropic(Index n, double sigma_w, std::uint64_t seed) {
    return NoiseModel(sigma_w * sigma_w * Matrix::Identity(n, n), seed);
  }

  const Matrix& bound() const noexcept { return bound_; }
  const Matrix& actual_cov() const noexcept { return actual_; }
  const Matrix& factor() const noexcept { return factor_; }
  std::uint64_t seed() const noexcept { return seed_; }

  NoiseModel with_seed(std::uint64_t seed) const {
    NoiseModel m = *this;
    m.seed_ = seed;
    return m;
  }

 private:
  Matrix bound_;
  Matrix actual_;
  Matrix factor_;
  std::uint64_t seed_;
};

/// Draws independent w^t ~ N(0, actual_cov); one engine per trajectory.
class NoiseStream {
 public:
  explicit NoiseStream(const NoiseModel& model)
      : factor_(model.factor()), gen_(model.seed()), z_(model.factor().rows()) {}

  const Vector& next() {
    for (Index i = 0; i < z_.size(); ++i) z_(i) = normal_(gen_);
    w_.noalias() = factor_ * z_;
    return w_;
  }

 private:
  Matrix factor_;
  std::mt19937_64 gen_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  Vector z_;
  Vector w_;
};

struct TrajectoryMeta {
  std::string algorithm;
  double mu = 0.0;
  double sigma = 0.0;
  std::uint64_t seed = 0;
  bool noisy = false;
};

/// Per-step record of a run of the state-space recursion. Index t runs over
/// 0..T-1 and refers to the state before the t-th update.
struct Trajectory {
  long T = 0;
  std::vector<double> err_opt;  // ||omega^t - omega_opt||
  std::vector<double> err_fp;   // ||xi^t - xi*||
  std::vector<double> dev_fp;   // ||omega^t - omega*||
  std::vector<Vector> omega;
  std::vector<Vector> xi;  // every `thin`-th state when recorded
  std::vector<Vector> y;   // gradient-map inputs when signals are recorded
  std::vector<Vector> u;   // noise-free gradients grad J(y^t)
  long thin = 1;
  TrajectoryMeta meta;
};

struct RunOptions {
  long T = 1000;
  std::optional<NoiseModel> noise;
  std::optional<Vector> xi0;
  std::optional<Vector> omega0;     // canonical start when xi0 is absent
  std::optional<Vector> omega_opt;  // reference for err_opt; omega* if absent
  bool record_omega = true;
  bool record_states = false;
  bool record_signals = false;
  long thin = 1;
  double divergence_bound = 1e12;
};

inline Trajectory run(const Realization& r, const ObjectiveFamily& fam,
                      const FixedPoint& fp, const RunOptions& opts) {
  if (opts.T < 0) throw Error(ErrorCode::InvalidArgument, "T must be >= 0");
  if (fam.agents() != r.agents) {
    throw Error(ErrorCode::DimensionMismatch, "objective vs realization size");
  }
  Vector xi = opts.xi0 ? *opts.xi0 : canonical_init(r, fam, opts.omega0);
  if (xi.size() != r.state_dim()) {
    throw Error(ErrorCode::DimensionMismatch, "initial state size");
  }
  const Vector& w_ref = opts.omega_opt ? *opts.omega_opt : fp.omega_star;

  Trajectory tr;
  tr.T = opts.T;
  tr.thin = std::max<long>(1, opts.thin);
  tr.meta.algorithm = std::string(name(r.algorithm));
  tr.meta.mu = r.params.mu;
  tr.meta.noisy = opts.noise.has_value();
  if (opts.noise) tr.meta.seed = opts.noise->seed();
  const auto n = static_cast<std::size_t>(opts.T);
  tr.err_opt.reserve(n);
  tr.err_fp.reserve(n);
  tr.dev_fp.reserve(n);
  if (opts.record_omega) tr.omega.reserve(n);

  std::optional<NoiseStream> noise;
  if (opts.noise) noise.emplace(*opts.noise);

  Vector y(r.agents), u(r.agents), omega(r.agents), drive(r.agents);
  Vector next(xi.size());
  for (long t = 0; t < opts.T; ++t) {
    omega.noalias() = r.Cw * xi;
    tr.err_opt.push_back((omega - w_ref).norm());
    tr.err_fp.push_back((xi - fp.xi_star).norm());
    tr.dev_fp.push_back((omega - fp.omega_star).norm());
    if (opts.record_omega) tr.omega.push_back(omega);
    if (opts.record_states && t % tr.thin == 0) tr.xi.push_back(xi);

    y.noalias() = r.Cy * xi;
    for (Index k = 0; k < r.agents; ++k) u(k) = fam.grad(k, y(k));
    if (opts.record_signals) {
      tr.y.push_back(y);
      tr.u.push_back(u);
    }
    drive = u;
    if (noise) drive += noise->next();
    next.noalias() = r.A * xi;
    next.noalias() += r.B * drive;
    xi.swap(next);
    const double nrm = xi.norm();
    if (!std::isfinite(nrm) || nrm > opts.divergence_bound) {
      throw Error(ErrorCode::Divergence,
                  tr.meta.algorithm + " diverged at step " + std::to_string(t + 1));
    }
  }
  return tr;
}

struct RateFitOptions {
  double window = 0.6;       // central fraction of the linear phase
  double floor = 1e-12;      // errors at or below are treated as converged
  double max_rms = 1.0;      // log-residual threshold for NotLinearPhase
  long min_points = 10;
};

/// exp of the least-squares slope of log ||xi^t - xi*|| over the central
/// window of the pre-floor phase.
inline double empirical_rate(const Trajectory& tr,
                             const RateFitOptions& opts = {}) {
  const auto& e = tr.err_fp;
  long last = -1;
  // The linear phase ends where the error meets its floor: round-off, or
  // the accuracy to which xi* itself is known.
  double e_min = std::numeric_limits<double>::infinity();
  for (double v : e) e_min = std::min(e_min, v);
  const double floor =
      e.empty() ? opts.floor
                : std::max({opts.floor, 1e-11 * e.front(), 100.0 * e_min});
  for (long t = 0; t < static_cast<long>(e.size()) && e[t] > floor; ++t) {
    last = t;
  }
  if (last + 1 < opts.min_points) {
    throw Error(ErrorCode::NotLinearPhase,
                "too few points above the error floor");
  }
  const long len = last + 1;
  const long width = std::max<long>(opts.min_points,
                                    static_cast<long>(opts.window * len));
  const long start = std::max<long>(0, (len - width) / 2);
  const long stop = std::min(len, start + width);
  double st = 0, sy = 0, stt = 0, sty = 0;
  long cnt = 0;
  for (long t = start; t < stop; ++t) {
    if (!(e[t] > 0.0)) continue;
    const double ly = std::log(e[t]);
    st += t;
    sy += ly;
    stt += double(t) * t;
    sty += t * ly;
    ++cnt;
  }
  if (cnt < opts.min_points) {
    throw Error(ErrorCode::NotLinearPhase, "window holds too few samples");
  }
  const double denom = cnt * stt - st * st;
  const double slope = (cnt * sty - st * sy) / denom;
  const double icpt = (sy - slope * st) / cnt;
  double ss = 0;
  for (long t = start; t < stop; ++t) {
    if (!(e[t] > 0.0)) continue;
    const double r = std::log(e[t]) - (icpt + slope * t);
    ss += r * r;
  }
  const double rms = std::sqrt(ss / cnt);
  if (rms > opts.max_rms) {
    throw Error(ErrorCode::NotLinearPhase,
                "log-linear fit residual " + std::to_string(rms));
  }
  return std::exp(slope);
}

/// sqrt of the mean of ||omega^t - omega*||^2 over runs and t > burn_in.
inline double empirical_sensitivity(const std::vector<Trajectory>& runs,
                                    long burn_in) {
  if (runs.size() < 10) {
    throw Error(ErrorCode::InsufficientSamples,
                "need at least 10 runs, got " + std::to_string(runs.size()));
  }
  double acc = 0.0;
  long count = 0;
  for (const auto& tr : runs) {
    const long n = static_cast<long>(tr.dev_fp.size());
    if (n - burn_in - 1 < 1000) {
      throw Error(ErrorCode::InsufficientSamples,
                  "need at least 1000 post-burn-in steps per run");
    }
    for (long t = burn_in + 1; t < n; ++t) {
      acc += tr.dev_fp[t] * tr.dev_fp[t];
      ++count;
    }
  }
  return std::sqrt(acc / static_cast<double>(count));
}

/// Runs fn(i) for i in [0, count) on up to `threads` workers. Each index
/// writes only its own output slot, so results do not depend on scheduling.
template <typename Fn>
void parallel_for(std::size_t count, Fn&& fn, unsigned threads = 0) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, count));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  for (unsigned w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = next++; i < count; i = next++) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

/// Noisy replicas with seeds base_seed + i; scalar series only.
inline std::vector<Trajectory> monte_carlo(const Realization& r,
                                           const ObjectiveFamily& fam,
                                           const FixedPoint& fp,
                                           const NoiseModel& noise, long T,
                                           int n_runs,
                                           std::uint64_t base_seed) {
  std::vector<Trajectory> out(static_cast<std::size_t>(n_runs));
  parallel_for(out.size(), [&](std::size_t i) {
    RunOptions o;
    o.T = T;
    o.noise = noise.with_seed(base_seed + i);
    o.record_omega = false;
    out[i] = run(r, fam, fp, o);
  });
  return out;
}

/// Mean steady-state offset of omega^t from a reference across runs: each run
/// contributes its time-averaged error vector; `norm` is the length of their
/// mean and `std_error` the length of the per-component standard errors.
struct OffsetStats {
  Vector mean;
  double norm = 0.0;
  double std_error = 0.0;
  int runs = 0;
};

inline OffsetStats steady_state_offset(const std::vector<Trajectory>& runs,
                                       const Vector& reference, long burn_in) {
  if (runs.size() < 2) {
    throw Error(ErrorCode::InsufficientSamples, "need at least 2 runs");
  }
  const Index n = reference.size();
  Matrix per_run(n, static_cast<Index>(runs.size()));
  for (std::size_t s = 0; s < runs.size(); ++s) {
    const auto& om = runs[s].omega;
    if (static_cast<long>(om.size()) <= burn_in + 1) {
      throw Error(ErrorCode::InsufficientSamples,
                  "offset needs recorded iterates beyond the burn-in");
    }
    Vector acc = Vector::Zero(n);
    for (std::size_t t = static_cast<std::size_t>(burn_in + 1); t < om.size(); ++t) {
      acc += om[t] - reference;
    }
    per_run.col(static_cast<Index>(s)) =
        acc / static_cast<double>(om.size() - static_cast<std::size_t>(burn_in + 1));
  }
  OffsetStats out;
  out.runs = static_cast<int>(runs.size());
  out.mean = per_run.rowwise().mean();
  const Matrix centered = per_run.colwise() - out.mean;
  const double k = static_cast<double>(runs.size());
  const Vector var = centered.rowwise().squaredNorm() / (k - 1.0);
  out.norm = out.mean.norm();
  out.std_error = std::sqrt(var.sum() / k);
  return out;
}

}  // namespace subiqc

#endif  // SUBIQC_SIMULATE_HPP
