#ifndef SUBIQC_CLI_HPP
#define SUBIQC_CLI_HPP

// The four command-line commands as library functions, so tests can drive
// them without spawning processes. Argument parsing lives in tools/.

#include <subiqc/analysis.hpp>
#include <subiqc/io.hpp>
#include <subiqc/scenario.hpp>
#include <subiqc/simulate.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace subiqc::cli {

enum ExitCode : int { Ok = 0, Failed = 1, IoOrParse = 2, Numerical = 3 };

struct CommandOptions {
  std::string scenario;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  bool noiseless = false;
  std::vector<std::string> algorithms;  // empty: all in the scenario
  std::optional<long> T;
  bool bias = false;
  Backend solver = Backend::Internal;
  std::optional<std::string> external_command;
  unsigned threads = 0;  // 0: hardware concurrency
};

inline int exit_code_for(ErrorCode c) {
  switch (c) {
    case ErrorCode::Parse:
    case ErrorCode::Io:
      return IoOrParse;
    case ErrorCode::SolverFailure:
    case ErrorCode::NoConvergence:
    case ErrorCode::Divergence:
    case ErrorCode::NotLinearPhase:
      return Numerical;
    default:
      return Failed;
  }
}

namespace detail {

inline std::string file_safe(const std::string& s) {
  std::string o;
  for (char c : s) {
    const bool keep = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                      (c >= '0' && c <= '9') || c == '-' || c == '_' || c == '.';
    o += keep ? c : '_';
  }
  return o;
}

inline std::string fixed(double v, int digits) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

/// A validated scenario plus everything derived from it once.
struct Prepared {
  Scenario s;
  Subspace sub{Matrix::Ones(1, 1)};
  ObjectiveFamily fam = quadratic_family(Vector::Ones(1), Vector::Zero(1));
  Vector omega_opt;
  std::vector<GossipMatrix> gossips;
  std::vector<AlgorithmSpec> algorithms;
  std::filesystem::path out;
};

// Returns an exit code if the scenario cannot be used.
inline std::optional<int> prepare(const CommandOptions& o, Prepared& p,
                                  std::ostream& log) {
  p.s = load_scenario(o.scenario);
  if (o.T) p.s.T = *o.T;
  if (o.seed) p.s.seeds = {*o.seed};
  if (!o.algorithms.empty()) {
    std::vector<AlgorithmSpec> chosen;
    for (const auto& want : o.algorithms) {
      const Algorithm a = parse_algorithm(want);
      auto it = std::find_if(p.s.algorithms.begin(), p.s.algorithms.end(),
                             [&](const AlgorithmSpec& x) {
                               return parse_algorithm(x.name) == a;
                             });
      AlgorithmSpec spec;
      spec.name = std::string(name(a));
      if (it != p.s.algorithms.end()) spec = *it;
      chosen.push_back(spec);
    }
    p.s.algorithms = std::move(chosen);
  }
  const auto issues = validate(p.s);
  if (!issues.empty()) {
    for (const auto& i : issues) log << "FAIL " << i.message << "\n";
    return Failed;
  }
  p.sub = scenario_subspace(p.s);
  p.fam = scenario_family(p.s);
  p.omega_opt = solve_opt(p.fam, p.sub).omega_opt;
  for (std::size_t i = 0; i < p.s.gossips.size(); ++i) {
    p.gossips.push_back(scenario_gossip(p.s, i));
  }
  p.algorithms = p.s.algorithms;
  p.out = o.out ? std::filesystem::path(*o.out) : std::filesystem::path(p.s.output_dir);
  std::error_code ec;
  std::filesystem::create_directories(p.out, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create " + p.out.string());
  return std::nullopt;
}

inline SolverOptions solver_options(const CommandOptions& o) {
  SolverOptions so;
  so.backend = o.solver;
  if (o.external_command) so.external_command = *o.external_command;
  return so;
}

inline std::string tag(const std::string& alg, const std::string& gossip) {
  return file_safe(alg) + "_" + file_safe(gossip);
}

// Plot at most ~n points per series; the SVG is a view, not the data.
inline io::Series thinned(const std::string& label, const std::vector<double>& x,
                          const std::vector<double>& y, std::size_t n = 2000) {
  io::Series s;
  s.label = label;
  const std::size_t stride = std::max<std::size_t>(1, x.size() / n);
  for (std::size_t i = 0; i < x.size(); i += stride) {
    s.x.push_back(x[i]);
    s.y.push_back(y[i]);
  }
  return s;
}

}  // namespace detail

using io::Series;

inline int cmd_validate(const CommandOptions& o, std::ostream& log) {
  Scenario s = load_scenario(o.scenario);
  const auto issues = validate(s);
  if (!issues.empty()) {
    log << "scenario " << o.scenario << ": " << issues.size() << " problem(s)\n";
    for (const auto& i : issues) log << "FAIL " << i.message << "\n";
    return Failed;
  }
  const Subspace sub = scenario_subspace(s);
  log << "scenario '" << s.name << "': N = " << sub.dim()
      << ", subspace rank = " << sub.rank() << "\n";
  for (std::size_t i = 0; i < s.gossips.size(); ++i) {
    log << "  gossip '" << s.gossips[i].label << "': sigma = "
        << scenario_gossip(s, i).spectral_gap() << "\n";
  }
  for (const auto& a : s.algorithms) log << "  algorithm " << a.name << "\n";
  log << "OK\n";
  return Ok;
}

inline int cmd_simulate(const CommandOptions& o, std::ostream& log) {
  detail::Prepared p;
  if (auto rc = detail::prepare(o, p, log)) return *rc;
  const Scenario& s = p.s;
  const long burn = s.burn_in >= 0 ? s.burn_in : (s.T - 1) / 2;  // leaves T/2 samples after it
  const std::vector<std::uint64_t> seeds =
      o.noiseless ? std::vector<std::uint64_t>{0} : s.seeds;

  io::Table summary;
  summary.header = {"algorithm", "gossip",    "mu",        "sigma",
                    "n_runs",    "rho_emp",   "gamma_emp", "offset",
                    "offset_se", "fp_bias",   "steady_err", "status"};
  const double nan = std::nan("");

  for (std::size_t g = 0; g < p.gossips.size(); ++g) {
    const std::string glabel = s.gossips[g].label;
    std::vector<Series> curves;
    for (const auto& spec : p.algorithms) {
      const AlgParams prm = scenario_params(s, spec, s.mu);
      const Algorithm alg = parse_algorithm(spec.name);
      const std::string an(name(alg));
      std::vector<std::string> row = {an, glabel, io::fmt(s.mu),
                                      io::fmt(p.gossips[g].spectral_gap())};
      const Realization r = build(alg, p.gossips[g], p.sub, prm);
      FixedPoint fp;
      try {
        FixedPointOptions fo;
        fo.omega0 = s.omega0;
        fp = fixed_point(r, p.fam, fo);
      } catch (const Error& e) {
        log << an << " on " << glabel << ": " << e.what() << "\n";
        for (int k = 0; k < 7; ++k) row.push_back(io::fmt(nan));
        row.push_back(e.code() == ErrorCode::Divergence ? "diverged" : "no_fixed_point");
        summary.rows.push_back(row);
        continue;
      }

      std::vector<Trajectory> runs(seeds.size());
      std::vector<std::string> failure(seeds.size());
      parallel_for(
          seeds.size(),
          [&](std::size_t i) {
            RunOptions ro;
            ro.T = s.T;
            ro.omega0 = s.omega0;
            ro.omega_opt = p.omega_opt;
            if (!o.noiseless) {
              ro.noise = NoiseModel(s.R, s.actual_cov.value_or(s.R), seeds[i]);
            }
            try {
              runs[i] = run(r, p.fam, fp, ro);
            } catch (const Error& e) {
              failure[i] = e.what();
            }
          },
          o.threads);

      std::string status = "ok";
      std::vector<Trajectory> good;
      for (std::size_t i = 0; i < seeds.size(); ++i) {
        if (!failure[i].empty()) {
          status = "diverged";
          log << an << " on " << glabel << ": " << failure[i] << "\n";
          continue;
        }
        const std::string file =
            "traj_" + detail::tag(an, glabel) +
            (o.noiseless ? std::string("_noiseless")
                         : "_seed" + std::to_string(seeds[i])) +
            ".csv";
        io::write_csv((p.out / file).string(), io::trajectory_table(runs[i]));
        if (good.empty()) {
          const io::Table back = io::read_csv((p.out / file).string());
          curves.push_back(detail::thinned(an, back.numbers("t"),
                                           back.numbers("err_opt")));
        }
        good.push_back(std::move(runs[i]));
      }

      double rho_emp = nan, gamma_emp = nan, steady = nan;
      OffsetStats off;
      off.norm = off.std_error = nan;
      if (!good.empty()) {
        try {
          if (o.noiseless) {
            rho_emp = empirical_rate(good.front());
          } else {
            RunOptions ro;
            ro.T = s.T;
            ro.omega0 = s.omega0;
            ro.record_omega = false;
            rho_emp = empirical_rate(run(r, p.fam, fp, ro));
          }
        } catch (const Error&) {
        }
        try {
          if (!o.noiseless) gamma_emp = empirical_sensitivity(good, burn);
        } catch (const Error&) {
        }
        try {
          if (!o.noiseless) off = steady_state_offset(good, p.omega_opt, burn);
        } catch (const Error&) {
        }
        double acc = 0.0;
        long cnt = 0;
        for (const auto& tr : good) {
          for (std::size_t t = std::size_t(std::max<long>(burn + 1, 0));
               t < tr.err_opt.size(); ++t) {
            acc += tr.err_opt[t];
            ++cnt;
          }
        }
        if (cnt) steady = acc / double(cnt);
      }
      row.push_back(std::to_string(good.size()));
      for (double v : {rho_emp, gamma_emp, off.norm, off.std_error,
                       (fp.omega_star - p.omega_opt).norm(), steady}) {
        row.push_back(io::fmt(v));
      }
      row.push_back(status);
      summary.rows.push_back(row);
    }
    io::ChartSpec chart;
    chart.title = "Distance to the constrained optimum (" + glabel + ")";
    chart.x_label = "iteration t";
    chart.y_label = "||omega^t - omega_opt||";
    chart.log_y = true;
    io::write_text((p.out / ("convergence_" + detail::file_safe(glabel) + ".svg")).string(),
                   io::render_svg(chart, curves));
  }
  io::write_csv((p.out / "simulate_summary.csv").string(), summary);
  log << "simulate: wrote " << summary.rows.size() << " summary rows to "
      << p.out.string() << "\n";
  return Ok;
}

inline int cmd_sweep(const CommandOptions& o, std::ostream& log) {
  detail::Prepared p;
  if (auto rc = detail::prepare(o, p, log)) return *rc;
  const Scenario& s = p.s;
  const std::vector<double> grid =
      s.mu_grid.empty() ? std::vector<double>{s.mu} : s.mu_grid;

  io::Table summary;
  summary.header = {"algorithm", "gossip",   "sigma",  "points", "feasible_points",
                    "min_rho",   "mu_at_min_rho", "knee_mu"};
  std::vector<Series> curves;
  for (std::size_t g = 0; g < p.gossips.size(); ++g) {
    const std::string glabel = s.gossips[g].label;
    for (const auto& spec : p.algorithms) {
      SweepContext ctx{parse_algorithm(spec.name),
                       p.gossips[g],
                       p.sub,
                       scenario_params(s, spec, s.mu),
                       p.fam.sector(),
                       s.R,
                       s.iqc,
                       s.bisection,
                       detail::solver_options(o),
                       p.fam,
                       p.omega_opt};
      const SweepResult res = tradeoff_sweep(ctx, grid, o.bias, o.threads);
      for (const auto& row : res.rows) {
        if (!row.note.empty()) {
          log << res.algorithm << " mu=" << row.mu << ": " << row.note << "\n";
        }
      }
      const std::string file = "sweep_" + detail::tag(res.algorithm, glabel) + ".csv";
      io::write_csv((p.out / file).string(), io::sweep_table(res, o.bias));

      const io::Table back = io::read_csv((p.out / file).string());
      const auto rho = back.numbers("rho_certified");
      const auto gam = back.numbers("gamma_certified");
      const auto feas = back.numbers("feasible");
      Series curve;
      curve.label = res.algorithm + " sigma=" + detail::fixed(res.sigma, 2);
      for (std::size_t i = 0; i < rho.size(); ++i) {
        if (feas[i] == 1.0) {
          curve.x.push_back(rho[i]);
          curve.y.push_back(gam[i]);
        }
      }
      curves.push_back(std::move(curve));

      double min_rho = std::nan(""), mu_min = std::nan("");
      int feasible = 0;
      for (const auto& row : res.rows) {
        if (!row.rate_feasible) continue;
        feasible += row.feasible();
        if (std::isnan(min_rho) || row.rho < min_rho) {
          min_rho = row.rho;
          mu_min = row.mu;
        }
      }
      summary.rows.push_back(
          {res.algorithm, glabel, io::fmt(res.sigma), std::to_string(res.rows.size()),
           std::to_string(feasible), io::fmt(min_rho), io::fmt(mu_min),
           io::fmt(res.knee ? res.rows[*res.knee].mu : std::nan(""))});
    }
  }
  io::write_csv((p.out / "sweep_summary.csv").string(), summary);
  io::ChartSpec chart;
  chart.title = "Sensitivity versus certified rate over the step-size grid";
  chart.x_label = "certified rate rho";
  chart.y_label = "sensitivity bound gamma";
  chart.markers = true;
  io::write_text((p.out / "tradeoff.svg").string(), io::render_svg(chart, curves));
  log << "sweep: " << summary.rows.size() << " curve(s) written to "
      << p.out.string() << "\n";
  return Ok;
}

inline int cmd_certify(const CommandOptions& o, std::ostream& log) {
  detail::Prepared p;
  if (auto rc = detail::prepare(o, p, log)) return *rc;
  const Scenario& s = p.s;
  const SolverOptions so = detail::solver_options(o);
  io::Table table;
  table.header = {"algorithm",       "gossip",          "mu",    "sigma",
                  "rho_certified",   "gamma_certified", "rate_verified",
                  "sensitivity_verified", "status"};
  int rc = Ok;
  for (std::size_t g = 0; g < p.gossips.size(); ++g) {
    const std::string glabel = s.gossips[g].label;
    for (const auto& spec : p.algorithms) {
      const Algorithm alg = parse_algorithm(spec.name);
      const std::string an(name(alg));
      const Realization r =
          build(alg, p.gossips[g], p.sub, scenario_params(s, spec, s.mu));
      const std::string base = "cert_" + detail::tag(an, glabel);
      double rho = std::nan(""), gamma = std::nan("");
      std::string rate_ok = "0", sens_ok = "0", status = "ok";
      auto meta = [&](nlohmann::json& j) {
        j["algorithm"] = an;
        j["gossip"] = glabel;
        j["mu"] = s.mu;
        j["sigma"] = p.gossips[g].spectral_gap();
      };
      try {
        const RateResult rr = certify_rate(r, p.fam.sector(), s.iqc, s.bisection, so);
        rho = rr.rho;
        rate_ok = rr.cert.verify.pass ? "1" : "0";
        nlohmann::json j = io::certificate_json(rr.cert);
        meta(j);
        io::write_text((p.out / (base + "_rate.json")).string(), j.dump(2) + "\n");
      } catch (const Error& e) {
        status = "rate: " + std::string(to_string(e.code()));
        log << an << " on " << glabel << ": " << e.what() << "\n";
        rc = std::max(rc, exit_code_for(e.code()));
      }
      try {
        const SensitivityResult sr =
            certify_sensitivity(r, p.fam.sector(), s.iqc, s.R, so);
        gamma = sr.gamma;
        sens_ok = sr.cert.verify.pass ? "1" : "0";
        nlohmann::json j = io::certificate_json(sr.cert);
        meta(j);
        io::write_text((p.out / (base + "_sensitivity.json")).string(),
                       j.dump(2) + "\n");
      } catch (const Error& e) {
        status = (status == "ok" ? std::string() : status + "; ") +
                 "sensitivity: " + to_string(e.code());
        log << an << " on " << glabel << ": " << e.what() << "\n";
        rc = std::max(rc, exit_code_for(e.code()));
      }
      log << an << " on " << glabel << ": rho* = " << rho << ", gamma <= " << gamma
          << "\n";
      table.rows.push_back({an, glabel, io::fmt(s.mu),
                            io::fmt(p.gossips[g].spectral_gap()), io::fmt(rho),
                            io::fmt(gamma), rate_ok, sens_ok, status});
    }
  }
  io::write_csv((p.out / "certify.csv").string(), table);
  return rc;
}

/// Dispatch with the exit-code contract: 0 ok, 1 validation or infeasibility,
/// 2 I/O or parse, 3 numerical failure.
inline int run_command(const std::string& command, const CommandOptions& o,
                       std::ostream& log) {
  try {
    if (command == "validate") return cmd_validate(o, log);
    if (command == "simulate") return cmd_simulate(o, log);
    if (command == "sweep") return cmd_sweep(o, log);
    if (command == "certify") return cmd_certify(o, log);
    log << "unknown command '" << command << "'\n";
    return Failed;
  } catch (const Error& e) {
    log << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return Numerical;
  }
}

}  // namespace subiqc::cli

#endif  // SUBIQC_CLI_HPP
