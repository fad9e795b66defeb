#ifndef SUBIQC_SCENARIO_HPP
#define SUBIQC_SCENARIO_HPP

// JSON experiment descriptions (schema_version 1). Parsing rejects malformed
// documents with ErrorCode::Parse; validate() then cross-checks the content and
// lists every problem before anything runs.

#include <subiqc/algorithms.hpp>
#include <subiqc/analysis.hpp>
#include <subiqc/core.hpp>
#include <subiqc/io.hpp>
#include <subiqc/objectives.hpp>
#include <subiqc/simulate.hpp>
#include <subiqc/subspace_gossip.hpp>

#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

namespace subiqc {

inline constexpr int kSchemaVersion = 1;

struct GossipSpec {
  std::string label;
  std::string type;  // synthesized | matrix | laplacian
  double sigma = 0.0;
  std::uint64_t seed = 1;
  std::optional<Matrix> matrix;
  std::optional<std::vector<Edge>> edges;
  double eta = 0.0;
};

struct AlgorithmSpec {
  std::string name;
  std::optional<double> beta, gamma, delta;  // SVL
  std::optional<double> L, m;                // global sector override
};

struct Scenario {
  int schema_version = kSchemaVersion;
  std::string name;
  Matrix basis;
  std::vector<GossipSpec> gossips;
  std::string objective_type = "quad_cos";
  Vector a, b;
  std::vector<AlgorithmSpec> algorithms;
  double mu = 0.0;
  Matrix R;
  std::optional<Matrix> actual_cov;
  long T = 2000;
  std::vector<std::uint64_t> seeds = {1};
  std::optional<Vector> omega0;
  long burn_in = -1;  // default (T - 1) / 2
  std::vector<double> mu_grid;
  IqcConfig iqc;
  BisectionOptions bisection;
  std::string output_dir = "out";
};

namespace detail {

inline double number(const nlohmann::json& j, const char* key,
                     const std::string& where) {
  if (!j.contains(key)) {
    throw Error(ErrorCode::Parse, where + ": missing '" + key + "'");
  }
  if (!j.at(key).is_number()) {
    throw Error(ErrorCode::Parse, where + ": '" + key + "' must be a number");
  }
  return j.at(key).get<double>();
}

inline std::optional<double> opt_number(const nlohmann::json& j, const char* key,
                                        const std::string& where) {
  if (!j.contains(key)) return std::nullopt;
  return number(j, key, where);
}

inline std::vector<Edge> edges_from_json(const nlohmann::json& j) {
  std::vector<Edge> out;
  if (!j.is_array()) throw Error(ErrorCode::Parse, "edges must be an array");
  for (const auto& e : j) {
    if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() ||
        !e[1].is_number_integer()) {
      throw Error(ErrorCode::Parse, "each edge must be [i, j]");
    }
    out.emplace_back(e[0].get<int>(), e[1].get<int>());
  }
  return out;
}

inline void parse_iqcs(const nlohmann::json& j, IqcConfig& cfg) {
  if (!j.is_array() || j.empty()) {
    throw Error(ErrorCode::Parse, "'iqcs' must be a nonempty array");
  }
  cfg.sector = false;
  cfg.off_by_one = false;
  for (const auto& item : j) {
    if (item.is_string() && item.get<std::string>() == "sector") {
      cfg.sector = true;
    } else if (item.is_string() && item.get<std::string>() == "off_by_one") {
      cfg.off_by_one = true;
    } else if (item.is_object() && item.contains("off_by_one")) {
      cfg.off_by_one = true;
      const auto& o = item.at("off_by_one");
      if (o.contains("rho_bar")) {
        const auto& rb = o.at("rho_bar");
        if (rb.is_string() && rb.get<std::string>() == "rho") {
          cfg.rho_bar = RhoBarPolicy::Rho;
        } else if (rb.is_string() && rb.get<std::string>() == "zero") {
          cfg.rho_bar = RhoBarPolicy::Zero;
        } else if (rb.is_number()) {
          cfg.rho_bar = RhoBarPolicy::Custom;
          cfg.custom_rho_bar = rb.get<double>();
        } else {
          throw Error(ErrorCode::Parse,
                      "rho_bar must be \"rho\", \"zero\" or a number");
        }
      }
    } else {
      throw Error(ErrorCode::Parse, "unknown IQC entry " + item.dump());
    }
  }
}

}  // namespace detail

inline Scenario parse_scenario(const nlohmann::json& j) {
  using detail::number;
  if (!j.is_object()) throw Error(ErrorCode::Parse, "scenario must be an object");
  Scenario s;
  try {
    s.schema_version = j.value("schema_version", 0);
    s.name = j.value("name", std::string("scenario"));

    const auto& sub = j.at("subspace");
    const std::string st = sub.value("type", std::string("basis"));
    if (st == "basis") {
      s.basis = io::matrix_from_json(sub.at("basis_rows"), "subspace.basis_rows")
                    .transpose();
    } else if (st == "consensus") {
      s.basis = Matrix::Ones(sub.at("n").get<int>(), 1);
    } else if (st == "full") {
      const int n = sub.at("n").get<int>();
      s.basis = Matrix::Identity(n, n);
    } else {
      throw Error(ErrorCode::Parse, "unknown subspace type '" + st + "'");
    }

    const auto& gl = j.at("gossips");
    if (!gl.is_array() || gl.empty()) {
      throw Error(ErrorCode::Parse, "'gossips' must be a nonempty array");
    }
    for (std::size_t i = 0; i < gl.size(); ++i) {
      const auto& g = gl[i];
      const std::string where = "gossips[" + std::to_string(i) + "]";
      GossipSpec gs;
      gs.type = g.at("type").get<std::string>();
      gs.label = g.value("label", "g" + std::to_string(i));
      if (gs.type == "synthesized") {
        gs.sigma = number(g, "sigma", where);
        gs.seed = g.value("seed", std::uint64_t{1});
      } else if (gs.type == "matrix") {
        gs.matrix = io::matrix_from_json(g.at("matrix"), where + ".matrix");
        if (g.contains("edges")) gs.edges = detail::edges_from_json(g.at("edges"));
      } else if (gs.type == "laplacian") {
        gs.edges = detail::edges_from_json(g.at("edges"));
        gs.eta = number(g, "eta", where);
      } else {
        throw Error(ErrorCode::Parse, where + ": unknown type '" + gs.type + "'");
      }
      s.gossips.push_back(std::move(gs));
    }

    const auto& obj = j.at("objective");
    s.objective_type = obj.at("type").get<std::string>();
    if (s.objective_type != "quad_cos" && s.objective_type != "quadratic") {
      throw Error(ErrorCode::Parse,
                  "objective.type must be quad_cos or quadratic");
    }
    s.a = io::vector_from_json(obj.at("a"), "objective.a");
    s.b = io::vector_from_json(obj.at("b"), "objective.b");

    const auto& al = j.at("algorithms");
    if (!al.is_array() || al.empty()) {
      throw Error(ErrorCode::Parse, "'algorithms' must be a nonempty array");
    }
    for (const auto& a : al) {
      AlgorithmSpec as;
      if (a.is_string()) {
        as.name = a.get<std::string>();
      } else if (a.is_object()) {
        as.name = a.at("name").get<std::string>();
        as.beta = detail::opt_number(a, "beta", as.name);
        as.gamma = detail::opt_number(a, "gamma", as.name);
        as.delta = detail::opt_number(a, "delta", as.name);
        as.L = detail::opt_number(a, "L", as.name);
        as.m = detail::opt_number(a, "m", as.name);
      } else {
        throw Error(ErrorCode::Parse, "algorithm entries are names or objects");
      }
      s.algorithms.push_back(std::move(as));
    }

    s.mu = number(j, "mu", "scenario");
    if (j.contains("noise")) {
      const auto& nz = j.at("noise");
      const Index n = s.basis.rows();
      if (nz.contains("R")) {
        s.R = io::matrix_from_json(nz.at("R"), "noise.R");
      } else {
        const double sw = number(nz, "sigma_w", "noise");
        s.R = sw * sw * Matrix::Identity(n, n);
      }
      if (nz.contains("actual_cov")) {
        s.actual_cov = io::matrix_from_json(nz.at("actual_cov"), "noise.actual_cov");
      }
    } else {
      s.R = Matrix::Zero(s.basis.rows(), s.basis.rows());
    }

    if (j.contains("simulate")) {
      const auto& sim = j.at("simulate");
      s.T = sim.value("T", s.T);
      s.burn_in = sim.value("burn_in", s.burn_in);
      if (sim.contains("seeds")) {
        s.seeds = sim.at("seeds").get<std::vector<std::uint64_t>>();
      } else if (sim.contains("n_seeds")) {
        const auto base = sim.value("base_seed", std::uint64_t{1});
        const int k = sim.at("n_seeds").get<int>();
        s.seeds.clear();
        for (int i = 0; i < k; ++i) s.seeds.push_back(base + std::uint64_t(i));
      }
      if (sim.contains("omega0")) {
        s.omega0 = io::vector_from_json(sim.at("omega0"), "simulate.omega0");
      }
    }

    if (j.contains("sweep")) {
      const auto& sw = j.at("sweep");
      if (sw.contains("mu_grid")) {
        s.mu_grid = sw.at("mu_grid").get<std::vector<double>>();
      } else {
        const double lo = number(sw, "mu_min", "sweep");
        const double hi = number(sw, "mu_max", "sweep");
        const int n = sw.value("points", 25);
        if (lo > 0.0 && hi >= lo && n >= 1) s.mu_grid = log_grid(lo, hi, n);
        else s.mu_grid = {lo, hi};  // rejected by validate()
      }
    }

    if (j.contains("iqcs")) detail::parse_iqcs(j.at("iqcs"), s.iqc);
    s.iqc.per_agent_multipliers = j.value("per_agent_multipliers", false);
    if (j.contains("bisection")) {
      const auto& bi = j.at("bisection");
      s.bisection.rho_lo = bi.value("rho_lo", s.bisection.rho_lo);
      s.bisection.rho_hi = bi.value("rho_hi", s.bisection.rho_hi);
      s.bisection.tol = bi.value("tol", s.bisection.tol);
    }
    s.output_dir = j.value("output_dir", s.output_dir);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Parse, e.what());
  }
  return s;
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::Io, "cannot open scenario " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Parse, path + ": " + e.what());
  }
  return parse_scenario(j);
}

struct Issue {
  ErrorCode code;
  std::string message;
};

inline Subspace scenario_subspace(const Scenario& s) { return Subspace(s.basis); }

inline GossipMatrix scenario_gossip(const Scenario& s, std::size_t i) {
  const GossipSpec& g = s.gossips.at(i);
  const Subspace sub = scenario_subspace(s);
  if (g.type == "synthesized") return synth_gossip(sub, g.sigma, g.seed);
  if (g.type == "laplacian") {
    if (sub.rank() != 1 || (sub.projection() - Subspace::consensus(sub.dim()).projection())
                                   .cwiseAbs().maxCoeff() > 1e-12) {
      throw Error(ErrorCode::InvalidArgument,
                  "laplacian gossip requires the consensus subspace");
    }
    return consensus_gossip(graph_laplacian(sub.dim(), *g.edges), g.eta);
  }
  return GossipMatrix(*g.matrix, sub, {}, g.edges);
}

inline ObjectiveFamily scenario_family(const Scenario& s) {
  return s.objective_type == "quad_cos" ? quad_cos_family(s.a, s.b)
                                        : quadratic_family(s.a, s.b);
}

inline AlgParams scenario_params(const Scenario& s, const AlgorithmSpec& a,
                                 double mu) {
  AlgParams p;
  p.mu = mu;
  const Algorithm alg = parse_algorithm(a.name);
  if (alg == Algorithm::SVL) {
    std::vector<std::string> missing;
    if (!a.beta) missing.push_back("beta");
    if (!a.gamma) missing.push_back("gamma");
    if (!a.delta) missing.push_back("delta");
    if (!missing.empty()) {
      std::string m;
      for (const auto& x : missing) m += (m.empty() ? "" : ", ") + x;
      throw Error(ErrorCode::MissingParam, "SVL needs " + m);
    }
    p.svl = SvlParams{*a.beta, *a.gamma, *a.delta};
  }
  const ObjectiveFamily fam = scenario_family(s);
  p.sector = GlobalSector{a.L.value_or(fam.sector().L()),
                          a.m.value_or(fam.sector().m())};
  return p;
}

/// Every load-time check; an empty result means the scenario can run.
inline std::vector<Issue> validate(const Scenario& s) {
  std::vector<Issue> issues;
  auto guard = [&](const std::string& ctx, auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      issues.push_back({e.code(), ctx + ": " + e.what()});
    }
  };
  if (s.schema_version != kSchemaVersion) {
    issues.push_back({ErrorCode::InvalidArgument,
                      "schema_version must be " + std::to_string(kSchemaVersion)});
  }
  bool sub_ok = false;
  guard("subspace", [&] {
    scenario_subspace(s);
    sub_ok = true;
  });
  const Index n = s.basis.rows();
  if (sub_ok) {
    for (std::size_t i = 0; i < s.gossips.size(); ++i) {
      const GossipSpec& g = s.gossips[i];
      const std::string ctx = "gossip '" + g.label + "'";
      if (g.matrix && (g.matrix->rows() != n || g.matrix->cols() != n)) {
        issues.push_back({ErrorCode::DimensionMismatch,
                          ctx + ": matrix must be " + std::to_string(n) + "x" +
                              std::to_string(n)});
        continue;
      }
      if (g.type == "matrix") {
        guard(ctx, [&] {
          const GossipReport rep =
              validate_gossip(*g.matrix, scenario_subspace(s), {}, g.edges);
          for (const auto& f : rep.failures)
            issues.push_back({ErrorCode::NotValidGossip, ctx + ": " + f});
        });
        continue;
      }
      guard(ctx, [&] { scenario_gossip(s, i); });
    }
  }
  if (s.a.size() != n || s.b.size() != n) {
    issues.push_back({ErrorCode::DimensionMismatch,
                      "objective: a and b need " + std::to_string(n) + " entries"});
  } else {
    guard("objective", [&] { scenario_family(s); });
  }
  const bool fam_ok = s.a.size() == n && s.b.size() == n && [&] {
    try {
      scenario_family(s);
      return true;
    } catch (const Error&) {
      return false;
    }
  }();
  for (const auto& a : s.algorithms) {
    guard("algorithm '" + a.name + "'", [&] {
      const Algorithm alg = parse_algorithm(a.name);
      if (!fam_ok) return;
      const AlgParams p = scenario_params(s, a, s.mu > 0.0 ? s.mu : 1.0);
      if (alg == Algorithm::SVL && p.svl->gamma == 0.0) {
        throw Error(ErrorCode::InvalidArgument, "SVL gamma must be nonzero");
      }
    });
  }
  if (!(s.mu > 0.0)) {
    issues.push_back({ErrorCode::InvalidArgument, "mu must be positive"});
  }
  if (s.T < 1) issues.push_back({ErrorCode::InvalidArgument, "simulate.T must be >= 1"});
  if (s.seeds.empty()) {
    issues.push_back({ErrorCode::InvalidArgument, "at least one seed is required"});
  }
  if (s.omega0 && s.omega0->size() != n) {
    issues.push_back({ErrorCode::DimensionMismatch, "simulate.omega0 size"});
  }
  if (s.R.rows() != n || s.R.cols() != n) {
    issues.push_back({ErrorCode::DimensionMismatch, "noise.R must be N x N"});
  } else {
    guard("noise", [&] {
      NoiseModel(s.R, s.actual_cov.value_or(s.R), 0);
    });
  }
  for (double m : s.mu_grid) {
    if (!(m > 0.0)) {
      issues.push_back({ErrorCode::InvalidArgument, "sweep step sizes must be positive"});
      break;
    }
  }
  if (s.iqc.rho_bar == RhoBarPolicy::Custom &&
      !(s.iqc.custom_rho_bar >= 0.0 && s.iqc.custom_rho_bar <= 1.0)) {
    issues.push_back({ErrorCode::InvalidRhoBar, "rho_bar must lie in [0, 1]"});
  }
  if (!(s.bisection.rho_lo >= 0.0 && s.bisection.rho_lo < s.bisection.rho_hi &&
        s.bisection.rho_hi <= 1.0 && s.bisection.tol > 0.0)) {
    issues.push_back({ErrorCode::InvalidArgument,
                      "bisection needs 0 <= rho_lo < rho_hi <= 1 and tol > 0"});
  }
  return issues;
}

}  // namespace subiqc

#endif  // SUBIQC_SCENARIO_HPP
