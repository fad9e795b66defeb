#ifndef SUBIQC_IO_HPP
#define SUBIQC_IO_HPP

#include <subiqc/analysis.hpp>
#include <subiqc/core.hpp>
#include <subiqc/simulate.hpp>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace subiqc::io {

// Shortest round-trippable decimal; NaN is written as "nan".
inline std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// A CSV table: header plus rows of raw string cells.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  Index column(const std::string& name) const {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      throw Error(ErrorCode::Parse, "missing CSV column '" + name + "'");
    }
    return it - header.begin();
  }

  std::vector<double> numbers(const std::string& name) const {
    const Index c = column(name);
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(std::stod(r[std::size_t(c)]));
    return out;
  }
};

inline void write_csv(const std::string& path, const Table& t) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::Io, "cannot write " + path);
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) f << ',';
      f << cells[i];
    }
    f << '\n';
  };
  line(t.header);
  for (const auto& r : t.rows) line(r);
  if (!f) throw Error(ErrorCode::Io, "write failed for " + path);
}

inline Table read_csv(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::Io, "cannot read " + path);
  Table t;
  std::string line;
  bool first = true;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    if (first) {
      t.header = std::move(cells);
      first = false;
    } else {
      if (cells.size() != t.header.size()) {
        throw Error(ErrorCode::Parse, path + ": row width " +
                                          std::to_string(cells.size()) +
                                          " != header width " +
                                          std::to_string(t.header.size()));
      }
      t.rows.push_back(std::move(cells));
    }
  }
  if (first) throw Error(ErrorCode::Parse, path + ": empty CSV");
  return t;
}

/// t,err_opt,err_fp[,omega_1..omega_N]
inline Table trajectory_table(const Trajectory& tr) {
  Table t;
  t.header = {"t", "err_opt", "err_fp"};
  const bool with_omega = tr.omega.size() == tr.err_opt.size() && !tr.omega.empty();
  const Index n = with_omega ? tr.omega.front().size() : 0;
  for (Index k = 0; k < n; ++k) t.header.push_back("omega_" + std::to_string(k + 1));
  for (std::size_t i = 0; i < tr.err_opt.size(); ++i) {
    std::vector<std::string> r = {std::to_string(i), fmt(tr.err_opt[i]),
                                  fmt(tr.err_fp[i])};
    for (Index k = 0; k < n; ++k) r.push_back(fmt(tr.omega[i](k)));
    t.rows.push_back(std::move(r));
  }
  return t;
}

/// algorithm,mu,rho_certified,gamma_certified,feasible[,bias]
inline Table sweep_table(const SweepResult& s, bool with_bias) {
  Table t;
  t.header = {"algorithm", "mu", "rho_certified", "gamma_certified", "feasible"};
  if (with_bias) t.header.push_back("bias");
  for (const auto& r : s.rows) {
    std::vector<std::string> cells = {s.algorithm, fmt(r.mu), fmt(r.rho),
                                      fmt(r.gamma), r.feasible() ? "1" : "0"};
    if (with_bias) {
      cells.push_back(r.bias ? fmt(*r.bias) : fmt(std::nan("")));
    }
    t.rows.push_back(std::move(cells));
  }
  return t;
}

inline nlohmann::json to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline nlohmann::json to_json(const Vector& v) {
  nlohmann::json a = nlohmann::json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

inline Matrix matrix_from_json(const nlohmann::json& j, const std::string& what) {
  if (!j.is_array() || j.empty() || !j.front().is_array()) {
    throw Error(ErrorCode::Parse, what + " must be a nonempty array of rows");
  }
  const Index rows = Index(j.size());
  const Index cols = Index(j.front().size());
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    if (!j[std::size_t(i)].is_array() || Index(j[std::size_t(i)].size()) != cols) {
      throw Error(ErrorCode::Parse, what + ": ragged rows");
    }
    for (Index c = 0; c < cols; ++c) {
      const auto& v = j[std::size_t(i)][std::size_t(c)];
      if (!v.is_number()) throw Error(ErrorCode::Parse, what + ": non-numeric entry");
      m(i, c) = v.get<double>();
    }
  }
  return m;
}

inline Vector vector_from_json(const nlohmann::json& j, const std::string& what) {
  if (!j.is_array() || j.empty()) {
    throw Error(ErrorCode::Parse, what + " must be a nonempty array");
  }
  Vector v(Index(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw Error(ErrorCode::Parse, what + ": non-numeric entry");
    v(Index(i)) = j[i].get<double>();
  }
  return v;
}

inline nlohmann::json certificate_json(const Certificate& c) {
  nlohmann::json j;
  j["mode"] = c.mode == CertMode::Rate ? "rate" : "sensitivity";
  j["bound"] = c.bound;
  j["rho"] = c.rho;
  if (c.mode == CertMode::Rate) j["c"] = c.c;
  j["per_agent_multipliers"] = c.per_agent;
  j["lambdas"] = to_json(c.lambdas);
  j["P"] = to_json(c.P);
  j["residuals"] = {{"max_eig", c.verify.max_eig},
                    {"min_eig_P", c.verify.min_eig_p},
                    {"min_lambda", c.verify.min_lambda},
                    {"scale", c.verify.scale},
                    {"pass", c.verify.pass}};
  return j;
}

inline Certificate certificate_from_json(const nlohmann::json& j) {
  Certificate c;
  try {
    c.mode = j.at("mode").get<std::string>() == "rate" ? CertMode::Rate
                                                       : CertMode::Sensitivity;
    c.bound = j.at("bound").get<double>();
    c.rho = j.at("rho").get<double>();
    c.per_agent = j.value("per_agent_multipliers", false);
    c.P = matrix_from_json(j.at("P"), "P");
    const auto& l = j.at("lambdas");
    c.lambdas = l.empty() ? Vector() : vector_from_json(l, "lambdas");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("certificate: ") + e.what());
  }
  return c;
}

// ---------------------------------------------------------------------------
// Static SVG line charts.

struct Series {
  std::string label;
  std::vector<double> x, y;
};

struct ChartSpec {
  std::string title;
  std::string x_label, y_label;
  bool log_y = false;
  bool markers = false;
  int width = 820, height = 520;
};

namespace detail {

inline std::string escape(const std::string& s) {
  std::string o;
  for (char c : s) {
    switch (c) {
      case '<': o += "&lt;"; break;
      case '>': o += "&gt;"; break;
      case '&': o += "&amp;"; break;
      case '"': o += "&quot;"; break;
      default: o += c;
    }
  }
  return o;
}

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

}  // namespace detail

inline std::string render_svg(const ChartSpec& spec,
                              const std::vector<Series>& series) {
  static const char* palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                  "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
                                  "#bcbd22", "#17becf", "#000000", "#aec7e8"};
  const double ml = 80, mr = 170, mt = 40, mb = 60;
  const double pw = spec.width - ml - mr, ph = spec.height - mt - mb;
  auto ty = [&](double v) { return spec.log_y ? std::log10(v) : v; };
  auto usable = [&](double x, double y) {
    return std::isfinite(x) && std::isfinite(y) && (!spec.log_y || y > 0.0);
  };
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i)
      if (usable(s.x[i], s.y[i])) {
        x0 = std::min(x0, s.x[i]);
        x1 = std::max(x1, s.x[i]);
        y0 = std::min(y0, ty(s.y[i]));
        y1 = std::max(y1, ty(s.y[i]));
      }
  if (!(x0 <= x1)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 - x0 < 1e-300) x0 -= 0.5, x1 += 0.5;
  if (y1 - y0 < 1e-300) y0 -= 0.5, y1 += 0.5;
  const double pad = 0.04 * (y1 - y0);
  y0 -= pad;
  y1 += pad;
  auto px = [&](double x) { return ml + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return mt + (1.0 - (ty(y) - y0) / (y1 - y0)) * ph; };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << spec.width
    << "\" height=\"" << spec.height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << detail::num(ml + pw / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
    << detail::escape(spec.title) << "</text>\n";
  o << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << detail::num(pw)
    << "\" height=\"" << detail::num(ph) << "\" fill=\"none\" stroke=\"#333\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double xv = x0 + (x1 - x0) * i / 5.0;
    const double X = px(xv);
    o << "<line x1=\"" << detail::num(X) << "\" y1=\"" << detail::num(mt + ph)
      << "\" x2=\"" << detail::num(X) << "\" y2=\"" << detail::num(mt + ph + 5)
      << "\" stroke=\"#333\"/><text x=\"" << detail::num(X) << "\" y=\""
      << detail::num(mt + ph + 20) << "\" text-anchor=\"middle\">" << detail::tick(xv)
      << "</text>\n";
    const double yv = y0 + (y1 - y0) * i / 5.0;
    const double Y = mt + (1.0 - i / 5.0) * ph;
    const double label = spec.log_y ? std::pow(10.0, yv) : yv;
    o << "<line x1=\"" << ml - 5 << "\" y1=\"" << detail::num(Y) << "\" x2=\"" << ml
      << "\" y2=\"" << detail::num(Y) << "\" stroke=\"#333\"/><text x=\"" << ml - 8
      << "\" y=\"" << detail::num(Y + 4) << "\" text-anchor=\"end\">" << detail::tick(label)
      << "</text>\n";
  }
  o << "<text x=\"" << detail::num(ml + pw / 2) << "\" y=\"" << spec.height - 15
    << "\" text-anchor=\"middle\">" << detail::escape(spec.x_label) << "</text>\n";
  o << "<text transform=\"translate(20," << detail::num(mt + ph / 2)
    << ") rotate(-90)\" text-anchor=\"middle\">" << detail::escape(spec.y_label)
    << (spec.log_y ? " (log scale)" : "") << "</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* col = palette[k % (sizeof palette / sizeof *palette)];
    // Break the polyline at unusable points (e.g. infeasible sweep rows).
    std::vector<std::vector<std::pair<double, double>>> runs(1);
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (usable(s.x[i], s.y[i])) {
        runs.back().emplace_back(px(s.x[i]), py(s.y[i]));
      } else if (!runs.back().empty()) {
        runs.emplace_back();
      }
    }
    for (const auto& run : runs) {
      if (run.empty()) continue;
      o << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"1.5\" points=\"";
      for (const auto& [X, Y] : run) o << detail::num(X) << ',' << detail::num(Y) << ' ';
      o << "\"/>\n";
      if (spec.markers)
        for (const auto& [X, Y] : run)
          o << "<circle cx=\"" << detail::num(X) << "\" cy=\"" << detail::num(Y)
            << "\" r=\"2.5\" fill=\"" << col << "\"/>\n";
    }
    const double ly = mt + 10 + 18.0 * double(k);
    o << "<line x1=\"" << detail::num(ml + pw + 12) << "\" y1=\"" << detail::num(ly)
      << "\" x2=\"" << detail::num(ml + pw + 36) << "\" y2=\"" << detail::num(ly)
      << "\" stroke=\"" << col << "\" stroke-width=\"2\"/><text x=\""
      << detail::num(ml + pw + 40) << "\" y=\"" << detail::num(ly + 4) << "\">"
      << detail::escape(s.label) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::Io, "cannot write " + path);
  f << text;
  if (!f) throw Error(ErrorCode::Io, "write failed for " + path);
}

}  // namespace subiqc::io

#endif  // SUBIQC_IO_HPP
