#pragma once

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <nlohmann/json.hpp>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "multidescent/activation.hpp"
#include "multidescent/errors.hpp"
#include "multidescent/nu_system.hpp"
#include "multidescent/risk.hpp"
#include "multidescent/simulator.hpp"
#include "multidescent/sweep.hpp"

namespace multidescent {

using json = nlohmann::json;

struct SampleCounts {
  int d = 0;
  int n = 0;
  std::vector<int> N;
};

struct EmpiricalSection {
  std::optional<int> d;
  std::optional<int> n;
  std::optional<std::vector<int>> N;
  int n_test = 700;
  int replications = 30;
  std::uint64_t base_seed = 0;
};

struct SweepSection {
  std::vector<double> ratios;  // empty -> all ones
  std::vector<double> c_grid;
  bool empirical = false;
};

struct LimitSection {
  double r1 = 1.0;
  double r2 = 1.0;
};

struct OutputSection {
  std::string csv_path;
  std::string svg_path;
  std::string json_path;
  bool log_y = false;
  double y_cap = std::numeric_limits<double>::infinity();
};

/// Fully validated configuration. The theory spec always carries psi ratios;
/// simulation configs always carry integer counts.
struct RootConfig {
  std::vector<ActivationSpec> activations;  // empty when moments_override is used
  bool moments_overridden = false;
  QuadratureConfig quadrature;
  TheorySpec theory;
  std::optional<SampleCounts> counts;
  SolverConfig solver;
  std::optional<EmpiricalSection> empirical;
  std::optional<SweepSection> sweep;
  std::optional<LimitSection> limit;
  OutputSection output;
  json source;  // the config after overrides
};

namespace detail {

class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail("expected an object");
  }

  void allow(std::initializer_list<const char*> keys) const {
    std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& [key, value] : j_.items())
      if (!allowed.count(key)) throw ConfigError(path_ + "/" + key + ": unknown key");
  }

  bool has(const char* key) const { return j_.contains(key); }
  const json& at(const char* key) const { return j_.at(key); }
  std::string child(const char* key) const { return path_ + "/" + key; }

  double number(const char* key, std::optional<double> fallback = std::nullopt) const {
    if (!has(key)) {
      if (fallback) return *fallback;
      throw ConfigError(child(key) + ": required number missing");
    }
    const json& v = at(key);
    if (!v.is_number()) throw ConfigError(child(key) + ": expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw ConfigError(child(key) + ": must be finite");
    return x;
  }

  long integer(const char* key, std::optional<long> fallback = std::nullopt) const {
    if (!has(key)) {
      if (fallback) return *fallback;
      throw ConfigError(child(key) + ": required integer missing");
    }
    const json& v = at(key);
    if (!v.is_number_integer()) throw ConfigError(child(key) + ": expected an integer");
    return v.get<long>();
  }

  std::uint64_t unsigned_integer(const char* key, std::uint64_t fallback) const {
    if (!has(key)) return fallback;
    const json& v = at(key);
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<long>() < 0))
      throw ConfigError(child(key) + ": expected a non-negative integer");
    return v.get<std::uint64_t>();
  }

  bool boolean(const char* key, bool fallback) const {
    if (!has(key)) return fallback;
    if (!at(key).is_boolean()) throw ConfigError(child(key) + ": expected true or false");
    return at(key).get<bool>();
  }

  std::string string(const char* key, std::string fallback = {}) const {
    if (!has(key)) return fallback;
    if (!at(key).is_string()) throw ConfigError(child(key) + ": expected a string");
    return at(key).get<std::string>();
  }

  std::vector<double> numbers(const char* key) const {
    const json& v = at(key);
    if (!v.is_array()) throw ConfigError(child(key) + ": expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) throw ConfigError(child(key) + "/" + std::to_string(i) + ": expected a number");
      out.push_back(v[i].get<double>());
    }
    return out;
  }

  std::vector<int> integers(const char* key) const {
    const json& v = at(key);
    if (!v.is_array()) throw ConfigError(child(key) + ": expected an array of integers");
    std::vector<int> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number_integer())
        throw ConfigError(child(key) + "/" + std::to_string(i) + ": expected an integer");
      out.push_back(v[i].get<int>());
    }
    return out;
  }

  [[noreturn]] void fail(const std::string& msg) const { throw ConfigError(path_ + ": " + msg); }

 private:
  const json& j_;
  std::string path_;
};

inline ActivationSpec parse_activation(const json& j, const std::string& path) {
  Reader r(j, path);
  r.allow({"kind", "in_scale", "out_scale", "shift"});
  ActivationSpec a;
  const std::string kind = r.string("kind");
  const auto parsed = parse_activation_kind(kind);
  if (!parsed) throw ConfigError(r.child("kind") + ": unknown activation kind '" + kind + "'");
  a.kind = *parsed;
  a.in_scale = r.number("in_scale", 1.0);
  a.out_scale = r.number("out_scale", 1.0);
  a.shift = r.number("shift", 0.0);
  return a;
}

inline Moments parse_moments(const json& j, const std::string& path) {
  Reader r(j, path);
  r.allow({"mu0", "mu1", "mu2_sq"});
  const double mu2_sq = r.number("mu2_sq");
  if (mu2_sq < 0.0) throw ConfigError(r.child("mu2_sq") + ": must be >= 0");
  return make_moments(r.number("mu0", 0.0), r.number("mu1"), mu2_sq);
}

}  // namespace detail

/// Applies a dotted-path override such as "model.lambda=0.01". The value is
/// read as JSON when it parses, otherwise as a string.
inline void apply_override(json& root, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("--set " + assignment + ": expected key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  json* node = &root;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("--set " + assignment + ": empty path component");
    if (node->is_array()) {
      std::size_t idx = 0;
      try {
        idx = std::stoul(part);
      } catch (...) {
        throw ConfigError("--set " + assignment + ": '" + part + "' is not an array index");
      }
      if (idx >= node->size()) throw ConfigError("--set " + assignment + ": index out of range");
      node = &(*node)[idx];
    } else {
      if (node->is_null()) *node = json::object();
      if (!node->is_object()) throw ConfigError("--set " + assignment + ": cannot descend into a scalar");
      node = &(*node)[part];
    }
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  *node = std::move(value);
}

inline RootConfig parse_config_json(const json& root_json) {
  using detail::Reader;
  RootConfig cfg;
  cfg.source = root_json;
  Reader root(root_json, "");
  root.allow({"activations", "moments_override", "quadrature", "model", "solver", "empirical", "sweep",
              "limit", "output"});

  if (root.has("quadrature")) {
    Reader q(root.at("quadrature"), "/quadrature");
    q.allow({"panel_count", "truncation", "nodes_per_panel"});
    cfg.quadrature.panel_count = static_cast<int>(q.integer("panel_count", cfg.quadrature.panel_count));
    cfg.quadrature.truncation = q.number("truncation", cfg.quadrature.truncation);
    cfg.quadrature.nodes_per_panel = static_cast<int>(q.integer("nodes_per_panel", cfg.quadrature.nodes_per_panel));
    if (cfg.quadrature.panel_count < 1 || cfg.quadrature.nodes_per_panel < 1)
      throw ConfigError("/quadrature: counts must be >= 1");
    if (!(cfg.quadrature.truncation >= 8.0)) throw ConfigError("/quadrature/truncation: must be >= 8");
  }

  const bool has_acts = root.has("activations");
  const bool has_moments = root.has("moments_override");
  if (has_acts == has_moments)
    throw ConfigError("/: exactly one of 'activations' or 'moments_override' is required");
  if (has_acts) {
    const json& arr = root.at("activations");
    if (!arr.is_array() || arr.empty()) throw ConfigError("/activations: expected a non-empty array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      cfg.activations.push_back(detail::parse_activation(arr[i], "/activations/" + std::to_string(i)));
      cfg.theory.moments.push_back(compute_moments(cfg.activations.back(), cfg.quadrature));
    }
  } else {
    const json& arr = root.at("moments_override");
    if (!arr.is_array() || arr.empty()) throw ConfigError("/moments_override: expected a non-empty array");
    cfg.moments_overridden = true;
    for (std::size_t i = 0; i < arr.size(); ++i)
      cfg.theory.moments.push_back(detail::parse_moments(arr[i], "/moments_override/" + std::to_string(i)));
  }
  const std::size_t K = cfg.theory.moments.size();

  if (!root.has("model")) throw ConfigError("/model: required section missing");
  {
    Reader m(root.at("model"), "/model");
    m.allow({"psi", "psi_n", "d", "n", "N", "lambda", "F0", "F1", "tau"});
    const bool psi_form = m.has("psi") || m.has("psi_n");
    const bool count_form = m.has("d") || m.has("n") || m.has("N");
    if (psi_form == count_form)
      throw ConfigError("/model: give either psi and psi_n, or d, n and N");
    if (psi_form) {
      cfg.theory.psi = m.numbers("psi");
      cfg.theory.psi_n = m.number("psi_n");
      for (std::size_t i = 0; i < cfg.theory.psi.size(); ++i)
        if (!(cfg.theory.psi[i] > 0.0)) throw ConfigError("/model/psi/" + std::to_string(i) + ": must be > 0");
      if (!(cfg.theory.psi_n > 0.0)) throw ConfigError("/model/psi_n: must be > 0");
    } else {
      SampleCounts sc;
      sc.d = static_cast<int>(m.integer("d"));
      sc.n = static_cast<int>(m.integer("n"));
      sc.N = m.integers("N");
      if (sc.d < 1) throw ConfigError("/model/d: must be >= 1");
      if (sc.n < 1) throw ConfigError("/model/n: must be >= 1");
      for (std::size_t i = 0; i < sc.N.size(); ++i)
        if (sc.N[i] < 1) throw ConfigError("/model/N/" + std::to_string(i) + ": must be >= 1");
      for (int count : sc.N) cfg.theory.psi.push_back(static_cast<double>(count) / sc.d);
      cfg.theory.psi_n = static_cast<double>(sc.n) / sc.d;
      cfg.counts = sc;
    }
    if (cfg.theory.psi.size() != K)
      throw ConfigError(std::string("/model/") + (psi_form ? "psi" : "N") + ": expected " + std::to_string(K) +
                        " entries, one per activation");
    cfg.theory.lambda = m.number("lambda");
    if (!(cfg.theory.lambda > 0.0)) throw ConfigError("/model/lambda: lambda must be > 0");
    cfg.theory.F0 = m.number("F0", 0.0);
    cfg.theory.F1 = m.number("F1", 1.0);
    cfg.theory.tau = m.number("tau", 0.0);
    if (cfg.theory.F1 < 0.0) throw ConfigError("/model/F1: must be >= 0");
    if (cfg.theory.tau < 0.0) throw ConfigError("/model/tau: must be >= 0");
    if (cfg.theory.F0 != 0.0) {
      double mean_energy = 0.0;
      for (const auto& mo : cfg.theory.moments) mean_energy += mo.mu0 * mo.mu0;
      if (!(mean_energy > 1e-20))
        throw ConfigError(
            "/model/F0: a nonzero intercept needs sum_c mu_{c,0}^2 > 0, but every activation has "
            "zero Gaussian mean");
    }
  }

  if (root.has("solver")) {
    Reader s(root.at("solver"), "/solver");
    s.allow({"tol", "max_iter", "damping", "continuation_start", "continuation_factor"});
    cfg.solver.tol = s.number("tol", cfg.solver.tol);
    cfg.solver.max_iter = s.integer("max_iter", cfg.solver.max_iter);
    cfg.solver.damping = s.number("damping", cfg.solver.damping);
    if (s.has("continuation_start")) cfg.solver.continuation_start = s.number("continuation_start");
    cfg.solver.continuation_factor = s.number("continuation_factor", cfg.solver.continuation_factor);
    try {
      validate(cfg.solver);
    } catch (const InvalidSpec& e) {
      throw ConfigError(std::string("/solver: ") + e.what());
    }
  }

  if (root.has("empirical")) {
    Reader e(root.at("empirical"), "/empirical");
    e.allow({"d", "n", "N", "n_test", "replications", "base_seed"});
    EmpiricalSection es;
    if (e.has("d")) es.d = static_cast<int>(e.integer("d"));
    if (e.has("n")) es.n = static_cast<int>(e.integer("n"));
    if (e.has("N")) es.N = e.integers("N");
    es.n_test = static_cast<int>(e.integer("n_test", es.n_test));
    es.replications = static_cast<int>(e.integer("replications", es.replications));
    es.base_seed = e.unsigned_integer("base_seed", 0);
    if ((es.d && *es.d < 1) || (es.n && *es.n < 1)) throw ConfigError("/empirical: d and n must be >= 1");
    if (es.N) {
      if (es.N->size() != K) throw ConfigError("/empirical/N: expected one count per activation");
      for (int count : *es.N)
        if (count < 1) throw ConfigError("/empirical/N: counts must be >= 1");
    }
    if (es.n_test < 1) throw ConfigError("/empirical/n_test: must be >= 1");
    if (es.replications < 1) throw ConfigError("/empirical/replications: must be >= 1");
    cfg.empirical = es;
  }

  if (root.has("sweep")) {
    Reader s(root.at("sweep"), "/sweep");
    s.allow({"ratios", "c_grid", "empirical"});
    SweepSection ss;
    if (s.has("ratios")) ss.ratios = s.numbers("ratios");
    else ss.ratios.assign(K, 1.0);
    if (ss.ratios.size() != K) throw ConfigError("/sweep/ratios: expected one ratio per activation");
    for (double r : ss.ratios)
      if (!(r > 0.0)) throw ConfigError("/sweep/ratios: ratios must be > 0");
    if (!s.has("c_grid")) throw ConfigError("/sweep/c_grid: required");
    if (s.at("c_grid").is_array()) {
      ss.c_grid = s.numbers("c_grid");
    } else {
      Reader g(s.at("c_grid"), "/sweep/c_grid");
      g.allow({"start", "stop", "step"});
      const double start = g.number("start"), stop = g.number("stop"), step = g.number("step");
      if (!(start > 0.0) || !(step > 0.0) || !(stop >= start))
        throw ConfigError("/sweep/c_grid: need 0 < start <= stop and step > 0");
      ss.c_grid = make_c_grid(start, stop, step);
    }
    if (ss.c_grid.empty()) throw ConfigError("/sweep/c_grid: EmptyGrid, at least one value is required");
    for (std::size_t i = 0; i < ss.c_grid.size(); ++i) {
      if (!(ss.c_grid[i] > 0.0)) throw ConfigError("/sweep/c_grid: values must be > 0");
      if (i > 0 && !(ss.c_grid[i] > ss.c_grid[i - 1]))
        throw ConfigError("/sweep/c_grid: values must be strictly increasing");
    }
    ss.empirical = s.boolean("empirical", false);
    cfg.sweep = ss;
  }

  if (root.has("limit")) {
    Reader l(root.at("limit"), "/limit");
    l.allow({"r1", "r2"});
    LimitSection ls;
    ls.r1 = l.number("r1", 1.0);
    ls.r2 = l.number("r2", 1.0);
    if (!(ls.r1 > 0.0) || !(ls.r2 > 0.0)) throw ConfigError("/limit: r1 and r2 must be > 0");
    cfg.limit = ls;
  }

  if (root.has("output")) {
    Reader o(root.at("output"), "/output");
    o.allow({"csv_path", "svg_path", "json_path", "log_y", "y_cap"});
    cfg.output.csv_path = o.string("csv_path");
    cfg.output.svg_path = o.string("svg_path");
    cfg.output.json_path = o.string("json_path");
    cfg.output.log_y = o.boolean("log_y", false);
    if (o.has("y_cap")) cfg.output.y_cap = o.number("y_cap");
  }
  return cfg;
}

inline json load_config_json(const std::string& path_or_text) {
  std::string text;
  const auto first = path_or_text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && path_or_text[first] == '{') {
    text = path_or_text;
  } else {
    std::ifstream f(path_or_text, std::ios::binary);
    if (!f) throw IoError("cannot read config file " + path_or_text);
    std::ostringstream ss;
    ss << f.rdbuf();
    text = ss.str();
  }
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what());
  }
}

/// Reads a config from a file path or inline JSON text, applies overrides
/// and validates everything eagerly.
inline RootConfig parse_config(const std::string& path_or_text, const std::vector<std::string>& overrides = {}) {
  json j = load_config_json(path_or_text);
  for (const auto& o : overrides) apply_override(j, o);
  return parse_config_json(j);
}

/// Simulation parameters for the configured model. Counts come from the
/// empirical section first, then from the model, then from psi * d.
inline EmpiricalConfig empirical_config(const RootConfig& cfg) {
  if (cfg.moments_overridden)
    throw ConfigError("/activations: simulation needs concrete activations, not moments_override");
  const EmpiricalSection es = cfg.empirical.value_or(EmpiricalSection{});
  EmpiricalConfig e;
  if (es.d) e.d = *es.d;
  else if (cfg.counts) e.d = cfg.counts->d;
  else throw ConfigError("/empirical/d: required when the model is given as psi ratios");
  if (es.n) e.n = *es.n;
  else if (cfg.counts && cfg.counts->d == e.d) e.n = cfg.counts->n;
  else e.n = static_cast<int>(std::max(1L, std::lround(cfg.theory.psi_n * e.d)));
  if (es.N) e.N = *es.N;
  else if (cfg.counts && cfg.counts->d == e.d) e.N = cfg.counts->N;
  else
    for (double p : cfg.theory.psi) e.N.push_back(static_cast<int>(std::max(1L, std::lround(p * e.d))));
  e.activations = cfg.activations;
  e.lambda = cfg.theory.lambda;
  e.F0 = cfg.theory.F0;
  e.F1 = cfg.theory.F1;
  e.tau = cfg.theory.tau;
  e.n_test = es.n_test;
  e.replications = es.replications;
  e.base_seed = es.base_seed;
  return e;
}

/// Theory spec matching an empirical config: psi_c = N_c/d, psi_n = n/d.
inline TheorySpec matched_theory(const EmpiricalConfig& e, const std::vector<Moments>& moments) {
  TheorySpec t;
  for (int count : e.N) t.psi.push_back(static_cast<double>(count) / e.d);
  t.psi_n = static_cast<double>(e.n) / e.d;
  t.moments = moments;
  t.lambda = e.lambda;
  t.F0 = e.F0;
  t.F1 = e.F1;
  t.tau = e.tau;
  return t;
}

inline SweepSpec sweep_spec(const RootConfig& cfg) {
  if (!cfg.sweep) throw ConfigError("/sweep: section required for the sweep subcommand");
  SweepSpec s;
  s.base = cfg.theory;
  s.ratios = cfg.sweep->ratios;
  s.c_grid = cfg.sweep->c_grid;
  s.solver = cfg.solver;
  if (cfg.sweep->empirical) {
    EmpiricalConfig e = empirical_config(cfg);
    // psi_n for the theory must match the simulated n/d.
    s.base.psi_n = static_cast<double>(e.n) / e.d;
    s.empirical = std::move(e);
  }
  return s;
}

inline LimitSpec limit_spec(const RootConfig& cfg) {
  if (cfg.theory.K() != 2) throw ConfigError("/model: the infinite-width limit needs exactly two activations");
  LimitSpec ls;
  const LimitSection sec = cfg.limit.value_or(LimitSection{});
  ls.r1 = sec.r1;
  ls.r2 = sec.r2;
  ls.psi3 = cfg.theory.psi_n;
  ls.m1 = cfg.theory.moments[0];
  ls.m2 = cfg.theory.moments[1];
  ls.F1 = cfg.theory.F1;
  ls.tau = cfg.theory.tau;
  return ls;
}

}  // namespace multidescent
