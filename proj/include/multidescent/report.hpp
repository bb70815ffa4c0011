#pragma once

#include <nlohmann/json.hpp>
#include <sstream>
#include <string>

#include "multidescent/activation.hpp"
#include "multidescent/format.hpp"
#include "multidescent/risk.hpp"
#include "multidescent/simulator.hpp"
#include "multidescent/sweep.hpp"

namespace multidescent {

namespace detail {

inline void dump_value(std::ostringstream& out, const nlohmann::json& j, int indent, int depth) {
  const std::string pad(static_cast<std::size_t>(indent * (depth + 1)), ' ');
  const std::string close_pad(static_cast<std::size_t>(indent * depth), ' ');
  if (j.is_number_float()) {
    out << format_report_number(j.get<double>());
  } else if (j.is_object()) {
    if (j.empty()) {
      out << "{}";
      return;
    }
    out << "{\n";
    bool first = true;
    for (const auto& [key, value] : j.items()) {
      out << (first ? "" : ",\n") << pad << nlohmann::json(key).dump() << ": ";
      dump_value(out, value, indent, depth + 1);
      first = false;
    }
    out << '\n' << close_pad << '}';
  } else if (j.is_array()) {
    if (j.empty()) {
      out << "[]";
      return;
    }
    out << '[';
    for (std::size_t i = 0; i < j.size(); ++i) {
      out << (i ? ", " : "");
      dump_value(out, j[i], indent, depth + 1);
    }
    out << ']';
  } else {
    out << j.dump();
  }
}

}  // namespace detail

/// JSON text with every floating-point value printed by format_report_number.
inline std::string dump_report(const nlohmann::json& j) {
  std::ostringstream out;
  detail::dump_value(out, j, 2, 0);
  out << '\n';
  return out.str();
}

inline nlohmann::json to_json(const Moments& m) {
  return {{"mu0", m.mu0}, {"mu1", m.mu1}, {"mu2_sq", m.mu2_sq}, {"mu2_sq_raw", m.mu2_sq_raw}};
}

inline nlohmann::json to_json(const ActivationSpec& a) {
  return {{"kind", std::string(to_string(a.kind))},
          {"in_scale", a.in_scale},
          {"out_scale", a.out_scale},
          {"shift", a.shift}};
}

inline nlohmann::json to_json(const NuStar& nu) {
  return {{"b", nu.b}, {"residual", nu.residual}, {"iterations", nu.iterations}, {"lambda_path", nu.lambda_path}};
}

inline nlohmann::json to_json(const TheoryRisk& r) {
  nlohmann::json L = nlohmann::json::array();
  for (int i = 0; i < 4; ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int j = 0; j < 4; ++j) row.push_back(r.L(i, j));
    L.push_back(row);
  }
  return {{"risk", r.risk},           {"bias", r.bias},         {"variance", r.variance},
          {"L", L},                   {"nu", to_json(r.nu)},    {"condition", r.condition},
          {"ill_conditioned", r.ill_conditioned}};
}

inline nlohmann::json to_json(const EmpiricalRisk& e) {
  return {{"mean", e.mean}, {"std_error", e.std_error}, {"per_replication", e.per_replication}};
}

inline nlohmann::json to_json(const SweepRow& row) {
  nlohmann::json j = {{"c", row.c},
                      {"psi", row.psi},
                      {"psi_n", row.psi_n},
                      {"lambda", row.lambda},
                      {"theory_risk", row.theory_risk},
                      {"theory_bias", row.theory_bias},
                      {"theory_variance", row.theory_variance},
                      {"solver_iterations", row.solver_iterations},
                      {"condition", row.condition}};
  if (row.emp_mean) j["emp_mean"] = *row.emp_mean;
  if (row.emp_se) j["emp_se"] = *row.emp_se;
  if (row.replications) j["replications"] = *row.replications;
  if (!row.N.empty()) j["N"] = row.N;
  if (row.rounding_adjusted) j["rounding_adjusted"] = true;
  if (!row.error.empty()) j["error"] = row.error;
  return j;
}

}  // namespace multidescent
