// Command-line front end: moments, theory, simulate, sweep and limit.

#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <iostream>
#include <string>
#include <vector>

#include "multidescent/config.hpp"
#include "multidescent/report.hpp"
#include "multidescent/version.hpp"

namespace md = multidescent;
using md::json;

namespace {

enum ExitCode : int { kOk = 0, kConfigError = 2, kSolverFailure = 3, kIoError = 4 };

void emit(const json& report, const md::RootConfig& cfg) {
  const std::string text = md::dump_report(report);
  std::cout << text;
  if (!cfg.output.json_path.empty()) md::write_text_file(cfg.output.json_path, text);
}

void warn_if_ill_conditioned(const md::TheoryRisk& r, const std::string& where) {
  if (r.ill_conditioned)
    std::cerr << "warning: IllConditioned: " << where << "condition number of H is "
              << md::format_sig12(r.condition) << '\n';
}

int cmd_moments(const md::RootConfig& cfg) {
  json list = json::array();
  for (std::size_t i = 0; i < cfg.theory.moments.size(); ++i) {
    json entry = {{"moments", md::to_json(cfg.theory.moments[i])}};
    if (!cfg.activations.empty()) entry["activation"] = md::to_json(cfg.activations[i]);
    list.push_back(entry);
  }
  emit({{"moments", list}}, cfg);
  return kOk;
}

int cmd_theory(const md::RootConfig& cfg) {
  const md::TheoryRisk r = md::asymptotic_risk(cfg.theory, cfg.solver);
  std::cerr << "theory: " << r.nu.iterations << " solver iterations over " << r.nu.lambda_path.size()
            << " lambda stages, residual " << md::format_sig12(r.nu.residual) << '\n';
  warn_if_ill_conditioned(r, "");
  json out = md::to_json(r);
  out["b"] = r.nu.b;
  out["psi"] = cfg.theory.psi;
  out["psi_n"] = cfg.theory.psi_n;
  out["lambda"] = cfg.theory.lambda;
  emit(out, cfg);
  return kOk;
}

int cmd_simulate(const md::RootConfig& cfg) {
  const md::EmpiricalConfig e = md::empirical_config(cfg);
  const auto start = std::chrono::steady_clock::now();
  const md::EmpiricalRisk er = md::run_experiment(e);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::cerr << "simulate: " << e.replications << " replications in " << md::format_sig12(secs) << " s\n";
  json out = {{"empirical", md::to_json(er)},
              {"d", e.d},
              {"n", e.n},
              {"N", e.N},
              {"lambda", e.lambda},
              {"replications", e.replications},
              {"base_seed", e.base_seed}};
  const md::TheoryRisk tr = md::asymptotic_risk(md::matched_theory(e, cfg.theory.moments), cfg.solver);
  warn_if_ill_conditioned(tr, "");
  out["theory_risk"] = tr.risk;
  emit(out, cfg);
  return kOk;
}

int cmd_sweep(const md::RootConfig& cfg) {
  const md::SweepSpec spec = md::sweep_spec(cfg);
  const md::SweepResult result = md::run_sweep(spec);
  for (const auto& row : result.rows) {
    if (!row.error.empty())
      std::cerr << "warning: row c=" << md::format_sig12(row.c) << " failed: " << row.error << '\n';
    else if (row.condition > md::kIllConditionedThreshold)
      std::cerr << "warning: IllConditioned: row c=" << md::format_sig12(row.c) << " condition number of H is "
                << md::format_sig12(row.condition) << '\n';
    if (row.rounding_adjusted)
      std::cerr << "warning: row c=" << md::format_sig12(row.c) << " feature count rounded up to 1\n";
  }
  const std::string csv = md::to_csv(result);
  std::cout << csv;
  if (!cfg.output.csv_path.empty()) md::write_text_file(cfg.output.csv_path, csv);
  if (!cfg.output.svg_path.empty()) {
    md::SvgOptions opt;
    opt.log_y = cfg.output.log_y;
    opt.y_cap = cfg.output.y_cap;
    md::render_svg(result, cfg.output.svg_path, opt);
  }
  if (!cfg.output.json_path.empty()) {
    const std::time_t now = std::time(nullptr);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    json rows = json::array();
    for (const auto& row : result.rows) rows.push_back(md::to_json(row));
    const json doc = {{"metadata", {{"config", cfg.source}, {"timestamp", stamp}, {"version", md::kVersion}}},
                      {"rows", rows}};
    md::write_text_file(cfg.output.json_path, md::dump_report(doc));
  }
  return kOk;
}

int cmd_limit(const md::RootConfig& cfg) {
  const md::LimitSpec ls = md::limit_spec(cfg);
  const double inf = md::limit_risk_infinite_width(ls);
  emit({{"infinite_width_risk", inf},
        {"zero_width_risk", md::limit_risk_zero_width(cfg.theory)},
        {"r1", ls.r1},
        {"r2", ls.r2},
        {"psi3", ls.psi3}},
       cfg);
  return kOk;
}

int fail(const char* kind, const std::string& message, int code) {
  std::cerr << "error: " << kind << ": " << message << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Asymptotic and Monte Carlo excess risk of multiple random feature models"};
  app.set_version_flag("--version", std::string(md::kVersion));
  app.require_subcommand(1);

  std::string config_arg;
  std::vector<std::string> overrides;
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"moments", "print the Gaussian moments of each activation"},
      {"theory", "solve the self-consistent system and print the asymptotic risk"},
      {"simulate", "run the Monte Carlo ridge regression experiment"},
      {"sweep", "evaluate a risk curve over a grid of model complexities"},
      {"limit", "print the infinite- and zero-width limits of the two-activation risk"}};
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_arg, "config file path or inline JSON")->required();
    sub->add_option("--set", overrides, "dotted-path override, e.g. model.lambda=0.01");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("ConfigError", e.what(), kConfigError);
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    const md::RootConfig cfg = md::parse_config(config_arg, overrides);
    if (command == "moments") return cmd_moments(cfg);
    if (command == "theory") return cmd_theory(cfg);
    if (command == "simulate") return cmd_simulate(cfg);
    if (command == "sweep") return cmd_sweep(cfg);
    return cmd_limit(cfg);
  } catch (const md::ConfigError& e) {
    return fail(e.kind(), e.what(), kConfigError);
  } catch (const md::IoError& e) {
    return fail(e.kind(), e.what(), kIoError);
  } catch (const md::InvalidSpec& e) {
    return fail("ConfigError", e.what(), kConfigError);
  } catch (const md::Error& e) {
    return fail(e.kind(), e.what(), kSolverFailure);
  } catch (const std::exception& e) {
    return fail("Error", e.what(), kSolverFailure);
  }
}
