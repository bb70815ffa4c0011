#include <gtest/gtest.h>

#include "multidescent/config.hpp"
#include "multidescent/report.hpp"

using namespace multidescent;

namespace {

const char* kMinimal = R"({"activations": [{"kind": "relu"}], "model": {"psi": [1], "psi_n": 1, "lambda": 1}})";

std::string config_error(const std::string& text, const std::vector<std::string>& overrides = {}) {
  try {
    parse_config(text, overrides);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(ParseConfig, Minimal) {
  const RootConfig cfg = parse_config(kMinimal);
  ASSERT_EQ(cfg.theory.K(), 1);
  EXPECT_EQ(cfg.theory.lambda, 1.0);
  EXPECT_NEAR(cfg.theory.moments[0].mu1, 0.5, 1e-12);
  EXPECT_EQ(cfg.theory.F1, 1.0);
  EXPECT_EQ(cfg.theory.tau, 0.0);
}

TEST(ParseConfig, LambdaMustBePositive) {
  EXPECT_NE(config_error(kMinimal, {"model.lambda=0"}).find("lambda must be > 0"), std::string::npos);
}

TEST(ParseConfig, InterceptNeedsMeanEnergy) {
  const std::string msg = config_error(
      R"({"activations": [{"kind": "identity"}, {"kind": "sin"}],
          "model": {"psi": [1, 1], "psi_n": 2, "lambda": 0.1, "F0": 0.2}})");
  EXPECT_NE(msg.find("/model/F0"), std::string::npos) << msg;
  EXPECT_NE(msg.find("mu_{c,0}^2 > 0"), std::string::npos) << msg;
}

TEST(ParseConfig, UnknownKeysNamePath) {
  EXPECT_NE(config_error(kMinimal, {"model.lamda=1"}).find("/model/lamda: unknown key"), std::string::npos);
  EXPECT_NE(config_error(R"({"activations": [{"kind": "relu", "scale": 2}], "model": {"psi": [1], "psi_n": 1, "lambda": 1}})")
                .find("/activations/0/scale"),
            std::string::npos);
}

TEST(ParseConfig, ExactlyOneMomentSource) {
  EXPECT_NE(config_error(R"({"model": {"psi": [1], "psi_n": 1, "lambda": 1}})").find("exactly one"),
            std::string::npos);
  EXPECT_NE(config_error(R"({"activations": [{"kind": "relu"}], "moments_override": [{"mu1": 1, "mu2_sq": 0}],
                             "model": {"psi": [1], "psi_n": 1, "lambda": 1}})")
                .find("exactly one"),
            std::string::npos);
}

TEST(ParseConfig, MomentsOverride) {
  const RootConfig cfg =
      parse_config(R"({"moments_override": [{"mu1": 1, "mu2_sq": 0}], "model": {"psi": [1], "psi_n": 1, "lambda": 1}})");
  EXPECT_TRUE(cfg.moments_overridden);
  EXPECT_EQ(cfg.theory.moments[0].mu1, 1.0);
  EXPECT_THROW(empirical_config(cfg), ConfigError);
}

TEST(ParseConfig, CountsDerivePsi) {
  const RootConfig cfg = parse_config(
      R"({"activations": [{"kind": "elu", "in_scale": 3}, {"kind": "relu", "in_scale": 0.25}],
          "model": {"d": 200, "n": 600, "N": [150, 300], "lambda": 0.001}})");
  EXPECT_EQ(cfg.theory.psi, (std::vector<double>{0.75, 1.5}));
  EXPECT_EQ(cfg.theory.psi_n, 3.0);
  const EmpiricalConfig e = empirical_config(cfg);
  EXPECT_EQ(e.d, 200);
  EXPECT_EQ(e.n, 600);
  EXPECT_EQ(e.N, (std::vector<int>{150, 300}));
}

TEST(ParseConfig, PsiAndCountsAreExclusive) {
  EXPECT_NE(config_error(R"({"activations": [{"kind": "relu"}], "model": {"psi": [1], "psi_n": 1, "d": 10, "lambda": 1}})")
                .find("either psi"),
            std::string::npos);
}

TEST(ParseConfig, WrongNumberOfPsi) {
  EXPECT_NE(config_error(kMinimal, {"model.psi=[1,2]"}).find("/model/psi"), std::string::npos);
}

TEST(ParseConfig, SweepGridObject) {
  const RootConfig cfg = parse_config(kMinimal, {"sweep={\"c_grid\": {\"start\": 0.2, \"stop\": 1.0, \"step\": 0.2}}"});
  ASSERT_TRUE(cfg.sweep);
  EXPECT_EQ(cfg.sweep->c_grid, (std::vector<double>{0.2, 0.4, 0.6, 0.8, 1.0}));
  EXPECT_EQ(cfg.sweep->ratios, (std::vector<double>{1.0}));
}

TEST(ParseConfig, SweepValidation) {
  EXPECT_NE(config_error(kMinimal, {"sweep={\"c_grid\": []}"}).find("/sweep/c_grid"), std::string::npos);
  EXPECT_NE(config_error(kMinimal, {"sweep={\"c_grid\": [1, 0.5]}"}).find("increasing"), std::string::npos);
}

TEST(ParseConfig, SolverValidation) {
  EXPECT_NE(config_error(kMinimal, {"solver.damping=1.5"}).find("/solver"), std::string::npos);
  const RootConfig cfg = parse_config(kMinimal, {"solver.tol=1e-10", "solver.continuation_start=10"});
  EXPECT_EQ(cfg.solver.tol, 1e-10);
  EXPECT_EQ(*cfg.solver.continuation_start, 10.0);
}

TEST(ParseConfig, InvalidJson) {
  EXPECT_NE(config_error("{not json").find("invalid JSON"), std::string::npos);
}

TEST(ParseConfig, MissingFileIsIoError) { EXPECT_THROW(parse_config("/nonexistent/config.json"), IoError); }

TEST(ApplyOverride, DottedPathsAndTypes) {
  json j = json::parse(R"({"a": {"b": [1, 2]}})");
  apply_override(j, "a.b.1=5");
  apply_override(j, "a.c=hello");
  apply_override(j, "x.y=true");
  EXPECT_EQ(j["a"]["b"][1], 5);
  EXPECT_EQ(j["a"]["c"], "hello");
  EXPECT_EQ(j["x"]["y"], true);
  EXPECT_THROW(apply_override(j, "novalue"), ConfigError);
  EXPECT_THROW(apply_override(j, "a.b.9=1"), ConfigError);
}

TEST(SweepSpecFromConfig, EmpiricalUsesSimulatedRatio) {
  const RootConfig cfg = parse_config(
      R"({"activations": [{"kind": "relu"}, {"kind": "tanh"}],
          "model": {"psi": [1, 1], "psi_n": 3, "lambda": 0.01},
          "empirical": {"d": 50, "n": 100, "replications": 2},
          "sweep": {"ratios": [1, 2], "c_grid": [0.5, 1.0], "empirical": true}})");
  const SweepSpec s = sweep_spec(cfg);
  EXPECT_EQ(s.base.psi_n, 2.0);
  ASSERT_TRUE(s.empirical);
  EXPECT_EQ(s.empirical->replications, 2);
  EXPECT_EQ(s.ratios, (std::vector<double>{1.0, 2.0}));
}

TEST(LimitSpecFromConfig, NeedsTwoComponents) {
  EXPECT_THROW(limit_spec(parse_config(kMinimal)), ConfigError);
}

TEST(ReportFormat, Numbers) {
  EXPECT_EQ(format_report_number(1.0), "1.000000000000");
  EXPECT_EQ(format_report_number(1.0 / std::sqrt(2.0 * M_PI)), "0.398942280401");
  EXPECT_EQ(format_report_number(0.0), "0.000000000000");
  EXPECT_EQ(format_report_number(1.25e-5), "1.25000000000e-05");
  EXPECT_EQ(format_report_number(NAN), "null");
  EXPECT_EQ(format_sig12(0.1 + 0.2), "0.3");
}

TEST(ReportFormat, DumpIsValidJson) {
  const json j = {{"x", 0.5}, {"v", {1.0, 2e-7}}, {"n", 3}, {"s", "a\"b"}, {"nested", {{"y", NAN}}}};
  const json back = json::parse(dump_report(j));
  EXPECT_EQ(back["x"], 0.5);
  EXPECT_EQ(back["v"][1], 2e-7);
  EXPECT_EQ(back["n"], 3);
  EXPECT_EQ(back["s"], "a\"b");
  EXPECT_TRUE(back["nested"]["y"].is_null());
}
