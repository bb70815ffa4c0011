#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "multidescent/activation.hpp"
#include "multidescent/risk.hpp"

using namespace multidescent;

namespace {

TheorySpec random_spec(std::mt19937_64& rng, int K) {
  std::uniform_real_distribution<double> mom(0.0, 2.0), psi(0.1, 5.0), loglam(-4.0, 0.0), unit(0.0, 1.0);
  TheorySpec s;
  for (int c = 0; c < K; ++c) {
    s.moments.push_back(make_moments(mom(rng), mom(rng), mom(rng)));
    s.psi.push_back(psi(rng));
  }
  s.psi_n = psi(rng);
  s.lambda = std::pow(10.0, loglam(rng));
  s.F1 = 0.5 + unit(rng);
  s.tau = unit(rng);
  return s;
}

TheorySpec zero_spec() {
  TheorySpec s;
  s.moments.assign(2, make_moments(0.0, 0.0, 0.0));
  s.psi = {0.7, 1.3};
  s.psi_n = 2.0;
  s.lambda = 0.3;
  s.F1 = 1.0;
  s.tau = 0.3;
  return s;
}

TheorySpec elu_relu_spec(double c, double lambda) {
  TheorySpec s;
  s.moments = {compute_moments({ActivationKind::elu, 3.0, 1.0, 0.0}),
               compute_moments({ActivationKind::relu, 0.25, 1.0, 0.0})};
  s.psi_n = 10.0 / 3.0;
  s.psi = {c * s.psi_n / 2.0, c * s.psi_n / 2.0};
  s.lambda = lambda;
  s.F1 = 1.0;
  s.tau = 0.1;
  return s;
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

}  // namespace

TEST(BuildMatrices, ZeroMoments) {
  const TheorySpec s = zero_spec();
  const NuStar nu = solve_nu(s);
  const TheoryMatrices m = build_matrices(s, nu);
  EXPECT_EQ(m.mN, 0.0);
  EXPECT_EQ(m.MD, -1.0);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      EXPECT_NEAR(m.H(i, j), i == j ? -s.psi_at(i) / (nu.b[i] * nu.b[i]) : 0.0, 1e-15);
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 4; ++k) EXPECT_EQ(m.V(i, k), (i == 2 && (k == 1 || k == 3)) ? 1.0 : 0.0);
}

TEST(BuildMatrices, HandSubstitutionWithCubicRoot) {
  TheorySpec s;
  s.moments = {make_moments(0.0, 1.0, 0.0), make_moments(0.0, 0.0, 0.0)};
  s.psi = {1.0, 2.0};
  s.psi_n = 1.0;
  s.lambda = 1.0;
  const NuStar nu = solve_nu(s);
  const double r = nu.b[0];
  EXPECT_NEAR(r * r * r + r - 1.0, 0.0, 1e-12);
  EXPECT_NEAR(nu.b[2], r, 1e-12);
  EXPECT_NEAR(nu.b[1], 2.0, 1e-12);
  const TheoryMatrices m = build_matrices(s, nu);
  const double MD = -(r * r + 1.0), MD2 = MD * MD;
  Eigen::Matrix3d H;
  H << r * r / MD2 - 1.0 / (r * r), 0.0, -1.0 / MD2,
       0.0, -2.0 / 4.0, 0.0,
       -1.0 / MD2, 0.0, r * r / MD2 - 1.0 / (r * r);
  EXPECT_NEAR(m.MD, MD, 1e-12);
  EXPECT_LT((m.H - H).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(BuildMatrices, RejectsNonPositiveB) {
  const TheorySpec s = zero_spec();
  NuStar nu;
  nu.b = {1.0, 0.0, 1.0};
  EXPECT_THROW(build_matrices(s, nu), DegenerateB);
  nu.b = {1.0, 1.0};
  EXPECT_THROW(build_matrices(s, nu), ShapeMismatch);
}

TEST(AsymptoticRisk, DegenerateIsConstantPredictor) {
  TheorySpec s = zero_spec();
  s.F0 = 0.0;
  const TheoryRisk r = asymptotic_risk(s);
  EXPECT_NEAR(r.risk, 1.0, 1e-14);
  EXPECT_NEAR(r.bias, 1.0, 1e-14);
  EXPECT_NEAR(r.variance, 0.0, 1e-14);
  EXPECT_EQ(r.L(0, 1), 0.0);
  EXPECT_EQ(r.L(0, 3), 0.0);
  EXPECT_EQ(r.L(1, 2), 0.0);
  EXPECT_EQ(r.L(2, 3), 0.0);
}

TEST(ExplicitRiskK2, ZeroMoments) {
  const TheorySpec s = zero_spec();
  const TheoryRisk r = explicit_risk_k2(s, solve_nu(s));
  EXPECT_NEAR(r.risk, s.F1 * s.F1, 1e-14);
  EXPECT_EQ(r.L(0, 1), 0.0);
  EXPECT_EQ(r.L(0, 3), 0.0);
  EXPECT_EQ(r.L(1, 2), 0.0);
  EXPECT_EQ(r.L(2, 3), 0.0);
}

TEST(ExplicitRiskK2, ReluSigmoidMoments) {
  TheorySpec s;
  s.moments = {compute_moments({ActivationKind::relu, 1.0, 1.0, 0.0}),
               compute_moments({ActivationKind::sigmoid, 1.0, 1.0, 0.0})};
  s.psi = {0.8, 1.7};
  s.psi_n = 1.5;
  s.lambda = 1e-2;
  s.F1 = 1.0;
  s.tau = 0.5;
  const TheoryRisk a = asymptotic_risk(s);
  const TheoryRisk e = explicit_risk_k2(s, a.nu);
  EXPECT_LT(rel(a.risk, e.risk), 1e-8);
  EXPECT_LT(rel(a.bias, e.bias), 1e-8);
  EXPECT_LT(rel(a.variance, e.variance), 1e-8);
}

TEST(ExplicitRiskK2, RandomBattery) {
  std::mt19937_64 rng(21);
  for (int t = 0; t < 150; ++t) {
    const TheorySpec s = random_spec(rng, 2);
    const TheoryRisk a = asymptotic_risk(s);
    const TheoryRisk e = explicit_risk_k2(s, a.nu);
    EXPECT_LT(rel(a.risk, e.risk), 1e-8) << "spec " << t;
    for (auto [i, j] : {std::pair{0, 3}, {1, 2}, {0, 1}, {2, 3}})
      EXPECT_NEAR(a.L(i, j), e.L(i, j), 1e-8 * (1.0 + std::abs(e.L(i, j))));
  }
}

TEST(ExplicitRiskK2, IdenticalMomentsMatchMergedSingleComponent) {
  std::mt19937_64 rng(22);
  for (int t = 0; t < 30; ++t) {
    TheorySpec s = random_spec(rng, 2);
    s.moments[1] = s.moments[0];
    TheorySpec merged = s;
    merged.moments.pop_back();
    merged.psi = {s.psi[0] + s.psi[1]};
    const double two = explicit_risk_k2(s, solve_nu(s)).risk;
    EXPECT_LT(rel(two, asymptotic_risk(merged).risk), 1e-8);
  }
}

TEST(ExplicitRiskK2, WrongK) {
  TheorySpec s = zero_spec();
  s.moments.pop_back();
  s.psi.pop_back();
  EXPECT_THROW(explicit_risk_k2(s, solve_nu(s)), WrongK);
}

TEST(AsymptoticRisk, MergeInvarianceAcrossK) {
  std::mt19937_64 rng(23);
  for (int K = 2; K <= 4; ++K) {
    for (int t = 0; t < 20; ++t) {
      TheorySpec s = random_spec(rng, K);
      s.moments.back() = s.moments.front();
      TheorySpec merged = s;
      merged.moments.pop_back();
      merged.psi.pop_back();
      merged.psi.front() += s.psi.back();
      EXPECT_LT(rel(asymptotic_risk(s).risk, asymptotic_risk(merged).risk), 1e-8);
    }
  }
}

TEST(AsymptoticRisk, LIsSymmetric) {
  std::mt19937_64 rng(24);
  for (int t = 0; t < 60; ++t) {
    const TheorySpec s = random_spec(rng, 1 + t % 4);
    const Eigen::Matrix4d L = asymptotic_risk(s).L;
    EXPECT_LE((L - L.transpose()).cwiseAbs().maxCoeff(), 1e-10 * L.cwiseAbs().maxCoeff());
  }
}

TEST(AsymptoticRisk, BilinearInSignalAndNoise) {
  std::mt19937_64 rng(25);
  for (int t = 0; t < 30; ++t) {
    TheorySpec s = random_spec(rng, 1 + t % 3);
    const NuStar nu = solve_nu(s);
    TheorySpec a = s, b = s;
    a.F1 = 1.0, a.tau = 0.0;
    b.F1 = 0.0, b.tau = 1.0;
    const double A = risk_from_nu(a, nu).risk, B = risk_from_nu(b, nu).risk;
    const double full = risk_from_nu(s, nu).risk;
    EXPECT_NEAR(full, s.F1 * s.F1 * A + s.tau * s.tau * B, 1e-12 * (1.0 + std::abs(full)));
  }
}

TEST(AsymptoticRisk, ComplexCrossCheck) {
  std::mt19937_64 rng(26);
  for (int t = 0; t < 40; ++t) {
    const TheorySpec s = random_spec(rng, 1 + t % 3);
    const TheoryRisk r = asymptotic_risk(s);
    const Eigen::Matrix4cd Lc = complex_L(s, r.nu);
    const double scale = 1.0 + r.L.cwiseAbs().maxCoeff();
    EXPECT_LE(Lc.imag().cwiseAbs().maxCoeff(), 1e-10 * scale);
    EXPECT_LE((Lc.real() - r.L).cwiseAbs().maxCoeff(), 1e-8 * scale);
  }
}

TEST(AsymptoticRisk, ZeroWidthTendsToSignalEnergy) {
  TheorySpec s = elu_relu_spec(1.0, 1e-3);
  s.psi = {1e-8, 1e-8};
  EXPECT_NEAR(asymptotic_risk(s).risk, limit_risk_zero_width(s), 1e-4);
}

TEST(AsymptoticRisk, PeakAtInterpolationThresholdForSmallLambda) {
  const double at1 = asymptotic_risk(elu_relu_spec(1.0, 1e-6)).risk;
  EXPECT_GT(at1, 3.0 * asymptotic_risk(elu_relu_spec(0.8, 1e-6)).risk);
  EXPECT_GT(at1, 3.0 * asymptotic_risk(elu_relu_spec(1.2, 1e-6)).risk);
}

TEST(AsymptoticRisk, ConditionIsReported) {
  const TheoryRisk r = asymptotic_risk(elu_relu_spec(0.5, 1e-3));
  EXPECT_TRUE(std::isfinite(r.condition));
  EXPECT_GE(r.condition, 1.0);
  EXPECT_FALSE(r.ill_conditioned);
}

TEST(LimitRisk, HandInstance) {
  LimitSpec ls;
  ls.r1 = ls.r2 = 1.0;
  ls.psi3 = 2.0;
  ls.m1 = ls.m2 = make_moments(0.0, 1.0, 1.0);
  ls.F1 = 1.0;
  ls.tau = 0.0;
  EXPECT_NEAR(limit_risk_infinite_width(ls), (std::sqrt(2.0) - 1.0) / 2.0, 1e-14);
}

TEST(LimitRisk, NoSignalNoNoise) {
  LimitSpec ls;
  ls.m1 = make_moments(0.3, 0.7, 0.2);
  ls.m2 = make_moments(0.1, 0.2, 0.9);
  ls.r1 = 2.0;
  ls.psi3 = 1.7;
  ls.F1 = 0.0;
  ls.tau = 0.0;
  EXPECT_EQ(limit_risk_infinite_width(ls), 0.0);
}

TEST(LimitRisk, MatchesWideFiniteModel) {
  LimitSpec ls;
  ls.m1 = make_moments(0.3, 0.7, 0.2);
  ls.m2 = make_moments(0.1, 0.2, 0.9);
  ls.r1 = 2.0;
  ls.r2 = 1.0;
  ls.psi3 = 1.7;
  ls.F1 = 1.0;
  ls.tau = 0.4;
  TheorySpec s;
  s.moments = {ls.m1, ls.m2};
  s.psi = {2e6, 1e6};
  s.psi_n = ls.psi3;
  s.lambda = 1e-6;
  s.F1 = ls.F1;
  s.tau = ls.tau;
  EXPECT_LT(rel(asymptotic_risk(s).risk, limit_risk_infinite_width(ls)), 1e-3);
}

TEST(LimitRisk, DegenerateMoments) {
  LimitSpec ls;
  ls.m1 = ls.m2 = make_moments(0.0, 1.0, 0.0);
  EXPECT_THROW(limit_risk_infinite_width(ls), DegenerateMoments);
}

TEST(LimitRisk, ZeroWidth) {
  TheorySpec s = zero_spec();
  s.F1 = 1.0;
  EXPECT_EQ(limit_risk_zero_width(s), 1.0);
  s.F1 = 0.0;
  EXPECT_EQ(limit_risk_zero_width(s), 0.0);
}
