#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <limits>
#include <vector>

#include "multidescent/errors.hpp"
#include "multidescent/nu_system.hpp"

namespace multidescent {

/// Auxiliary matrices at nu* = i b, written in real arithmetic:
/// M_N = i * mN and M_D = -(b_{K+1} mN + 1).
struct TheoryMatrices {
  double mN = 0.0;
  double MD = -1.0;
  Eigen::MatrixXd H;  // (K+1) x (K+1), symmetric
  Eigen::MatrixXd V;  // (K+1) x 4
};

struct TheoryRisk {
  double risk = 0.0;
  double bias = 0.0;
  double variance = 0.0;
  Eigen::Matrix4d L = Eigen::Matrix4d::Zero();
  NuStar nu;
  double condition = 1.0;  // of H; NaN on the closed-form path
  bool ill_conditioned = false;
};

inline constexpr double kIllConditionedThreshold = 1e12;

inline TheoryMatrices build_matrices(const TheorySpec& spec, const NuStar& nu) {
  const int K = spec.K();
  if (static_cast<int>(nu.b.size()) != K + 1) throw ShapeMismatch("b must have K + 1 entries");
  for (double v : nu.b)
    if (!(v > 0.0)) throw DegenerateB("b_j must be strictly positive");

  const double bn = nu.b[K];
  TheoryMatrices m;
  for (int c = 0; c < K; ++c) m.mN += spec.moments[c].mu1_sq() * nu.b[c];
  m.MD = -(bn * m.mN + 1.0);
  const double MD2 = m.MD * m.MD;

  m.H.setZero(K + 1, K + 1);
  for (int i = 0; i < K; ++i) {
    const double ai = spec.moments[i].mu1_sq();
    for (int j = i; j < K; ++j) {
      const double v = bn * bn * ai * spec.moments[j].mu1_sq() / MD2;
      m.H(i, j) = v;
      m.H(j, i) = v;
    }
    m.H(i, i) -= spec.psi[i] / (nu.b[i] * nu.b[i]);
    const double edge = -ai / MD2 - spec.moments[i].mu2_sq;
    m.H(i, K) = edge;
    m.H(K, i) = edge;
  }
  m.H(K, K) = m.mN * m.mN / MD2 - spec.psi_n / (bn * bn);

  m.V.setZero(K + 1, 4);
  for (int c = 0; c < K; ++c) {
    const double a = spec.moments[c].mu1_sq();
    m.V(c, 0) = spec.moments[c].mu2_sq;
    m.V(c, 2) = a / MD2;
    m.V(c, 3) = -bn * bn * a / MD2;
  }
  m.V(K, 1) = 1.0;
  m.V(K, 2) = -m.mN * m.mN / MD2;
  m.V(K, 3) = 1.0 / MD2;
  return m;
}

namespace detail {

inline void fill_risk(const TheorySpec& spec, double MD, TheoryRisk& out) {
  const auto& L = out.L;
  // L is 0-indexed here: L(2,3) is the (3,4) entry.
  out.bias = spec.F1 * spec.F1 * (1.0 / (MD * MD) + L(2, 3) + L(0, 3));
  out.variance = spec.tau * spec.tau * (L(1, 2) + L(0, 1));
  out.risk = out.bias + out.variance;
}

}  // namespace detail

/// L = V^T H^{-1} V by LU with partial pivoting on the symmetrically
/// equilibrated S H S, S = diag(|H_ii|^{-1/2}). The entries of b span many
/// orders of magnitude at large psi, so the reported condition number (the
/// LU 1-norm estimate) is that of the equilibrated matrix.
inline Eigen::Matrix4d solve_L(const TheoryMatrices& m, double* condition = nullptr) {
  Eigen::VectorXd scale = m.H.diagonal().cwiseAbs();
  for (Eigen::Index i = 0; i < scale.size(); ++i) scale(i) = scale(i) > 0.0 ? 1.0 / std::sqrt(scale(i)) : 1.0;
  const Eigen::MatrixXd Hs = scale.asDiagonal() * m.H * scale.asDiagonal();
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(Hs);
  const double rcond = lu.rcond();
  if (!(rcond > 0.0)) throw SolveFailure("H is singular");
  if (condition) *condition = 1.0 / rcond;
  const Eigen::MatrixXd W = scale.asDiagonal() * m.V;
  const Eigen::MatrixXd X = lu.solve(W);
  if (!X.allFinite()) throw SolveFailure("H is singular");
  return W.transpose() * X;
}

inline TheoryRisk risk_from_nu(const TheorySpec& spec, const NuStar& nu) {
  TheoryRisk out;
  out.nu = nu;
  const TheoryMatrices m = build_matrices(spec, nu);
  out.L = solve_L(m, &out.condition);
  out.ill_conditioned = out.condition > kIllConditionedThreshold;
  detail::fill_risk(spec, m.MD, out);
  return out;
}

/// Asymptotic excess risk F1^2 (1/M_D^2 + L34 + L14) + tau^2 (L23 + L12).
inline TheoryRisk asymptotic_risk(const TheorySpec& spec, const SolverConfig& cfg = {}) {
  return risk_from_nu(spec, solve_nu(spec, cfg));
}

/// Closed-form K = 2 route to the four L entries, used as an independent
/// check of the matrix route. All nu*^2 become -b^2 and M_N^2 becomes -mN^2.
inline TheoryRisk explicit_risk_k2(const TheorySpec& spec, const NuStar& nu) {
  if (spec.K() != 2) throw WrongK("closed-form risk needs exactly two components");
  const double p1 = spec.psi[0], p2 = spec.psi[1], p3 = spec.psi_n;
  const double a1 = spec.moments[0].mu1_sq(), a2 = spec.moments[1].mu1_sq();
  const double c1 = spec.moments[0].mu2_sq, c2 = spec.moments[1].mu2_sq;
  const double n1 = -nu.b[0] * nu.b[0];
  const double n2 = -nu.b[1] * nu.b[1];
  const double n3 = -nu.b[2] * nu.b[2];
  const double mN = a1 * nu.b[0] + a2 * nu.b[1];
  const double MN2 = -mN * mN;
  const double MD = -(nu.b[2] * mN + 1.0);
  const double D2 = MD * MD;
  const double D4 = D2 * D2;
  const double cross = (c1 * a2 - a1 * c2) * (c1 * a2 - a1 * c2);

  const double S = n3 * n3 * (n2 * MN2 * a2 * a2 * p1 + n1 * MN2 * a1 * a1 * p2 + n1 * n2 * D2 * cross) -
                   n3 * n2 * p1 * (2.0 * D2 * a2 * c2 + D4 * c2 * c2 + a2 * a2 * (1.0 + D2 * p3)) -
                   n3 * n1 * p2 * (2.0 * D2 * a1 * c1 + D4 * c1 * c1 + a1 * a1 * (1.0 + D2 * p3)) -
                   n3 * p1 * p2 * D2 * MN2 + D4 * p1 * p2 * p3;
  if (std::abs(S) < 1e-300) throw DegenerateS("closed-form denominator S vanishes");

  const double L14 =
      n3 / S *
      (-n3 * MN2 * (n2 * a2 * c2 * p1 + n1 * a1 * c1 * p2) + n1 * c1 * p2 * (D2 * c1 + a1 * (1.0 + D2 * p3)) +
       n2 * c2 * p1 * (D2 * c2 + a2 * (1.0 + D2 * p3)));
  const double L23 = n3 / S *
                     (n2 * a2 * (a2 + D2 * c2) * p1 + n1 * a1 * (a1 + D2 * c1) * p2 -
                      n3 * MN2 * (n2 * a2 * a2 * p1 + n1 * a1 * a1 * p2) + D2 * MN2 * p1 * p2);
  const double L12 = n3 / S * D2 *
                     (n2 * c2 * (a2 + D2 * c2) * p1 + n1 * c1 * (a1 + D2 * c1) * p2 - n1 * n2 * n3 * cross);
  const double L34 =
      n3 / (S * D2) *
      (n3 * (n2 * MN2 * a2 * (D2 * c2 - a2) * p1 + n1 * MN2 * a1 * (D2 * c1 - a1) * p2) + p1 * p2 * D2 * MN2 -
       n1 * n2 * n3 * D2 * cross + n2 * a2 * p1 * (D2 * c2 + a2 + D2 * a2 * p3) +
       n1 * a1 * p2 * (D2 * c1 + a1 + D2 * a1 * p3));

  TheoryRisk out;
  out.nu = nu;
  out.condition = std::numeric_limits<double>::quiet_NaN();
  out.L(0, 3) = out.L(3, 0) = L14;
  out.L(1, 2) = out.L(2, 1) = L23;
  out.L(0, 1) = out.L(1, 0) = L12;
  out.L(2, 3) = out.L(3, 2) = L34;
  detail::fill_risk(spec, MD, out);
  return out;
}

/// H, V and L rebuilt in complex arithmetic straight from the nu* = i b
/// definitions, without the real sign substitutions. Cross-check only.
inline Eigen::Matrix4cd complex_L(const TheorySpec& spec, const NuStar& nu) {
  using cd = std::complex<double>;
  const int K = spec.K();
  const cd I(0.0, 1.0);
  std::vector<cd> v(K + 1);
  for (int j = 0; j <= K; ++j) v[j] = I * nu.b[j];
  cd MN = 0.0;
  for (int c = 0; c < K; ++c) MN += spec.moments[c].mu1_sq() * v[c];
  const cd MD = v[K] * MN - 1.0;
  const cd MD2 = MD * MD;

  Eigen::MatrixXcd H(K + 1, K + 1), V(K + 1, 4);
  H.setZero();
  V.setZero();
  for (int i = 0; i < K; ++i) {
    const double ai = spec.moments[i].mu1_sq();
    for (int j = 0; j < K; ++j) H(i, j) = -v[K] * v[K] * ai * spec.moments[j].mu1_sq() / MD2;
    H(i, i) += spec.psi[i] / (v[i] * v[i]);
    H(i, K) = H(K, i) = -ai / MD2 - spec.moments[i].mu2_sq;
    V(i, 0) = spec.moments[i].mu2_sq;
    V(i, 2) = ai / MD2;
    V(i, 3) = v[K] * v[K] * ai / MD2;
  }
  H(K, K) = -MN * MN / MD2 + spec.psi_n / (v[K] * v[K]);
  V(K, 1) = 1.0;
  V(K, 2) = MN * MN / MD2;
  V(K, 3) = 1.0 / MD2;
  return V.transpose() * H.fullPivLu().solve(V);
}

/// Width ratios of the infinite-width limit for two components.
struct LimitSpec {
  double r1 = 1.0;
  double r2 = 1.0;
  double psi3 = 1.0;
  Moments m1;
  Moments m2;
  double F1 = 1.0;
  double tau = 0.0;
};

/// Limit of the K = 2 risk as psi_1, psi_2 -> infinity with psi_1/r1 = psi_2/r2.
inline double limit_risk_infinite_width(const LimitSpec& ls) {
  const double r[2] = {ls.r1, ls.r2};
  const double lin[2] = {ls.m1.mu1_sq(), ls.m2.mu1_sq()};
  const double nl[2] = {ls.m1.mu2_sq, ls.m2.mu2_sq};
  double cross = 0.0, sum_lin = 0.0, sum_nl = 0.0;
  for (int i = 0; i < 2; ++i) {
    sum_lin += r[i] * lin[i];
    sum_nl += r[i] * nl[i];
    for (int j = 0; j < 2; ++j) cross += r[i] * r[j] * lin[i] * nl[j];
  }
  if (!(cross > 0.0))
    throw DegenerateMoments("infinite-width limit needs sum_ij r_i r_j mu_{i,1}^2 mu_{j,2}^2 > 0");
  const double lead = (ls.psi3 - 1.0) * sum_lin - sum_nl;
  const double chi1 = lead + std::sqrt(lead * lead + 4.0 * ls.psi3 * cross);
  const double chi0 = sum_lin * chi1 / (2.0 * cross);
  return (ls.F1 * ls.F1 * ls.psi3 + ls.tau * ls.tau * chi0 * chi0) /
         ((chi0 + 1.0) * (chi0 + 1.0) * ls.psi3 - chi0 * chi0);
}

/// Limit as every width ratio goes to zero: the constant predictor's risk.
inline double limit_risk_zero_width(const TheorySpec& spec) { return spec.F1 * spec.F1; }

}  // namespace multidescent
