#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "multidescent/errors.hpp"

namespace multidescent {

enum class ActivationKind { relu, step, elu, sigmoid, tanh, sin, cos, identity, constant };

inline constexpr std::array<std::pair<ActivationKind, std::string_view>, 9> kActivationNames{{
    {ActivationKind::relu, "relu"},
    {ActivationKind::step, "step"},
    {ActivationKind::elu, "elu"},
    {ActivationKind::sigmoid, "sigmoid"},
    {ActivationKind::tanh, "tanh"},
    {ActivationKind::sin, "sin"},
    {ActivationKind::cos, "cos"},
    {ActivationKind::identity, "identity"},
    {ActivationKind::constant, "constant"},
}};

inline std::string_view to_string(ActivationKind kind) {
  for (const auto& [k, name] : kActivationNames)
    if (k == kind) return name;
  return "unknown";
}

inline std::optional<ActivationKind> parse_activation_kind(std::string_view name) {
  for (const auto& [k, name_k] : kActivationNames)
    if (name_k == name) return k;
  return std::nullopt;
}

/// x -> out_scale * base(in_scale * x) + shift.
struct ActivationSpec {
  ActivationKind kind = ActivationKind::relu;
  double in_scale = 1.0;
  double out_scale = 1.0;
  double shift = 0.0;
};

/// Gaussian moments of one activation: E s(G), E G s(G), and the residual
/// nonlinear variance E s(G)^2 - mu0^2 - mu1^2 (clamped at zero).
struct Moments {
  double mu0 = 0.0;
  double mu1 = 0.0;
  double mu2_sq = 0.0;
  double mu2_sq_raw = 0.0;  // before clamping

  double mu1_sq() const { return mu1 * mu1; }
};

inline Moments make_moments(double mu0, double mu1, double mu2_sq) {
  return {mu0, mu1, std::max(mu2_sq, 0.0), mu2_sq};
}

struct QuadratureConfig {
  int panel_count = 24;
  double truncation = 12.0;
  int nodes_per_panel = 64;
};

inline void validate(const QuadratureConfig& q) {
  if (q.panel_count < 1 || q.nodes_per_panel < 1)
    throw InvalidSpec("quadrature counts must be >= 1");
  if (!(q.truncation >= 8.0)) throw InvalidSpec("quadrature truncation must be >= 8");
}

namespace detail {

inline double base_activation(ActivationKind kind, double u) {
  switch (kind) {
    case ActivationKind::relu: return u > 0.0 ? u : 0.0;
    case ActivationKind::step: return u > 0.0 ? 1.0 : 0.0;
    case ActivationKind::elu: return u >= 0.0 ? u : std::expm1(u);
    case ActivationKind::sigmoid: return 1.0 / (1.0 + std::exp(-u));
    case ActivationKind::tanh: return std::tanh(u);
    case ActivationKind::sin: return std::sin(u);
    case ActivationKind::cos: return std::cos(u);
    case ActivationKind::identity: return u;
    case ActivationKind::constant: return 1.0;
  }
  return 0.0;
}

inline bool has_kink_at_zero(ActivationKind kind) {
  return kind == ActivationKind::relu || kind == ActivationKind::step ||
         kind == ActivationKind::elu;
}

struct GaussLegendreRule {
  std::vector<double> nodes;    // on [-1, 1]
  std::vector<double> weights;
};

// Newton iteration on P_n from the Chebyshev initial guesses.
inline GaussLegendreRule gauss_legendre(int n) {
  GaussLegendreRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = 0.0;
      for (int k = 1; k <= n; ++k) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
      }
      dp = n * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    // Recompute the derivative at the converged node.
    double p0 = 1.0, p1 = 0.0;
    for (int k = 1; k <= n; ++k) {
      const double p2 = p1;
      p1 = p0;
      p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
    }
    dp = n * (z * p0 - p1) / (z * z - 1.0);
    const double w = 2.0 / ((1.0 - z * z) * dp * dp);
    rule.nodes[i] = -z;
    rule.nodes[n - 1 - i] = z;
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  return rule;
}

struct RawMoments {
  double e_sigma = 0.0;
  double e_g_sigma = 0.0;
  double e_sigma_sq = 0.0;
};

RawMoments integrate_moments(const ActivationSpec& act, const QuadratureConfig& quad);

}  // namespace detail

inline double eval_activation(const ActivationSpec& act, double x) {
  return act.out_scale * detail::base_activation(act.kind, act.in_scale * x) + act.shift;
}

inline detail::RawMoments detail::integrate_moments(const ActivationSpec& act,
                                                    const QuadratureConfig& quad) {
  const double T = quad.truncation;
  std::vector<double> breaks{-T};
  if (detail::has_kink_at_zero(act.kind) && act.in_scale != 0.0) breaks.push_back(0.0);
  breaks.push_back(T);

  const auto rule = gauss_legendre(quad.nodes_per_panel);
  const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  RawMoments acc;
  for (std::size_t s = 0; s + 1 < breaks.size(); ++s) {
    const double a = breaks[s], b = breaks[s + 1];
    const int panels = std::max(
        1, static_cast<int>(std::lround(quad.panel_count * (b - a) / (2.0 * T))));
    const double h = (b - a) / panels;
    for (int p = 0; p < panels; ++p) {
      const double lo = a + p * h;
      const double mid = lo + 0.5 * h;
      for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
        const double x = mid + 0.5 * h * rule.nodes[k];
        const double w = 0.5 * h * rule.weights[k] * inv_sqrt_2pi * std::exp(-0.5 * x * x);
        const double s_val = eval_activation(act, x);
        acc.e_sigma += w * s_val;
        acc.e_g_sigma += w * x * s_val;
        acc.e_sigma_sq += w * s_val * s_val;
      }
    }
  }
  return acc;
}

inline Moments moments_from_raw(const detail::RawMoments& raw) {
  const double mu0 = raw.e_sigma;
  const double mu1 = raw.e_g_sigma;
  return make_moments(mu0, mu1, raw.e_sigma_sq - mu0 * mu0 - mu1 * mu1);
}

/// Gaussian moments by composite Gauss-Legendre panels on [-T, T], with a
/// panel boundary at every kink. Throws QuadratureDiverged when doubling the
/// nodes per panel moves any moment by more than 1e-8.
inline Moments compute_moments(const ActivationSpec& act, const QuadratureConfig& quad = {}) {
  validate(quad);
  QuadratureConfig fine = quad;
  fine.nodes_per_panel = 2 * quad.nodes_per_panel;
  const Moments coarse_m = moments_from_raw(detail::integrate_moments(act, quad));
  const Moments fine_m = moments_from_raw(detail::integrate_moments(act, fine));
  const double change = std::max({std::abs(coarse_m.mu0 - fine_m.mu0),
                                   std::abs(coarse_m.mu1 - fine_m.mu1),
                                   std::abs(coarse_m.mu2_sq_raw - fine_m.mu2_sq_raw)});
  if (!(change <= 1e-8))
    throw QuadratureDiverged("moments of " + std::string(to_string(act.kind)) +
                             " changed by " + std::to_string(change) +
                             " when doubling nodes per panel");
  return fine_m;
}

/// Moments of x -> a * sigma(x).
inline Moments scaled_moments(const Moments& m, double a) {
  return {a * m.mu0, a * m.mu1, a * a * m.mu2_sq, a * a * m.mu2_sq_raw};
}

}  // namespace multidescent
