#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <optional>
#include <span>
#include <vector>

#include "multidescent/activation.hpp"
#include "multidescent/errors.hpp"

namespace multidescent {

/// One asymptotic problem instance. psi holds the K feature-width ratios
/// N_c/d, psi_n the sample ratio n/d.
struct TheorySpec {
  std::vector<double> psi;
  double psi_n = 1.0;
  std::vector<Moments> moments;
  double lambda = 1.0;
  double F1 = 1.0;
  double tau = 0.0;
  double F0 = 0.0;

  int K() const { return static_cast<int>(psi.size()); }
  double psi_at(int j) const { return j < K() ? psi[j] : psi_n; }
};

inline void validate(const TheorySpec& spec) {
  if (spec.psi.empty()) throw InvalidSpec("K must be >= 1");
  if (spec.moments.size() != spec.psi.size())
    throw InvalidSpec("need one moment triple per component");
  if (!(spec.lambda > 0.0) || !std::isfinite(spec.lambda))
    throw InvalidSpec("lambda must be > 0");
  for (double p : spec.psi)
    if (!(p > 0.0) || !std::isfinite(p)) throw InvalidSpec("psi entries must be > 0");
  if (!(spec.psi_n > 0.0) || !std::isfinite(spec.psi_n)) throw InvalidSpec("psi_n must be > 0");
  if (spec.F1 < 0.0 || spec.tau < 0.0) throw InvalidSpec("F1 and tau must be >= 0");
}

/// Imaginary parts of the solution at xi = sqrt(lambda) i, i.e. nu_j = i b_j.
struct NuStar {
  std::vector<double> b;  // K + 1 entries, the last one is the sample block
  double residual = 0.0;
  long iterations = 0;
  std::vector<double> lambda_path;
};

struct SolverConfig {
  double tol = 1e-12;
  long max_iter = 100000;
  double damping = 0.5;
  std::optional<double> continuation_start;  // defaults to max(lambda, 1)
  double continuation_factor = 0.5;
};

inline void validate(const SolverConfig& cfg) {
  if (!(cfg.tol > 0.0)) throw InvalidSpec("solver tol must be > 0");
  if (!(cfg.damping > 0.0 && cfg.damping <= 1.0))
    throw InvalidSpec("solver damping must lie in (0, 1]");
  if (!(cfg.continuation_factor > 0.0 && cfg.continuation_factor < 1.0))
    throw InvalidSpec("continuation_factor must lie in (0, 1)");
  if (cfg.max_iter < 1) throw InvalidSpec("max_iter must be >= 1");
  if (cfg.continuation_start && !(*cfg.continuation_start > 0.0))
    throw InvalidSpec("continuation_start must be > 0");
}

namespace detail {

// Shared pieces of the real-form system at a given b.
struct NuTerms {
  double T = 0.0;         // sum_s mu_{s,1}^2 b_s b_{K+1}
  double sum_lin = 0.0;   // sum_s mu_{s,1}^2 b_s
  double sum_nl = 0.0;    // sum_s mu_{s,2}^2 b_s
};

inline NuTerms nu_terms(const TheorySpec& spec, std::span<const double> b) {
  const int K = spec.K();
  NuTerms t;
  for (int c = 0; c < K; ++c) {
    t.sum_lin += spec.moments[c].mu1_sq() * b[c];
    t.sum_nl += spec.moments[c].mu2_sq * b[c];
  }
  t.T = t.sum_lin * b[K];
  return t;
}

// Fixed-point map: each b_j = psi_j / (positive bracket).
inline void nu_map(const TheorySpec& spec, double sqrt_lambda, std::span<const double> b,
                   std::span<double> out) {
  const int K = spec.K();
  const NuTerms t = nu_terms(spec, b);
  const double inv = 1.0 / (1.0 + t.T);
  const double bn = b[K];
  for (int c = 0; c < K; ++c) {
    const auto& m = spec.moments[c];
    out[c] = spec.psi[c] / (sqrt_lambda + m.mu2_sq * bn + m.mu1_sq() * bn * inv);
  }
  out[K] = spec.psi_n / (sqrt_lambda + t.sum_nl + t.sum_lin * inv);
}

inline std::vector<double> residual_at(const TheorySpec& spec, double sqrt_lambda,
                                       std::span<const double> b) {
  const int K = spec.K();
  const NuTerms t = nu_terms(spec, b);
  const double inv = 1.0 / (1.0 + t.T);
  const double bn = b[K];
  std::vector<double> r(K + 1);
  for (int c = 0; c < K; ++c) {
    const auto& m = spec.moments[c];
    r[c] = sqrt_lambda * b[c] + m.mu2_sq * b[c] * bn + m.mu1_sq() * b[c] * bn * inv - spec.psi[c];
  }
  r[K] = sqrt_lambda * bn + t.sum_nl * bn + t.sum_lin * bn * inv - spec.psi_n;
  return r;
}

inline double max_relative(const TheorySpec& spec, std::span<const double> r) {
  double worst = 0.0;
  for (int j = 0; j <= spec.K(); ++j) worst = std::max(worst, std::abs(r[j]) / spec.psi_at(j));
  return worst;
}

// Jacobian of residual_at with respect to b.
inline Eigen::MatrixXd jacobian_at(const TheorySpec& spec, double sqrt_lambda, std::span<const double> b) {
  const int K = spec.K();
  const NuTerms t = nu_terms(spec, b);
  const double inv = 1.0 / (1.0 + t.T);
  const double inv2 = inv * inv;
  const double bn = b[K];
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(K + 1, K + 1);
  for (int c = 0; c < K; ++c) {
    const double a = spec.moments[c].mu1_sq(), m = spec.moments[c].mu2_sq;
    for (int k = 0; k < K; ++k) J(c, k) = -a * b[c] * bn * bn * inv2 * spec.moments[k].mu1_sq();
    J(c, c) += sqrt_lambda + m * bn + a * bn * inv;
    J(c, K) = m * b[c] + a * b[c] * inv - a * b[c] * bn * inv2 * t.sum_lin;
  }
  for (int k = 0; k < K; ++k) {
    const double a = spec.moments[k].mu1_sq();
    J(K, k) = spec.moments[k].mu2_sq * bn + a * bn * inv - t.sum_lin * bn * bn * inv2 * a;
  }
  J(K, K) = sqrt_lambda + t.sum_nl + t.sum_lin * inv - t.sum_lin * t.sum_lin * bn * inv2;
  return J;
}

// Newton refinement of an already converged b. A step is kept only while it
// lowers the residual and leaves b positive.
inline void newton_polish(const TheorySpec& spec, double sqrt_lambda, std::vector<double>& b, double& residual) {
  const int n = spec.K() + 1;
  for (int step = 0; step < 8; ++step) {
    const std::vector<double> r = residual_at(spec, sqrt_lambda, b);
    const Eigen::VectorXd dx =
        jacobian_at(spec, sqrt_lambda, b).partialPivLu().solve(-Eigen::Map<const Eigen::VectorXd>(r.data(), n));
    if (!dx.allFinite()) return;
    std::vector<double> trial(b);
    for (int i = 0; i < n; ++i) {
      trial[i] += dx(i);
      if (!(trial[i] > 0.0)) return;
    }
    const double next = max_relative(spec, residual_at(spec, sqrt_lambda, trial));
    if (!(next < residual)) return;
    b = std::move(trial);
    residual = next;
  }
}

}  // namespace detail

/// Residuals of the real-variable system at xi = sqrt(lambda) i.
inline std::vector<double> residual_vector(const TheorySpec& spec, std::span<const double> b) {
  if (static_cast<int>(b.size()) != spec.K() + 1)
    throw ShapeMismatch("b must have K + 1 entries");
  for (double v : b)
    if (!(v > 0.0)) throw NonPositiveInput("all b_j must be > 0");
  return detail::residual_at(spec, std::sqrt(spec.lambda), b);
}

/// Damped fixed-point iteration at a single lambda, starting from b (updated
/// in place). Returns the iteration count; throws NoConvergence.
inline long solve_at_lambda(const TheorySpec& spec, double lambda, const SolverConfig& cfg,
                            std::vector<double>& b, double& residual) {
  const double sl = std::sqrt(lambda);
  TheorySpec at = spec;
  at.lambda = lambda;
  std::vector<double> g(b.size());
  for (long it = 0; it < cfg.max_iter; ++it) {
    residual = detail::max_relative(at, detail::residual_at(at, sl, b));
    if (residual <= cfg.tol) return it;
    detail::nu_map(at, sl, b, g);
    for (std::size_t j = 0; j < b.size(); ++j)
      b[j] = (1.0 - cfg.damping) * b[j] + cfg.damping * g[j];
  }
  residual = detail::max_relative(at, detail::residual_at(at, sl, b));
  if (residual <= cfg.tol) return cfg.max_iter;
  throw NoConvergence(residual, cfg.max_iter, lambda);
}

/// Solves the system at the target lambda. Without a warm start, iterates
/// from b_j = psi_j / sqrt(lambda_0) at lambda_0 = continuation_start and
/// walks lambda down geometrically, warm-starting each stage.
inline NuStar solve_nu(const TheorySpec& spec, const SolverConfig& cfg = {},
                       const std::vector<double>* warm_start = nullptr) {
  validate(spec);
  validate(cfg);
  const int K = spec.K();
  NuStar out;
  out.b.resize(K + 1);

  if (warm_start) {
    if (static_cast<int>(warm_start->size()) != K + 1)
      throw ShapeMismatch("warm start must have K + 1 entries");
    out.b = *warm_start;
    out.lambda_path = {spec.lambda};
    out.iterations = solve_at_lambda(spec, spec.lambda, cfg, out.b, out.residual);
    detail::newton_polish(spec, std::sqrt(spec.lambda), out.b, out.residual);
    return out;
  }

  double lam = std::max(cfg.continuation_start.value_or(std::max(spec.lambda, 1.0)),
                        spec.lambda);
  for (int j = 0; j <= K; ++j) out.b[j] = spec.psi_at(j) / std::sqrt(lam);
  while (true) {
    out.lambda_path.push_back(lam);
    out.iterations += solve_at_lambda(spec, lam, cfg, out.b, out.residual);
    if (lam == spec.lambda) break;
    lam = std::max(lam * cfg.continuation_factor, spec.lambda);
  }
  detail::newton_polish(spec, std::sqrt(spec.lambda), out.b, out.residual);
  return out;
}

/// Substitutes nu_j = i b_j and xi = sqrt(lambda) i into the complex system
/// and returns the largest absolute residual.
inline double verify_complex(const TheorySpec& spec, const NuStar& nu) {
  using cd = std::complex<double>;
  const int K = spec.K();
  const cd I(0.0, 1.0);
  const cd xi = std::sqrt(spec.lambda) * I;
  std::vector<cd> v(K + 1);
  for (int j = 0; j <= K; ++j) v[j] = I * nu.b[j];

  cd denom = 1.0;
  cd sum_lin = 0.0, sum_nl = 0.0;
  for (int c = 0; c < K; ++c) {
    denom -= spec.moments[c].mu1_sq() * v[c] * v[K];
    sum_lin += spec.moments[c].mu1_sq() * v[c];
    sum_nl += spec.moments[c].mu2_sq * v[c];
  }
  double worst = 0.0;
  for (int c = 0; c < K; ++c) {
    const auto& m = spec.moments[c];
    const cd lhs = v[c] * (-xi - m.mu2_sq * v[K] - m.mu1_sq() * v[K] / denom);
    worst = std::max(worst, std::abs(lhs - spec.psi[c]));
  }
  const cd lhs = v[K] * (-xi - sum_nl - sum_lin / denom);
  return std::max(worst, std::abs(lhs - spec.psi_n));
}

}  // namespace multidescent
