#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "multidescent/activation.hpp"
#include "multidescent/errors.hpp"
#include "multidescent/parallel.hpp"

namespace multidescent {

using Rng = std::mt19937_64;

struct EmpiricalConfig {
  int d = 100;
  int n = 300;
  std::vector<int> N;  // features per activation block
  std::vector<ActivationSpec> activations;
  double lambda = 1e-3;
  double F0 = 0.0;
  double F1 = 1.0;
  double tau = 0.0;
  int n_test = 700;
  int replications = 30;
  std::uint64_t base_seed = 0;

  int total_features() const { return std::accumulate(N.begin(), N.end(), 0); }
};

inline void validate(const EmpiricalConfig& cfg) {
  if (cfg.d < 1 || cfg.n < 1 || cfg.n_test < 1 || cfg.replications < 1)
    throw InvalidSpec("d, n, n_test and replications must be >= 1");
  if (cfg.N.empty() || cfg.N.size() != cfg.activations.size())
    throw InvalidSpec("need one feature count per activation");
  for (int count : cfg.N)
    if (count < 1) throw InvalidSpec("feature counts must be >= 1");
  if (!(cfg.lambda > 0.0)) throw InvalidSpec("lambda must be > 0");
  if (cfg.tau < 0.0) throw InvalidSpec("tau must be >= 0");
}

struct Dataset {
  Eigen::MatrixXd X;  // n x d, rows on the sqrt(d)-sphere
  Eigen::VectorXd y;
  Eigen::VectorXd beta1;
};

struct EmpiricalRisk {
  std::vector<double> per_replication;
  double mean = 0.0;
  double std_error = 0.0;
};

/// splitmix64 finalizer applied to (base_seed, index).
inline std::uint64_t mix_seed(std::uint64_t base_seed, std::uint64_t index) {
  std::uint64_t z = base_seed + 0x9E3779B97F4A7C15ull * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Uniform draw from the sphere of radius sqrt(d) in R^d.
inline Eigen::VectorXd sample_sphere(int d, Rng& rng) {
  if (d < 1) throw InvalidSpec("dimension must be >= 1");
  std::normal_distribution<double> normal;
  Eigen::VectorXd v(d);
  double norm = 0.0;
  while (!(norm > 0.0)) {
    for (int i = 0; i < d; ++i) v[i] = normal(rng);
    norm = v.norm();
  }
  return (v / norm) * std::sqrt(static_cast<double>(d));
}

inline Eigen::MatrixXd sample_sphere_rows(int rows, int d, Rng& rng) {
  Eigen::MatrixXd out(rows, d);
  for (int r = 0; r < rows; ++r) out.row(r) = sample_sphere(d, rng).transpose();
  return out;
}

inline Dataset generate_dataset(const EmpiricalConfig& cfg, Rng& rng) {
  Dataset ds;
  ds.beta1 = sample_sphere(cfg.d, rng) * (cfg.F1 / std::sqrt(static_cast<double>(cfg.d)));
  ds.X = sample_sphere_rows(cfg.n, cfg.d, rng);
  std::normal_distribution<double> noise(0.0, 1.0);
  ds.y = ds.X * ds.beta1;
  for (int i = 0; i < cfg.n; ++i) ds.y[i] += cfg.F0 + cfg.tau * noise(rng);
  return ds;
}

/// Z(j, i) = sigma_{c(i)}(<theta_i, x_j> / sqrt(d)) / sqrt(d), where the
/// columns are split into consecutive activation blocks of size counts[c].
inline Eigen::MatrixXd feature_matrix(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Theta,
                                      std::span<const ActivationSpec> acts,
                                      std::span<const int> counts) {
  if (X.cols() != Theta.cols()) throw ShapeMismatch("X and Theta disagree on d");
  if (acts.size() != counts.size()) throw ShapeMismatch("one count per activation");
  if (std::accumulate(counts.begin(), counts.end(), 0) != Theta.rows())
    throw ShapeMismatch("block counts must sum to the number of features");
  const double sqrt_d = std::sqrt(static_cast<double>(X.cols()));
  Eigen::MatrixXd Z = (X * Theta.transpose()) / sqrt_d;
  Eigen::Index col = 0;
  for (std::size_t c = 0; c < acts.size(); ++c) {
    auto block = Z.middleCols(col, counts[c]);
    block = block.unaryExpr([&](double u) { return eval_activation(acts[c], u) / sqrt_d; });
    col += counts[c];
  }
  return Z;
}

inline Eigen::VectorXd ridge_fit_primal(const Eigen::MatrixXd& Z, const Eigen::VectorXd& y,
                                        double lambda, int d) {
  Eigen::MatrixXd G = Z.transpose() * Z;
  G.diagonal().array() += lambda;
  Eigen::LLT<Eigen::MatrixXd> llt(G);
  if (llt.info() != Eigen::Success) throw SolveFailure("Cholesky of Z^T Z + lambda I failed");
  return llt.solve(Z.transpose() * y) / std::sqrt(static_cast<double>(d));
}

inline Eigen::VectorXd ridge_fit_dual(const Eigen::MatrixXd& Z, const Eigen::VectorXd& y,
                                      double lambda, int d) {
  Eigen::MatrixXd G = Z * Z.transpose();
  G.diagonal().array() += lambda;
  Eigen::LLT<Eigen::MatrixXd> llt(G);
  if (llt.info() != Eigen::Success) throw SolveFailure("Cholesky of Z Z^T + lambda I failed");
  return Z.transpose() * llt.solve(y) / std::sqrt(static_cast<double>(d));
}

/// a = (Z^T Z + lambda I)^{-1} Z^T y / sqrt(d), through the smaller Gram matrix.
inline Eigen::VectorXd ridge_fit(const Eigen::MatrixXd& Z, const Eigen::VectorXd& y, double lambda,
                                 int d) {
  if (!(lambda > 0.0)) throw InvalidSpec("lambda must be > 0");
  if (Z.rows() != y.size()) throw ShapeMismatch("Z and y disagree on n");
  if (!Z.allFinite() || !y.allFinite()) throw SolveFailure("non-finite ridge inputs");
  return Z.cols() > Z.rows() ? ridge_fit_dual(Z, y, lambda, d) : ridge_fit_primal(Z, y, lambda, d);
}

/// Mean of (F0 + x^T beta1 - f(x))^2 over the rows of Xtest, where
/// f(x) = sum_i a_i sigma_{c(i)}(<theta_i, x> / sqrt(d)).
inline double excess_risk_on(const Eigen::VectorXd& ahat, const Eigen::MatrixXd& Theta,
                             std::span<const ActivationSpec> acts, std::span<const int> counts,
                             const Eigen::VectorXd& beta1, double F0, const Eigen::MatrixXd& Xtest) {
  const double sqrt_d = std::sqrt(static_cast<double>(Xtest.cols()));
  const Eigen::VectorXd f = sqrt_d * (feature_matrix(Xtest, Theta, acts, counts) * ahat);
  const Eigen::VectorXd err = (Xtest * beta1).array() + F0 - f.array();
  return err.squaredNorm() / static_cast<double>(Xtest.rows());
}

inline double excess_risk_estimate(const Eigen::VectorXd& ahat, const Eigen::MatrixXd& Theta,
                                   std::span<const ActivationSpec> acts, std::span<const int> counts,
                                   const Eigen::VectorXd& beta1, double F0, int n_test, Rng& rng) {
  const Eigen::MatrixXd Xtest = sample_sphere_rows(n_test, static_cast<int>(Theta.cols()), rng);
  return excess_risk_on(ahat, Theta, acts, counts, beta1, F0, Xtest);
}

/// One full replication: fresh beta1, training set, features and test set.
inline double run_replication(const EmpiricalConfig& cfg, int index) {
  Rng rng(mix_seed(cfg.base_seed, static_cast<std::uint64_t>(index)));
  const Dataset ds = generate_dataset(cfg, rng);
  const Eigen::MatrixXd Theta = sample_sphere_rows(cfg.total_features(), cfg.d, rng);
  const Eigen::MatrixXd Z = feature_matrix(ds.X, Theta, cfg.activations, cfg.N);
  Eigen::VectorXd ahat;
  try {
    ahat = ridge_fit(Z, ds.y, cfg.lambda, cfg.d);
  } catch (const SolveFailure& e) {
    throw SolveFailure("replication " + std::to_string(index) + ": " + e.what());
  }
  return excess_risk_estimate(ahat, Theta, cfg.activations, cfg.N, ds.beta1, cfg.F0, cfg.n_test,
                              rng);
}

/// Replicated excess-risk estimate. Each replication owns its generator, so
/// the result does not depend on the worker count.
inline EmpiricalRisk run_experiment(const EmpiricalConfig& cfg, int workers = default_worker_count()) {
  validate(cfg);
  EmpiricalRisk out;
  out.per_replication.assign(cfg.replications, 0.0);
  parallel_for(static_cast<std::size_t>(cfg.replications), workers,
               [&](std::size_t r) { out.per_replication[r] = run_replication(cfg, static_cast<int>(r)); });
  const double R = static_cast<double>(cfg.replications);
  out.mean = std::accumulate(out.per_replication.begin(), out.per_replication.end(), 0.0) / R;
  if (cfg.replications > 1) {
    double ss = 0.0;
    for (double v : out.per_replication) ss += (v - out.mean) * (v - out.mean);
    out.std_error = std::sqrt(ss / (R - 1.0)) / std::sqrt(R);
  }
  return out;
}

}  // namespace multidescent
