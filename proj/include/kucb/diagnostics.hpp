#pragma once

#include <Eigen/Core>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace kucb::diagnostics {

/// Eigenvalues of a symmetric PSD matrix, sorted decreasing. Round-off
/// negatives are clamped to zero; anything below -1e-8 * max|K| raises
/// NumericalError instead.
Eigen::VectorXd gram_eigenvalues(const Eigen::MatrixXd& k);

struct EffectiveDimension {
  long value = 1;                 // d~
  std::vector<double> tail_sums;  // Lambda_j for j = 0..n
};

/// d~ = min{ j >= 1 : j * gamma * ln T >= Lambda_j } with
/// Lambda_j = sum_{i>j} lambda_i over the Gram spectrum (decreasing,
/// clamped >= 0). horizon enters only through ln(horizon); horizon >= 2.
EffectiveDimension effective_dimension(const Eigen::VectorXd& eigs_decreasing, double gamma,
                                       double horizon);

/// ln|I + K / sigma2| = sum_i ln(1 + lambda_i / sigma2), via the spectrum.
double information_gain(const Eigen::MatrixXd& k, double sigma2);
double information_gain_from_eigs(const Eigen::VectorXd& eigs, double sigma2);

/// The Theorem-1 regret bound, evaluated verbatim:
///   [ 2 + 2 (1 + sqrt(gamma / (2 ln(2TN(1+ln T)/delta)))) |theta*|
///     + 8 sqrt((12 + 15/gamma) * max{ln(T/(d~ gamma) + 1), ln T}^3)
///       * sqrt(2 ln(2TN(1+ln T)/delta)) ] * sqrt(d~ T)
double theorem1_bound(double d_eff, double horizon, double num_arms, double gamma, double delta,
                      double theta_norm);

struct LinUcbScore {
  double mu;
  double sigma;  // gamma^{-1/2}-scaled to match ArmScore, i.e. sqrt(x' C^-1 x)
  double ucb;
};

/// Primal ridge oracle: C = X'X + gamma I, mu = x' C^-1 X' y,
/// sigma = sqrt(x' C^-1 x). Test oracle for the dual path; d stays small.
LinUcbScore linucb_oracle(const std::vector<Eigen::VectorXd>& contexts,
                          const std::vector<double>& rewards, double gamma,
                          const Eigen::VectorXd& query, double eta);

struct SpectrumReport {
  Eigen::VectorXd eigenvalues;
  double gamma = 1.0;
  double horizon = 0.0;
  std::vector<double> tail_sums;
  long effective_dim = 1;
  double info_gain = 0.0;
  double theorem1 = 0.0;
  double theta_norm = 0.0;
  double delta = 0.05;
  double num_arms = 0.0;

  nlohmann::json to_json() const;
  static SpectrumReport from_json(const nlohmann::json& j);
};

/// Full diagnostics for a completed run's Gram matrix. info gain uses
/// sigma2 = gamma (the GP-UCB correspondence).
SpectrumReport spectrum_report(const Eigen::MatrixXd& gram, double gamma, double horizon,
                               double num_arms, double delta, double theta_norm);

}  // namespace kucb::diagnostics
