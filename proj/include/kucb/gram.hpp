#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "kucb/context.hpp"
#include "kucb/kernel.hpp"

namespace kucb {

/// The dual representation of kernel ridge regression: the observed
/// contexts, their rewards, and the regularized Gram inverse
/// (K_t + gamma I)^-1, grown one observation at a time by the
/// Schur-complement block formula.
///
/// Single-writer semantics: one owner mutates via push(); read-only
/// queries may run concurrently on a snapshot that nobody is mutating.
class GramState {
 public:
  explicit GramState(double gamma, std::size_t recompute_every = 512);

  double gamma() const { return gamma_; }
  std::size_t size() const { return history_.size(); }
  std::size_t recompute_every() const { return recompute_every_; }
  std::size_t steps_since_recompute() const { return steps_since_recompute_; }
  const std::vector<Context>& history() const { return history_; }
  Eigen::Map<const Eigen::VectorXd> rewards() const {
    return {rewards_.data(), static_cast<Eigen::Index>(rewards_.size())};
  }

  /// Materializes (K_t + gamma I)^-1 as a full symmetric matrix.
  Eigen::MatrixXd inverse() const;

  /// Appends one (context, reward) observation, extending the inverse with
  /// the Schur-complement block update. Every recompute_every pushes the
  /// inverse is rebuilt from a dense solve to arrest floating-point drift.
  /// A collapsed pivot (d <= 1e-12 * gamma) triggers one dense rebuild and
  /// retry before raising NumericalError.
  ///
  /// inv_k_hint, when given, must be the inverse applied to the kernel
  /// vector of x against the current history, exactly as batch_scores
  /// reports it; it skips one pass over the inverse.
  void push(const Context& x, double reward, const KernelSpec& kernel,
            const Eigen::VectorXd* inv_k_hint = nullptr);

  /// k_{x,t}^T (K_t + gamma I)^-1 y_t; zero on an empty state.
  double predict_mean(const Context& x, const KernelSpec& kernel) const;

  /// gamma^{-1/2} sqrt(max(0, k(x,x) - k_{x,t}^T (K_t + gamma I)^-1 k_{x,t})).
  double width(const Context& x, const KernelSpec& kernel) const;

  /// Mean and width for a batch of query contexts in one pass over the
  /// inverse; identical formulas to predict_mean/width. inv_k_columns,
  /// when non-null, receives inv * k_q per query (usable as a push hint).
  void batch_scores(const KernelSpec& kernel, const std::vector<Context>& queries,
                    Eigen::VectorXd& mu, Eigen::VectorXd& sigma,
                    Eigen::MatrixXd* inv_k_columns = nullptr) const;

  /// Replaces the inverse with a dense solve of (K_t + gamma I).
  void dense_rebuild(const KernelSpec& kernel);

  /// History, rewards and gamma only; the inverse is rebuilt on restore.
  nlohmann::json checkpoint() const;
  static GramState restore(const nlohmann::json& j, const KernelSpec& kernel);

 private:
  void ensure_capacity(std::size_t n);
  // out = (K_t + gamma I)^-1 * x for a single column, lower triangle only.
  void apply_inverse(const double* x, double* out) const;

  double gamma_;
  std::size_t recompute_every_;
  std::size_t steps_since_recompute_ = 0;
  std::vector<Context> history_;
  std::vector<double> rewards_;
  // Lower triangle of buf_.topLeftCorner(n, n) holds the inverse; the
  // logical matrix is exactly symmetric by construction. Capacity grows
  // geometrically so pushes never copy in the steady state.
  Eigen::MatrixXd buf_;
};

nlohmann::json context_to_json(const Context& c);
Context context_from_json(const nlohmann::json& j);

}  // namespace kucb
