#pragma once

#include <Eigen/Core>
#include <random>
#include <string>
#include <vector>

#include "kucb/context.hpp"
#include "kucb/kernel.hpp"

namespace kucb {

struct NoiseModel {
  enum class Kind { Noiseless, Bernoulli, TruncGaussian };
  Kind kind = Kind::Noiseless;
  double sd = 0.0;

  static NoiseModel noiseless() { return {}; }
  static NoiseModel bernoulli() { return {Kind::Bernoulli, 0.0}; }
  static NoiseModel trunc_gaussian(double sd);
};

/// One round's offer: a fresh context per arm, the true expected rewards,
/// and the best arm (ties to the lowest index).
struct Round {
  std::vector<Context> contexts;
  Eigen::VectorXd expected;
  int best = 0;
};

/// Synthetic environments with known optimal actions, so contextual regret
/// is measurable exactly. Immutable after construction; all randomness comes
/// from the caller's generator, so parallel runs never share a stream.
///
/// Raw scores (theta*'x, or the kernel expansion) are affinely mapped into
/// [0,1] by a calibration frozen at construction from 10^4 sampled contexts;
/// realized rewards are clipped to [0,1].
class Environment {
 public:
  /// Reward theta*'x over contexts uniform on the unit sphere.
  static Environment linear(Eigen::VectorXd theta_star, NoiseModel noise,
                            std::uint64_t calibration_seed);

  /// Reward f(x) = sum_i alpha_i k(x, anchor_i). Feature-mode anchors draw
  /// contexts uniform on [-1,1]^d scaled into the unit ball; id-mode anchors
  /// (precomputed kernel) draw uniform ids.
  static Environment rkhs(std::vector<Context> anchors, Eigen::VectorXd alphas, KernelSpec kernel,
                          NoiseModel noise, std::uint64_t calibration_seed);

  /// Fixed context/expected-reward tables, replayed verbatim by round index.
  static Environment scripted(std::vector<std::vector<Context>> contexts_by_round,
                              Eigen::MatrixXd expected_by_round,
                              NoiseModel noise = NoiseModel::noiseless());

  /// CSV: first line "N,d"; each row N*d context values then N expected rewards.
  static Environment scripted_from_csv(const std::string& path,
                                       NoiseModel noise = NoiseModel::noiseless());

  /// N fresh contexts with expected rewards and the best arm. t is the
  /// 1-based round index; only scripted environments consume it.
  Round draw_round(std::mt19937_64& rng, int num_arms, long t) const;

  /// Applies the noise model to the chosen arm's expected reward.
  double sample_reward(std::mt19937_64& rng, int arm, const Round& round) const;

  /// Calibrated expected reward of an arbitrary context (linear/rkhs only).
  double expected_reward(const Context& x) const;

  /// |theta*| for the linear model, sqrt(alpha' K alpha) for the RKHS model.
  double theta_norm() const { return theta_norm_; }

  int context_dim() const { return dim_; }
  long scripted_rounds() const;

 private:
  enum class Kind { Linear, Rkhs, Scripted };

  Environment() = default;
  double raw_score(const Context& x) const;
  double calibrated(double raw) const;
  Context sample_context(std::mt19937_64& rng) const;
  void calibrate(std::uint64_t seed);

  Kind kind_ = Kind::Linear;
  NoiseModel noise_;
  int dim_ = 0;
  double theta_norm_ = 0.0;

  Eigen::VectorXd theta_;            // linear
  std::vector<Context> anchors_;     // rkhs
  Eigen::VectorXd alphas_;           // rkhs
  KernelSpec kernel_ = KernelSpec::linear();
  long id_universe_ = 0;             // rkhs over precomputed ids

  std::vector<std::vector<Context>> script_contexts_;
  Eigen::MatrixXd script_expected_;

  double calib_scale_ = 1.0;
  double calib_shift_ = 0.0;
};

}  // namespace kucb
