#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "kucb/gram.hpp"
#include "kucb/kernel.hpp"

namespace kucb {

/// Exploration parameter: either a fixed constant or the theory schedule
/// eta = sqrt(2 ln(2 T N / delta)), which is constant in t once the horizon
/// and arm count are fixed.
struct EtaSchedule {
  enum class Mode { Constant, Theory };

  Mode mode = Mode::Constant;
  double value = 1.0;    // Constant
  double delta = 0.05;   // Theory
  long horizon = 0;      // Theory: T
  long num_arms = 0;     // Theory: N

  static EtaSchedule constant(double eta);
  static EtaSchedule theory(double delta, long horizon, long num_arms);

  double resolve() const;
};

struct TieBreak {
  enum class Rule { LowestIndex, RandomSeeded };
  Rule rule = Rule::LowestIndex;
  std::uint64_t seed = 0;
};

struct PolicyConfig {
  double gamma = 1.0;
  EtaSchedule eta;
  KernelSpec kernel = KernelSpec::rbf();
  std::size_t recompute_every = 512;
  TieBreak tie_break;

  void validate() const;
};

/// One arm's scores for a round. sigma already carries the gamma^{-1/2}
/// prefactor, so ucb = mu + eta * sigma is exactly the selection quantity.
struct ArmScore {
  int arm;
  double mu;
  double sigma;
  double ucb;
};

/// Scores every arm against the current state. t is the 1-based round index.
std::vector<ArmScore> score_arms(const GramState& state, const PolicyConfig& config,
                                 const std::vector<Context>& contexts, long t);

/// Argmax of ucb. Scores within 1e-12 (absolute) of the maximum tie; ties go
/// to the lowest index, or to a uniform pick from tie_rng when the rule is
/// RandomSeeded (tie_rng must then be non-null).
int select(const std::vector<ArmScore>& scores, TieBreak::Rule rule = TieBreak::Rule::LowestIndex,
           std::mt19937_64* tie_rng = nullptr);

/// Records the observed reward for the chosen context.
void update(GramState& state, const Context& chosen, double reward, const PolicyConfig& config);

/// KernelUCB: score, select, update, with the tie-break stream owned here.
class KernelUcb {
 public:
  explicit KernelUcb(PolicyConfig config);

  int choose(const std::vector<Context>& contexts, long t);
  void observe(const Context& chosen, double reward);

  const GramState& state() const { return state_; }
  const PolicyConfig& config() const { return config_; }

 private:
  PolicyConfig config_;
  GramState state_;
  std::mt19937_64 tie_rng_;
  // inv*k column of the arm chosen last round, reusable as a push hint
  // while the state has not moved on.
  Eigen::VectorXd chosen_column_;
  Context chosen_context_;
  std::size_t chosen_at_size_ = static_cast<std::size_t>(-1);
};

}  // namespace kucb
