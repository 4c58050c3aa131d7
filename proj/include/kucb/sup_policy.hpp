#pragma once

#include <utility>
#include <vector>

#include "kucb/gram.hpp"
#include "kucb/policy.hpp"

namespace kucb {

/// Outcome of one SupKernelUCB round. branch 1 is the exploit branch (the
/// round joins Psi_0, no level grows); branch 3 is the exploration branch
/// (the round joins Psi^(level)). The elimination branch never ends a round:
/// reaching the last level while it would fire again degrades to branch 1.
struct LevelDecision {
  long round = 0;
  int arm = -1;
  int branch = 0;
  int level = 0;
  int survivors = 0;
  double chosen_eta_sigma = 0.0;
  Eigen::VectorXd ib_hint;  // inv*k of the chosen arm at the decision level
};

/// Per-arm (mu, sigma) from one level's data only.
std::vector<std::pair<double, double>> base_estimates(const GramState& level_state,
                                                      const PolicyConfig& config,
                                                      const std::vector<Context>& contexts);

/// SupKernelUCB's mutually exclusive index sets Psi^(1..S), one GramState per
/// level, holding exactly the rounds assigned to that level. S = ceil(ln T),
/// at least 1. step() is read-only; commit() applies a decision.
class LevelSets {
 public:
  LevelSets(long horizon, PolicyConfig config);

  int levels() const { return static_cast<int>(states_.size()); }
  long horizon() const { return horizon_; }
  const PolicyConfig& config() const { return config_; }

  /// Runs the level loop for round t and reports the decision without
  /// mutating anything. Reads rewards only through the level states, so the
  /// assignment of t to a level is a function of this round's contexts and
  /// the rewards already inside the levels.
  LevelDecision step(const std::vector<Context>& contexts, long t) const;

  /// Applies a decision from step(): exploration pushes (context, reward)
  /// into the decision's level and records t in its index set; the exploit
  /// branch leaves every level untouched and counts the round in Psi_0.
  void commit(const LevelDecision& decision, const Context& chosen, double reward);

  /// Round indices assigned to level s (1-based s).
  const std::vector<long>& psi(int s) const { return psi_.at(static_cast<std::size_t>(s - 1)); }
  const GramState& level_state(int s) const { return states_.at(static_cast<std::size_t>(s - 1)); }
  long psi0_count() const { return psi0_; }

 private:
  long horizon_;
  PolicyConfig config_;
  std::vector<GramState> states_;
  std::vector<std::vector<long>> psi_;
  long psi0_ = 0;
};

}  // namespace kucb
