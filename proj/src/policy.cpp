#include "kucb/policy.hpp"

#include <cmath>

#include "kucb/errors.hpp"
#include "kucb/rng.hpp"

namespace kucb {

EtaSchedule EtaSchedule::constant(double eta) {
  EtaSchedule s;
  s.mode = Mode::Constant;
  s.value = eta;
  return s;
}

EtaSchedule EtaSchedule::theory(double delta, long horizon, long num_arms) {
  EtaSchedule s;
  s.mode = Mode::Theory;
  s.delta = delta;
  s.horizon = horizon;
  s.num_arms = num_arms;
  return s;
}

double EtaSchedule::resolve() const {
  if (mode == Mode::Constant) {
    // eta = 0 is pure exploitation; negative exploration makes no sense.
    if (!(value >= 0.0) || !std::isfinite(value))
      throw ConfigError("constant eta must be >= 0");
    return value;
  }
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("theory eta needs delta in (0,1)");
  if (horizon < 1 || num_arms < 1)
    throw ConfigError("theory eta needs the horizon T and arm count N up front");
  return std::sqrt(2.0 * std::log(2.0 * static_cast<double>(horizon) *
                                  static_cast<double>(num_arms) / delta));
}

void PolicyConfig::validate() const {
  if (!(gamma > 0.0) || !std::isfinite(gamma))
    throw ConfigError("gamma must be strictly positive");
  if (recompute_every == 0) throw ConfigError("recompute_every must be positive");
  (void)eta.resolve();
}

std::vector<ArmScore> score_arms(const GramState& state, const PolicyConfig& config,
                                 const std::vector<Context>& contexts, long t) {
  if (contexts.empty()) throw ConfigError("score_arms needs at least one arm");
  if (t < 1) throw ConfigError("round index t must be >= 1");
  const double eta = config.eta.resolve();
  Eigen::VectorXd mu, sigma;
  state.batch_scores(config.kernel, contexts, mu, sigma);
  std::vector<ArmScore> scores(contexts.size());
  for (std::size_t a = 0; a < contexts.size(); ++a) {
    const auto i = static_cast<Eigen::Index>(a);
    scores[a] = ArmScore{static_cast<int>(a), mu[i], sigma[i], mu[i] + eta * sigma[i]};
  }
  return scores;
}

int select(const std::vector<ArmScore>& scores, TieBreak::Rule rule, std::mt19937_64* tie_rng) {
  if (scores.empty()) throw ConfigError("select needs a non-empty score list");
  double best = scores[0].ucb;
  for (const ArmScore& s : scores) best = std::max(best, s.ucb);
  static constexpr double kTieTol = 1e-12;
  if (rule == TieBreak::Rule::LowestIndex) {
    for (const ArmScore& s : scores)
      if (s.ucb >= best - kTieTol) return s.arm;
    return scores[0].arm;  // unreachable
  }
  if (tie_rng == nullptr) throw ConfigError("RandomSeeded tie-break needs an rng");
  std::vector<int> ties;
  for (const ArmScore& s : scores)
    if (s.ucb >= best - kTieTol) ties.push_back(s.arm);
  return ties[rng::uniform_below(*tie_rng, static_cast<int>(ties.size()))];
}

void update(GramState& state, const Context& chosen, double reward, const PolicyConfig& config) {
  state.push(chosen, reward, config.kernel);
}

KernelUcb::KernelUcb(PolicyConfig config)
    : config_(std::move(config)),
      state_(config_.gamma, config_.recompute_every),
      tie_rng_(config_.tie_break.seed) {
  config_.validate();
}

int KernelUcb::choose(const std::vector<Context>& contexts, long t) {
  if (contexts.empty()) throw ConfigError("choose needs at least one arm");
  if (t < 1) throw ConfigError("round index t must be >= 1");
  const double eta = config_.eta.resolve();
  Eigen::VectorXd mu, sigma;
  Eigen::MatrixXd columns;
  state_.batch_scores(config_.kernel, contexts, mu, sigma, &columns);
  std::vector<ArmScore> scores(contexts.size());
  for (std::size_t a = 0; a < contexts.size(); ++a) {
    const auto i = static_cast<Eigen::Index>(a);
    scores[a] = ArmScore{static_cast<int>(a), mu[i], sigma[i], mu[i] + eta * sigma[i]};
  }
  const int arm = select(scores, config_.tie_break.rule, &tie_rng_);
  chosen_column_ = columns.col(arm);
  chosen_context_ = contexts[static_cast<std::size_t>(arm)];
  chosen_at_size_ = state_.size();
  return arm;
}

void KernelUcb::observe(const Context& chosen, double reward) {
  const bool hint_valid =
      state_.size() == chosen_at_size_ && identical(chosen, chosen_context_);
  state_.push(chosen, reward, config_.kernel, hint_valid ? &chosen_column_ : nullptr);
}

}  // namespace kucb
