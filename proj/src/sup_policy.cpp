#include "kucb/sup_policy.hpp"

#include <cmath>

#include "kucb/errors.hpp"

namespace kucb {

std::vector<std::pair<double, double>> base_estimates(const GramState& level_state,
                                                      const PolicyConfig& config,
                                                      const std::vector<Context>& contexts) {
  Eigen::VectorXd mu, sigma;
  level_state.batch_scores(config.kernel, contexts, mu, sigma);
  std::vector<std::pair<double, double>> out(contexts.size());
  for (std::size_t a = 0; a < contexts.size(); ++a) {
    const auto i = static_cast<Eigen::Index>(a);
    out[a] = {mu[i], sigma[i]};
  }
  return out;
}

LevelSets::LevelSets(long horizon, PolicyConfig config)
    : horizon_(horizon), config_(std::move(config)) {
  if (horizon_ < 1) throw ConfigError("horizon must be >= 1");
  config_.validate();
  const int s = std::max(1, static_cast<int>(std::ceil(std::log(static_cast<double>(horizon_)))));
  states_.reserve(static_cast<std::size_t>(s));
  for (int i = 0; i < s; ++i)
    states_.emplace_back(config_.gamma, config_.recompute_every);
  psi_.resize(static_cast<std::size_t>(s));
}

LevelDecision LevelSets::step(const std::vector<Context>& contexts, long t) const {
  if (contexts.empty()) throw ConfigError("step needs at least one arm");
  if (t < 1 || t > horizon_) throw ConfigError("round index out of range");
  const double eta = config_.eta.resolve();
  const double exploit_cut = 1.0 / std::sqrt(static_cast<double>(horizon_));
  const int num_levels = levels();

  std::vector<int> survivors(contexts.size());
  for (std::size_t a = 0; a < contexts.size(); ++a) survivors[a] = static_cast<int>(a);

  for (int s = 1;; ++s) {
    std::vector<Context> surviving_contexts;
    surviving_contexts.reserve(survivors.size());
    for (int a : survivors) surviving_contexts.push_back(contexts[static_cast<std::size_t>(a)]);
    Eigen::VectorXd mu_v, sigma_v;
    Eigen::MatrixXd columns;
    level_state(s).batch_scores(config_.kernel, surviving_contexts, mu_v, sigma_v, &columns);
    std::vector<std::pair<double, double>> est(surviving_contexts.size());
    for (std::size_t i = 0; i < est.size(); ++i)
      est[i] = {mu_v[static_cast<Eigen::Index>(i)], sigma_v[static_cast<Eigen::Index>(i)]};

    double max_width = 0.0;
    for (const auto& [mu, sigma] : est) max_width = std::max(max_width, eta * sigma);

    const auto exploit_pick = [&] {
      std::size_t best = 0;
      for (std::size_t i = 1; i < est.size(); ++i)
        if (est[i].first + eta * est[i].second > est[best].first + eta * est[best].second)
          best = i;
      return LevelDecision{t,
                           survivors[best],
                           1,
                           s,
                           static_cast<int>(survivors.size()),
                           eta * est[best].second};
    };

    if (max_width <= exploit_cut) return exploit_pick();

    if (max_width <= std::ldexp(1.0, -s)) {
      if (s == num_levels) return exploit_pick();  // level overflow: exploit
      double best_value = est[0].first + eta * est[0].second;
      for (const auto& [mu, sigma] : est) best_value = std::max(best_value, mu + eta * sigma);
      const double keep_above = best_value - std::ldexp(1.0, 1 - s);
      std::vector<int> kept;
      for (std::size_t i = 0; i < est.size(); ++i)
        if (est[i].first + eta * est[i].second >= keep_above) kept.push_back(survivors[i]);
      survivors = std::move(kept);
      continue;
    }

    // Exploration: any survivor with eta*sigma beyond the level resolution
    // qualifies; take the widest (most information), ties by lowest index.
    std::size_t pick = est.size();
    for (std::size_t i = 0; i < est.size(); ++i) {
      if (eta * est[i].second > std::ldexp(1.0, -s) &&
          (pick == est.size() || est[i].second > est[pick].second))
        pick = i;
    }
    LevelDecision decision{t,
                           survivors[pick],
                           3,
                           s,
                           static_cast<int>(survivors.size()),
                           eta * est[pick].second,
                           {}};
    decision.ib_hint = columns.col(static_cast<Eigen::Index>(pick));
    return decision;
  }
}

void LevelSets::commit(const LevelDecision& decision, const Context& chosen, double reward) {
  if (decision.branch == 3) {
    auto& state = states_.at(static_cast<std::size_t>(decision.level - 1));
    const bool hint_valid =
        decision.ib_hint.size() == static_cast<Eigen::Index>(state.size());
    state.push(chosen, reward, config_.kernel, hint_valid ? &decision.ib_hint : nullptr);
    psi_.at(static_cast<std::size_t>(decision.level - 1)).push_back(decision.round);
  } else {
    ++psi0_;
  }
}

}  // namespace kucb
