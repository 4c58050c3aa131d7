#include <doctest.h>

#include <Eigen/Cholesky>
#include <cmath>
#include <random>

#include "kucb/diagnostics.hpp"
#include "kucb/errors.hpp"
#include "kucb/policy.hpp"
#include "kucb/rng.hpp"

using namespace kucb;

namespace {

Context feat(std::initializer_list<double> v) {
  Eigen::VectorXd f(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) f[i++] = x;
  return Context::from_features(std::move(f));
}

PolicyConfig linear_config(double gamma, double eta) {
  PolicyConfig cfg;
  cfg.gamma = gamma;
  cfg.eta = EtaSchedule::constant(eta);
  cfg.kernel = KernelSpec::linear();
  return cfg;
}

}  // namespace

TEST_CASE("eta schedules resolve and validate") {
  CHECK(EtaSchedule::constant(2.5).resolve() == 2.5);
  CHECK(EtaSchedule::constant(0.0).resolve() == 0.0);  // pure exploitation
  CHECK_THROWS_AS(EtaSchedule::constant(-1.0).resolve(), ConfigError);

  // sqrt(2 ln(2 T N / delta))
  const auto theory = EtaSchedule::theory(0.05, 1000, 10);
  CHECK(theory.resolve() == doctest::Approx(std::sqrt(2.0 * std::log(2.0 * 1000 * 10 / 0.05))));
  CHECK_THROWS_AS(EtaSchedule::theory(0.0, 1000, 10).resolve(), ConfigError);
  CHECK_THROWS_AS(EtaSchedule::theory(1.0, 1000, 10).resolve(), ConfigError);
  CHECK_THROWS_AS(EtaSchedule::theory(0.05, 0, 10).resolve(), ConfigError);
}

TEST_CASE("score_arms on an empty state gives the symmetric prior") {
  PolicyConfig cfg;
  cfg.gamma = 1.0;
  cfg.eta = EtaSchedule::constant(1.0);
  cfg.kernel = KernelSpec::rbf(1.0);
  GramState state(cfg.gamma);
  const std::vector<Context> arms = {feat({0.1, 0.0}), feat({0.0, 0.2}), feat({0.5, 0.5})};
  const auto scores = score_arms(state, cfg, arms, 1);
  REQUIRE(scores.size() == 3);
  for (const auto& s : scores) {
    CHECK(s.mu == 0.0);
    CHECK(s.sigma == doctest::Approx(1.0));
    CHECK(s.ucb == doctest::Approx(1.0));
  }
}

TEST_CASE("pure exploitation scores a single observation") {
  auto cfg = linear_config(1.0, 0.0);
  GramState state(cfg.gamma);
  update(state, feat({1, 0}), 1.0, cfg);
  const auto scores = score_arms(state, cfg, {feat({1, 0}), feat({0, 1})}, 2);
  CHECK(scores[0].ucb == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(scores[1].ucb == doctest::Approx(0.0));
  CHECK(select(scores) == 0);
}

TEST_CASE("exploration can flip the argmax") {
  auto cfg = linear_config(1.0, 2.0);
  GramState state(cfg.gamma);
  update(state, feat({1, 0}), 1.0, cfg);
  const auto scores = score_arms(state, cfg, {feat({1, 0}), feat({0, 1})}, 2);
  CHECK(scores[0].ucb == doctest::Approx(0.5 + 2.0 * std::sqrt(0.5)));  // 1.9142...
  CHECK(scores[1].ucb == doctest::Approx(2.0));
  CHECK(select(scores) == 1);
}

TEST_CASE("ucb recombines mu, eta and sigma exactly") {
  auto cfg = linear_config(0.5, 1.7);
  GramState state(cfg.gamma);
  std::mt19937_64 g(3);
  for (int t = 0; t < 10; ++t)
    update(state, Context::from_features(rng::unit_sphere(g, 3)), rng::uniform01(g), cfg);
  const std::vector<Context> arms = {Context::from_features(rng::unit_sphere(g, 3)),
                                     Context::from_features(rng::unit_sphere(g, 3))};
  for (const auto& s : score_arms(state, cfg, arms, 11)) {
    CHECK(s.sigma >= 0.0);
    CHECK(s.ucb == s.mu + 1.7 * s.sigma);
  }
}

TEST_CASE("select takes the argmax and breaks ties by rule") {
  auto mk = [](std::initializer_list<double> ucbs) {
    std::vector<ArmScore> s;
    int i = 0;
    for (double u : ucbs) s.push_back({i++, 0.0, 0.0, u});
    return s;
  };
  CHECK(select(mk({1.0, 2.0, 0.0})) == 1);
  CHECK(select(mk({1.0, 1.0})) == 0);
  CHECK(select(mk({0.5, 0.5, 0.5})) == 0);  // round-1 "first action is pulled"
  CHECK(select(mk({1.0, 1.0 + 5e-13, 0.3})) == 0);  // inside the 1e-12 tie band
  CHECK_THROWS_AS(select({}), ConfigError);

  std::mt19937_64 tie_rng(42);
  int saw_other = 0;
  for (int trial = 0; trial < 100; ++trial)
    saw_other += select(mk({1.0, 1.0}), TieBreak::Rule::RandomSeeded, &tie_rng) == 1 ? 1 : 0;
  CHECK(saw_other > 20);
  CHECK(saw_other < 80);
  CHECK_THROWS_AS(select(mk({1.0, 1.0}), TieBreak::Rule::RandomSeeded, nullptr), ConfigError);
}

TEST_CASE("argmax is invariant to positive rescaling of the scores") {
  std::mt19937_64 g(9);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<ArmScore> scores;
    for (int a = 0; a < 6; ++a)
      scores.push_back({a, 0.0, 0.0, rng::uniform01(g) * 4.0 - 2.0});
    const double c = 0.1 + 10.0 * rng::uniform01(g);
    std::vector<ArmScore> scaled = scores;
    for (auto& s : scaled) s.ucb *= c;
    CHECK(select(scores) == select(scaled));
  }
}

TEST_CASE("update grows the state in insertion order") {
  auto cfg = linear_config(1.0, 1.0);
  GramState state(cfg.gamma);
  update(state, feat({1, 0}), 0.25, cfg);
  CHECK(state.size() == 1);
  std::mt19937_64 g(21);
  for (int t = 0; t < 9; ++t)
    update(state, Context::from_features(rng::unit_sphere(g, 2)), 0.1 * t, cfg);
  CHECK(state.size() == 10);
  CHECK(state.rewards()[0] == 0.25);
  CHECK(state.rewards()[9] == doctest::Approx(0.8));

  // a single (x, r=1) observation pulls the prediction halfway at gamma=1
  PolicyConfig rbf_cfg;
  rbf_cfg.gamma = 1.0;
  rbf_cfg.kernel = KernelSpec::rbf(1.0);
  GramState s2(1.0);
  const auto x = feat({0.3, -0.3});
  update(s2, x, 1.0, rbf_cfg);
  CHECK(s2.predict_mean(x, rbf_cfg.kernel) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("dual scores match the primal LinUCB oracle on random data") {
  auto cfg = linear_config(0.7, 1.3);
  GramState state(cfg.gamma);
  std::mt19937_64 g(33);
  std::vector<Eigen::VectorXd> xs;
  std::vector<double> ys;
  for (long t = 1; t <= 60; ++t) {
    std::vector<Context> arms;
    std::vector<Eigen::VectorXd> raw;
    for (int a = 0; a < 4; ++a) {
      raw.push_back(rng::unit_sphere(g, 5));
      arms.push_back(Context::from_features(raw.back()));
    }
    const auto dual = score_arms(state, cfg, arms, t);
    int primal_best = 0;
    double primal_best_ucb = -1e300;
    for (int a = 0; a < 4; ++a) {
      const auto primal =
          diagnostics::linucb_oracle(xs, ys, cfg.gamma, raw[static_cast<std::size_t>(a)], 1.3);
      CHECK(dual[static_cast<std::size_t>(a)].mu == doctest::Approx(primal.mu).epsilon(1e-9));
      CHECK(dual[static_cast<std::size_t>(a)].sigma == doctest::Approx(primal.sigma).epsilon(1e-9));
      CHECK(dual[static_cast<std::size_t>(a)].ucb == doctest::Approx(primal.ucb).epsilon(1e-9));
      if (primal.ucb > primal_best_ucb + 1e-12) {
        primal_best_ucb = primal.ucb;
        primal_best = a;
      }
    }
    const int chosen = select(dual);
    CHECK(chosen == primal_best);
    const double reward = rng::uniform01(g);
    xs.push_back(raw[static_cast<std::size_t>(chosen)]);
    ys.push_back(reward);
    update(state, arms[static_cast<std::size_t>(chosen)], reward, cfg);
  }
}

TEST_CASE("width matches the GP posterior standard deviation when gamma is the noise") {
  // gamma = sigma^2: width * gamma^{1/2} = sqrt(k(x,x) - k'(K + sigma^2 I)^-1 k)
  const auto rbf = KernelSpec::rbf(0.8);
  std::mt19937_64 g(55);
  for (const double sigma2 : {0.05, 0.3, 1.0}) {
    GramState state(sigma2);
    std::vector<Context> history;
    for (int t = 0; t < 25; ++t) {
      const auto x = Context::from_features(rng::box_to_ball(g, 2));
      history.push_back(x);
      state.push(x, rng::uniform01(g), rbf);
    }
    Eigen::MatrixXd reg = rbf.gram_matrix(history);
    reg.diagonal().array() += sigma2;
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(reg);
    for (int trial = 0; trial < 30; ++trial) {
      const auto q = Context::from_features(rng::box_to_ball(g, 2));
      const Eigen::VectorXd k = rbf.gram_vector(q, history);
      const double gp_sd = std::sqrt(std::max(0.0, rbf.eval(q, q) - k.dot(ldlt.solve(k))));
      CHECK(state.width(q, rbf) * std::sqrt(sigma2) == doctest::Approx(gp_sd).epsilon(1e-9));
    }
  }
}

TEST_CASE("identical config and seed reproduce the arm sequence bit for bit") {
  PolicyConfig cfg;
  cfg.gamma = 0.4;
  cfg.eta = EtaSchedule::constant(0.8);
  cfg.kernel = KernelSpec::rbf(1.0);
  cfg.tie_break = {TieBreak::Rule::RandomSeeded, 99};

  auto run = [&cfg] {
    std::mt19937_64 env_g(1234);
    KernelUcb policy(cfg);
    std::vector<int> arms;
    for (long t = 1; t <= 80; ++t) {
      std::vector<Context> contexts;
      for (int a = 0; a < 3; ++a)
        contexts.push_back(Context::from_features(rng::box_to_ball(env_g, 2)));
      const int arm = policy.choose(contexts, t);
      arms.push_back(arm);
      policy.observe(contexts[static_cast<std::size_t>(arm)], rng::uniform01(env_g));
    }
    return arms;
  };
  CHECK(run() == run());
}

TEST_CASE("policy config validation") {
  PolicyConfig cfg;
  cfg.gamma = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.gamma = 1.0;
  cfg.recompute_every = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.recompute_every = 512;
  CHECK_NOTHROW(cfg.validate());
  CHECK_THROWS_AS(score_arms(GramState(1.0), cfg, {}, 1), ConfigError);
  CHECK_THROWS_AS(score_arms(GramState(1.0), cfg, {feat({1.0})}, 0), ConfigError);
}
