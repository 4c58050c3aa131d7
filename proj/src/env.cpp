#include "kucb/env.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "kucb/errors.hpp"
#include "kucb/rng.hpp"

namespace kucb {

namespace {
constexpr int kCalibrationSamples = 10000;
}

NoiseModel NoiseModel::trunc_gaussian(double sd) {
  if (!(sd >= 0.0) || !std::isfinite(sd)) throw ConfigError("noise sd must be >= 0");
  return {Kind::TruncGaussian, sd};
}

Environment Environment::linear(Eigen::VectorXd theta_star, NoiseModel noise,
                                std::uint64_t calibration_seed) {
  if (theta_star.size() == 0) throw ConfigError("theta* must be non-empty");
  if (!theta_star.allFinite()) throw ConfigError("theta* must be finite");
  Environment e;
  e.kind_ = Kind::Linear;
  e.noise_ = noise;
  e.dim_ = static_cast<int>(theta_star.size());
  e.theta_norm_ = theta_star.norm();
  e.theta_ = std::move(theta_star);
  e.calibrate(calibration_seed);
  return e;
}

Environment Environment::rkhs(std::vector<Context> anchors, Eigen::VectorXd alphas,
                              KernelSpec kernel, NoiseModel noise,
                              std::uint64_t calibration_seed) {
  if (anchors.empty()) throw ConfigError("rkhs environment needs at least one anchor");
  if (static_cast<std::size_t>(alphas.size()) != anchors.size())
    throw ConfigError("rkhs environment: alphas must align with anchors");
  Environment e;
  e.kind_ = Kind::Rkhs;
  e.noise_ = noise;
  const Eigen::MatrixXd anchor_gram = kernel.gram_matrix(anchors);
  e.theta_norm_ = std::sqrt(std::max(0.0, alphas.dot(anchor_gram * alphas)));
  if (kernel.kind() == KernelSpec::Kind::Precomputed) {
    e.dim_ = 0;
    e.id_universe_ = kernel.similarity().rows();
  } else {
    e.dim_ = static_cast<int>(anchors.front().features().size());
  }
  e.anchors_ = std::move(anchors);
  e.alphas_ = std::move(alphas);
  e.kernel_ = std::move(kernel);
  e.calibrate(calibration_seed);
  return e;
}

Environment Environment::scripted(std::vector<std::vector<Context>> contexts_by_round,
                                  Eigen::MatrixXd expected_by_round, NoiseModel noise) {
  if (contexts_by_round.empty()) throw ConfigError("scripted environment needs at least one round");
  const auto arms = contexts_by_round.front().size();
  if (arms < 1) throw ConfigError("scripted environment needs at least one arm");
  if (expected_by_round.rows() != static_cast<Eigen::Index>(contexts_by_round.size()) ||
      expected_by_round.cols() != static_cast<Eigen::Index>(arms))
    throw ConfigError("scripted environment: expected-reward table shape mismatch");
  for (const auto& row : contexts_by_round)
    if (row.size() != arms) throw ConfigError("scripted environment: ragged context table");
  Environment e;
  e.kind_ = Kind::Scripted;
  e.noise_ = noise;
  e.dim_ = contexts_by_round.front().front().has_features()
               ? static_cast<int>(contexts_by_round.front().front().features().size())
               : 0;
  e.script_contexts_ = std::move(contexts_by_round);
  e.script_expected_ = std::move(expected_by_round);
  return e;
}

Environment Environment::scripted_from_csv(const std::string& path, NoiseModel noise) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open script file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("script file is empty: " + path);
  int n = 0, d = 0;
  {
    std::stringstream head(line);
    std::string cell;
    if (!std::getline(head, cell, ',')) throw ConfigError("script header must be 'N,d'");
    n = std::stoi(cell);
    if (!std::getline(head, cell, ',')) throw ConfigError("script header must be 'N,d'");
    d = std::stoi(cell);
  }
  if (n < 1 || d < 1) throw ConfigError("script header N and d must be positive");

  std::vector<std::vector<Context>> contexts;
  std::vector<Eigen::VectorXd> expected_rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string cell;
    std::vector<double> values;
    while (std::getline(row, cell, ',')) values.push_back(std::stod(cell));
    if (values.size() != static_cast<std::size_t>(n * d + n))
      throw ConfigError("script row " + std::to_string(contexts.size() + 1) + " needs N*d+N values");
    std::vector<Context> arms;
    for (int a = 0; a < n; ++a) {
      Eigen::VectorXd f(d);
      for (int i = 0; i < d; ++i) f[i] = values[static_cast<std::size_t>(a * d + i)];
      arms.push_back(Context::from_features(std::move(f)));
    }
    Eigen::VectorXd exp_row(n);
    for (int a = 0; a < n; ++a) exp_row[a] = values[static_cast<std::size_t>(n * d + a)];
    contexts.push_back(std::move(arms));
    expected_rows.push_back(std::move(exp_row));
  }
  Eigen::MatrixXd expected(static_cast<Eigen::Index>(expected_rows.size()), n);
  for (std::size_t r = 0; r < expected_rows.size(); ++r)
    expected.row(static_cast<Eigen::Index>(r)) = expected_rows[r];
  return scripted(std::move(contexts), std::move(expected), noise);
}

double Environment::raw_score(const Context& x) const {
  if (kind_ == Kind::Linear) return theta_.dot(x.features());
  double f = 0.0;
  for (std::size_t i = 0; i < anchors_.size(); ++i)
    f += alphas_[static_cast<Eigen::Index>(i)] * kernel_.eval(x, anchors_[i]);
  return f;
}

double Environment::calibrated(double raw) const {
  return std::clamp(calib_scale_ * raw + calib_shift_, 0.0, 1.0);
}

Context Environment::sample_context(std::mt19937_64& rng) const {
  if (kind_ == Kind::Linear) return Context::from_features(rng::unit_sphere(rng, dim_));
  if (id_universe_ > 0)
    return Context::from_id(
        static_cast<std::size_t>(rng::uniform_below(rng, static_cast<int>(id_universe_))));
  return Context::from_features(rng::box_to_ball(rng, dim_));
}

void Environment::calibrate(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (int i = 0; i < kCalibrationSamples; ++i) {
    const double raw = raw_score(sample_context(rng));
    lo = std::min(lo, raw);
    hi = std::max(hi, raw);
  }
  if (hi - lo < 1e-12) {
    calib_scale_ = 0.0;
    calib_shift_ = 0.5;
  } else {
    calib_scale_ = 1.0 / (hi - lo);
    calib_shift_ = -lo / (hi - lo);
  }
}

long Environment::scripted_rounds() const {
  return kind_ == Kind::Scripted ? static_cast<long>(script_contexts_.size()) : 0;
}

double Environment::expected_reward(const Context& x) const {
  if (kind_ == Kind::Scripted)
    throw ConfigError("scripted environments only define rewards on their table");
  return calibrated(raw_score(x));
}

Round Environment::draw_round(std::mt19937_64& rng, int num_arms, long t) const {
  if (num_arms < 2) throw ConfigError("draw_round needs at least 2 arms");
  Round round;
  if (kind_ == Kind::Scripted) {
    if (t < 1 || t > static_cast<long>(script_contexts_.size()))
      throw ConfigError("scripted environment has no round " + std::to_string(t));
    if (num_arms != script_expected_.cols())
      throw ConfigError("scripted environment has " + std::to_string(script_expected_.cols()) +
                        " arms, not " + std::to_string(num_arms));
    round.contexts = script_contexts_[static_cast<std::size_t>(t - 1)];
    round.expected = script_expected_.row(t - 1);
  } else {
    round.contexts.reserve(static_cast<std::size_t>(num_arms));
    round.expected.resize(num_arms);
    for (int a = 0; a < num_arms; ++a) {
      round.contexts.push_back(sample_context(rng));
      round.expected[a] = calibrated(raw_score(round.contexts.back()));
    }
  }
  round.best = 0;
  for (int a = 1; a < num_arms; ++a)
    if (round.expected[a] > round.expected[round.best]) round.best = a;
  return round;
}

double Environment::sample_reward(std::mt19937_64& rng, int arm, const Round& round) const {
  if (arm < 0 || arm >= round.expected.size()) throw ConfigError("sample_reward: arm out of range");
  const double mean = round.expected[arm];
  switch (noise_.kind) {
    case NoiseModel::Kind::Noiseless:
      return mean;
    case NoiseModel::Kind::Bernoulli:
      return rng::uniform01(rng) < mean ? 1.0 : 0.0;
    case NoiseModel::Kind::TruncGaussian:
      return std::clamp(mean + noise_.sd * rng::normal(rng), 0.0, 1.0);
  }
  return mean;
}

}  // namespace kucb
