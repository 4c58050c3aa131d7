#include "kucb/harness.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "kucb/errors.hpp"
#include "kucb/rng.hpp"

namespace kucb {

void ExperimentConfig::validate() const {
  if (horizon < 2) throw ConfigError("T must be >= 2");
  if (num_arms < 2) throw ConfigError("N must be >= 2");
  if (replications < 1) throw ConfigError("replications must be >= 1");
  policy_cfg.validate();
  if (env.type == EnvConfig::Type::Scripted && env.script_path.empty())
    throw ConfigError("scripted environment needs env.script");
  if (env.type == EnvConfig::Type::Rkhs && env.anchors < 1)
    throw ConfigError("env.anchors must be >= 1");
  if (env.type != EnvConfig::Type::Scripted && env.dim < 1 &&
      policy_cfg.kernel.kind() != KernelSpec::Kind::Precomputed)
    throw ConfigError("env.d must be >= 1");
}

double RegretTrace::cum_regret_at(long round) const {
  for (auto it = rows.rbegin(); it != rows.rend(); ++it)
    if (it->round <= round) return it->cum_regret;
  return 0.0;
}

namespace detail {

std::string format_double(double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, p);
}

std::string trace_to_csv(const RegretTrace& trace) {
  std::string out = "round,arm,reward,exp_reward,exp_best,inst_regret,cum_regret,branch,level,survivors\n";
  for (const RoundRecord& r : trace.rows) {
    out += std::to_string(r.round);
    out += ',';
    out += std::to_string(r.arm + 1);  // 1-based in the file, like rounds
    out += ',';
    out += format_double(r.reward);
    out += ',';
    out += format_double(r.exp_reward);
    out += ',';
    out += format_double(r.exp_best);
    out += ',';
    out += format_double(r.inst_regret);
    out += ',';
    out += format_double(r.cum_regret);
    if (r.branch != 0) {
      out += ',';
      out += std::to_string(r.branch);
      out += ',';
      out += std::to_string(r.level);
      out += ',';
      out += std::to_string(r.survivors);
    } else {
      out += ",,,";
    }
    out += '\n';
  }
  return out;
}

RegretTrace trace_from_csv(const std::string& text) {
  RegretTrace trace;
  std::stringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("empty trace file");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    while (cells.size() < 10) cells.emplace_back();
    RoundRecord r;
    r.round = std::stol(cells[0]);
    r.arm = std::stoi(cells[1]) - 1;
    r.reward = std::stod(cells[2]);
    r.exp_reward = std::stod(cells[3]);
    r.exp_best = std::stod(cells[4]);
    r.inst_regret = std::stod(cells[5]);
    r.cum_regret = std::stod(cells[6]);
    r.branch = cells[7].empty() ? 0 : std::stoi(cells[7]);
    r.level = cells[8].empty() ? 0 : std::stoi(cells[8]);
    r.survivors = cells[9].empty() ? 0 : std::stoi(cells[9]);
    trace.rows.push_back(r);
  }
  return trace;
}

Environment build_environment(const ExperimentConfig& config, std::uint64_t build_seed,
                              std::uint64_t calibration_seed) {
  std::mt19937_64 gen(build_seed);
  switch (config.env.type) {
    case EnvConfig::Type::Linear: {
      Eigen::VectorXd theta =
          config.env.theta_norm * rng::unit_sphere(gen, config.env.dim);
      return Environment::linear(std::move(theta), config.env.noise, calibration_seed);
    }
    case EnvConfig::Type::Rkhs: {
      const KernelSpec& kernel = config.policy_cfg.kernel;
      std::vector<Context> anchors;
      Eigen::VectorXd alphas(config.env.anchors);
      const bool id_mode = kernel.kind() == KernelSpec::Kind::Precomputed;
      for (int i = 0; i < config.env.anchors; ++i) {
        if (id_mode) {
          const int m = static_cast<int>(kernel.similarity().rows());
          anchors.push_back(Context::from_id(static_cast<std::size_t>(rng::uniform_below(gen, m))));
        } else {
          anchors.push_back(Context::from_features(rng::box_to_ball(gen, config.env.dim)));
        }
        alphas[i] = (i % 2 == 0) ? 1.0 : -1.0;
      }
      const Eigen::MatrixXd anchor_gram = kernel.gram_matrix(anchors);
      const double raw_norm = std::sqrt(std::max(1e-12, alphas.dot(anchor_gram * alphas)));
      alphas *= config.env.theta_norm / raw_norm;
      return Environment::rkhs(std::move(anchors), std::move(alphas), kernel, config.env.noise,
                               calibration_seed);
    }
    case EnvConfig::Type::Scripted:
      return Environment::scripted_from_csv(config.env.script_path, config.env.noise);
  }
  throw ConfigError("unknown environment type");
}

namespace {

// Uniform policy interface for the round loop.
class Driver {
 public:
  virtual ~Driver() = default;
  virtual int choose(const std::vector<Context>& contexts, long t) = 0;
  virtual void observe(int arm, const std::vector<Context>& contexts, double reward) = 0;
  virtual const LevelDecision* last_decision() const { return nullptr; }
  virtual const std::vector<Context>* gram_history() const { return nullptr; }
};

class KernelUcbDriver final : public Driver {
 public:
  explicit KernelUcbDriver(PolicyConfig cfg) : policy_(std::move(cfg)) {}
  int choose(const std::vector<Context>& contexts, long t) override {
    return policy_.choose(contexts, t);
  }
  void observe(int arm, const std::vector<Context>& contexts, double reward) override {
    policy_.observe(contexts[static_cast<std::size_t>(arm)], reward);
  }
  const std::vector<Context>* gram_history() const override {
    return &policy_.state().history();
  }

 private:
  KernelUcb policy_;
};

class SupKernelUcbDriver final : public Driver {
 public:
  SupKernelUcbDriver(long horizon, PolicyConfig cfg) : levels_(horizon, std::move(cfg)) {}
  int choose(const std::vector<Context>& contexts, long t) override {
    decision_ = levels_.step(contexts, t);
    return decision_.arm;
  }
  void observe(int arm, const std::vector<Context>& contexts, double reward) override {
    (void)arm;
    levels_.commit(decision_, contexts[static_cast<std::size_t>(decision_.arm)], reward);
  }
  const LevelDecision* last_decision() const override { return &decision_; }

 private:
  LevelSets levels_;
  LevelDecision decision_;
};

class UniformDriver final : public Driver {
 public:
  explicit UniformDriver(std::uint64_t seed) : gen_(seed) {}
  int choose(const std::vector<Context>& contexts, long) override {
    return rng::uniform_below(gen_, static_cast<int>(contexts.size()));
  }
  void observe(int, const std::vector<Context>&, double) override {}

 private:
  std::mt19937_64 gen_;
};

std::unique_ptr<Driver> build_driver(const ExperimentConfig& config, std::uint64_t policy_seed) {
  PolicyConfig pc = config.policy_cfg;
  if (pc.eta.mode == EtaSchedule::Mode::Theory) {
    pc.eta.horizon = config.horizon;
    pc.eta.num_arms = config.num_arms;
  }
  if (pc.tie_break.rule == TieBreak::Rule::RandomSeeded)
    pc.tie_break.seed = rng::derive(policy_seed, 17);
  switch (config.policy) {
    case ExperimentConfig::Policy::KernelUcb:
      return std::make_unique<KernelUcbDriver>(std::move(pc));
    case ExperimentConfig::Policy::SupKernelUcb:
      return std::make_unique<SupKernelUcbDriver>(config.horizon, std::move(pc));
    case ExperimentConfig::Policy::UniformRandom:
      return std::make_unique<UniformDriver>(policy_seed);
  }
  throw ConfigError("unknown policy");
}

ReplicationResult run_replication(const ExperimentConfig& config, int rep) {
  const std::uint64_t rep_seed = rng::derive(config.seed, static_cast<std::uint64_t>(rep));
  const std::uint64_t s_build = rng::derive(rep_seed, 1);
  const std::uint64_t s_calib = rng::derive(rep_seed, 2);
  const std::uint64_t s_rounds = rng::derive(rep_seed, 3);
  const std::uint64_t s_policy = rng::derive(rep_seed, 4);

  const Environment env = detail::build_environment(config, s_build, s_calib);
  std::mt19937_64 env_rng(s_rounds);
  auto driver = build_driver(config, s_policy);

  ReplicationResult result;
  result.trace.rows.reserve(static_cast<std::size_t>(config.horizon));
  std::vector<Context> chosen;
  std::vector<double> rewards;
  chosen.reserve(static_cast<std::size_t>(config.horizon));
  double cum = 0.0;
  double realized = 0.0;

  for (long t = 1; t <= config.horizon; ++t) {
    const Round round = env.draw_round(env_rng, config.num_arms, t);
    int arm = 0;
    double reward = 0.0;
    try {
      arm = driver->choose(round.contexts, t);
      reward = env.sample_reward(env_rng, arm, round);
      driver->observe(arm, round.contexts, reward);
    } catch (const NumericalError& e) {
      throw NumericalError("round " + std::to_string(t) + ": " + e.what());
    }

    RoundRecord row;
    row.round = t;
    row.arm = arm;
    row.reward = reward;
    row.exp_reward = round.expected[arm];
    row.exp_best = round.expected[round.best];
    row.inst_regret = row.exp_best - row.exp_reward;
    cum += row.inst_regret;
    realized += row.exp_best - reward;
    row.cum_regret = cum;
    if (const LevelDecision* d = driver->last_decision()) {
      row.branch = d->branch;
      row.level = d->level;
      row.survivors = d->survivors;
    }
    result.trace.rows.push_back(row);
    chosen.push_back(round.contexts[static_cast<std::size_t>(arm)]);
    rewards.push_back(reward);
  }
  result.realized_regret = realized;

  const double gamma = config.policy_cfg.gamma;
  const double delta = config.policy_cfg.eta.delta;
  if (config.spectrum) {
    const Eigen::MatrixXd gram = config.policy_cfg.kernel.gram_matrix(chosen);
    result.spectrum = diagnostics::spectrum_report(gram, gamma, static_cast<double>(config.horizon),
                                                   static_cast<double>(config.num_arms), delta,
                                                   env.theta_norm());
  }

  auto checkpoint = std::make_shared<nlohmann::json>();
  (*checkpoint)["kernel"] = config.policy_cfg.kernel.to_json();
  (*checkpoint)["gamma"] = gamma;
  (*checkpoint)["horizon"] = config.horizon;
  (*checkpoint)["num_arms"] = config.num_arms;
  (*checkpoint)["delta"] = delta;
  (*checkpoint)["theta_norm"] = env.theta_norm();
  nlohmann::json hist = nlohmann::json::array();
  for (const Context& c : chosen) hist.push_back(context_to_json(c));
  (*checkpoint)["history"] = std::move(hist);
  (*checkpoint)["rewards"] = rewards;
  result.checkpoint_ = std::move(checkpoint);
  return result;
}

std::string rep_tag(int rep) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%03d", rep);
  return buf;
}

nlohmann::json summary_to_json(const ExperimentConfig& config, const ExperimentResult& result,
                               const Summary& summary) {
  nlohmann::json j;
  j["policy"] = config.policy == ExperimentConfig::Policy::KernelUcb       ? "kernelucb"
                : config.policy == ExperimentConfig::Policy::SupKernelUcb ? "supkernelucb"
                                                                          : "uniform";
  j["kernel"] = config.policy_cfg.kernel.name();
  j["gamma"] = config.policy_cfg.gamma;
  j["T"] = config.horizon;
  j["N"] = config.num_arms;
  j["replications"] = config.replications;
  j["seed"] = config.seed;
  j["checkpoints"] = summary.checkpoints;
  j["mean_cum_regret"] = summary.mean_cum_regret;
  j["sd_cum_regret"] = summary.sd_cum_regret;
  if (summary.has_spectra) {
    j["mean_effective_dim"] = summary.mean_effective_dim;
    j["mean_info_gain"] = summary.mean_info_gain;
  }
  nlohmann::json finals = nlohmann::json::array();
  nlohmann::json realized = nlohmann::json::array();
  for (const auto& rep : result.replications) {
    finals.push_back(rep.trace.final_regret());
    realized.push_back(rep.realized_regret);
  }
  j["final_cum_regret"] = std::move(finals);
  j["final_realized_regret"] = std::move(realized);
  return j;
}

}  // namespace
}  // namespace detail

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  ExperimentResult result;
  result.replications.resize(static_cast<std::size_t>(config.replications));

  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const int stride = static_cast<int>(std::min<unsigned>(hw, 8));
  for (int base = 0; base < config.replications; base += stride) {
    const int end = std::min(config.replications, base + stride);
    std::vector<std::future<ReplicationResult>> batch;
    for (int rep = base; rep < end; ++rep)
      batch.push_back(std::async(end - base == 1 ? std::launch::deferred : std::launch::async,
                                 detail::run_replication, std::cref(config), rep));
    for (int rep = base; rep < end; ++rep)
      result.replications[static_cast<std::size_t>(rep)] = batch[static_cast<std::size_t>(rep - base)].get();
  }

  if (!config.out_dir.empty()) {
    namespace fs = std::filesystem;
    fs::create_directories(config.out_dir);
    for (int rep = 0; rep < config.replications; ++rep) {
      const auto& r = result.replications[static_cast<std::size_t>(rep)];
      const std::string tag = detail::rep_tag(rep);
      std::ofstream csv(fs::path(config.out_dir) / ("rep_" + tag + ".csv"), std::ios::binary);
      csv << detail::trace_to_csv(r.trace);
      std::ofstream ck(fs::path(config.out_dir) / ("checkpoint_" + tag + ".json"));
      ck << r.checkpoint()->dump(2) << '\n';
      if (r.spectrum) {
        std::ofstream sp(fs::path(config.out_dir) / ("spectrum_" + tag + ".json"));
        sp << r.spectrum->to_json().dump(2) << '\n';
      }
    }
    std::vector<RegretTrace> traces;
    std::vector<diagnostics::SpectrumReport> spectra;
    for (const auto& r : result.replications) {
      traces.push_back(r.trace);
      if (r.spectrum) spectra.push_back(*r.spectrum);
    }
    const Summary summary = summarize(traces, spectra);
    std::ofstream sj(fs::path(config.out_dir) / "summary.json");
    sj << detail::summary_to_json(config, result, summary).dump(2) << '\n';
  }
  return result;
}

Summary summarize(const std::vector<RegretTrace>& traces,
                  const std::vector<diagnostics::SpectrumReport>& spectra) {
  if (traces.empty()) throw ConfigError("summarize needs at least one trace");
  Summary s;
  s.horizon = traces.front().rows.empty() ? 0 : traces.front().rows.back().round;
  s.checkpoints = {std::max<long>(1, s.horizon / 10), std::max<long>(1, s.horizon / 2), s.horizon};
  for (long cp : s.checkpoints) {
    double mean = 0.0;
    for (const auto& t : traces) mean += t.cum_regret_at(cp);
    mean /= static_cast<double>(traces.size());
    double var = 0.0;
    for (const auto& t : traces) {
      const double d = t.cum_regret_at(cp) - mean;
      var += d * d;
    }
    var /= static_cast<double>(traces.size());
    s.mean_cum_regret.push_back(mean);
    s.sd_cum_regret.push_back(std::sqrt(var));
  }
  if (!spectra.empty()) {
    s.has_spectra = true;
    for (const auto& sp : spectra) {
      s.mean_effective_dim += static_cast<double>(sp.effective_dim);
      s.mean_info_gain += sp.info_gain;
    }
    s.mean_effective_dim /= static_cast<double>(spectra.size());
    s.mean_info_gain /= static_cast<double>(spectra.size());
  }
  return s;
}

}  // namespace kucb
