#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "kucb/diagnostics.hpp"
#include "kucb/env.hpp"
#include "kucb/policy.hpp"
#include "kucb/sup_policy.hpp"

namespace kucb {

struct EnvConfig {
  enum class Type { Linear, Rkhs, Scripted };
  Type type = Type::Linear;
  int dim = 5;
  NoiseModel noise;
  double theta_norm = 1.0;
  int anchors = 8;
  std::string script_path;
};

struct ExperimentConfig {
  enum class Policy { KernelUcb, SupKernelUcb, UniformRandom };

  Policy policy = Policy::KernelUcb;
  PolicyConfig policy_cfg;
  EnvConfig env;
  long horizon = 1000;      // T
  int num_arms = 5;         // N
  int replications = 1;
  std::uint64_t seed = 1;
  std::string out_dir;
  bool spectrum = true;

  void validate() const;
};

/// One simulated round, CSV row for the trace files. branch/level/survivors
/// stay zero for policies without level structure (written as empty fields).
struct RoundRecord {
  long round = 0;
  int arm = 0;
  double reward = 0.0;
  double exp_reward = 0.0;
  double exp_best = 0.0;
  double inst_regret = 0.0;
  double cum_regret = 0.0;
  int branch = 0;
  int level = 0;
  int survivors = 0;
};

struct RegretTrace {
  std::vector<RoundRecord> rows;

  double cum_regret_at(long round) const;
  double final_regret() const { return rows.empty() ? 0.0 : rows.back().cum_regret; }
};

struct ReplicationResult {
  RegretTrace trace;
  std::optional<diagnostics::SpectrumReport> spectrum;
  double realized_regret = 0.0;  // sum of (exp_best - realized reward)
  nlohmann::json* checkpoint() { return checkpoint_.get(); }
  const nlohmann::json* checkpoint() const { return checkpoint_.get(); }
  std::shared_ptr<nlohmann::json> checkpoint_;
};

struct ExperimentResult {
  std::vector<ReplicationResult> replications;
};

/// Runs every replication (in parallel when cores allow; each owns its seed
/// stream and state) and, when out_dir is set, writes one trace CSV, one
/// checkpoint JSON and one spectrum JSON per replication plus summary.json.
/// Fully deterministic given (config, seed).
ExperimentResult run_experiment(const ExperimentConfig& config);

struct Summary {
  long horizon = 0;
  std::vector<long> checkpoints;             // T/10, T/2, T
  std::vector<double> mean_cum_regret;
  std::vector<double> sd_cum_regret;         // population convention
  double mean_effective_dim = 0.0;
  double mean_info_gain = 0.0;
  bool has_spectra = false;
};

Summary summarize(const std::vector<RegretTrace>& traces,
                  const std::vector<diagnostics::SpectrumReport>& spectra = {});

/// Key-value config file: one `key = value` per line, '#' comments.
ExperimentConfig parse_config_file(const std::string& path);
ExperimentConfig config_from_map(const std::map<std::string, std::string>& kv);

/// `kucb run|report|spectrum ...`. Returns the process exit code:
/// 0 success, 1 configuration error, 2 numerical breakdown.
int cli_main(const std::vector<std::string>& args);

namespace detail {
std::string format_double(double v);
std::string trace_to_csv(const RegretTrace& trace);
RegretTrace trace_from_csv(const std::string& text);
Environment build_environment(const ExperimentConfig& config, std::uint64_t build_seed,
                              std::uint64_t calibration_seed);
}  // namespace detail

}  // namespace kucb
