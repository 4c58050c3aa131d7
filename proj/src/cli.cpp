#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "kucb/errors.hpp"
#include "kucb/harness.hpp"

namespace kucb {

namespace {

namespace fs = std::filesystem;

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

long parse_long(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const long v = std::stol(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' needs an integer, got '" + value + "'");
  }
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' needs a number, got '" + value + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  const std::string v = lower(value);
  if (v == "on" || v == "true" || v == "1" || v == "yes") return true;
  if (v == "off" || v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config key '" + key + "' needs on/off, got '" + value + "'");
}

std::map<std::string, std::string> read_key_values(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + " is not 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + " has no key");
    kv[key] = value;
  }
  return kv;
}

}  // namespace

ExperimentConfig config_from_map(const std::map<std::string, std::string>& kv) {
  ExperimentConfig cfg;

  // Kernel first: other keys only parameterize it.
  std::string kernel_kind = "rbf";
  double bandwidth = 1.0;
  int degree = 2;
  std::string matrix_path;
  std::string eta_mode = "constant";
  double eta_value = 1.0;
  double eta_delta = 0.05;
  std::string env_noise = "noiseless";
  double noise_sd = 0.1;

  for (const auto& [key, value] : kv) {
    if (key == "policy") {
      const std::string v = lower(value);
      if (v == "kernelucb") cfg.policy = ExperimentConfig::Policy::KernelUcb;
      else if (v == "supkernelucb") cfg.policy = ExperimentConfig::Policy::SupKernelUcb;
      else if (v == "uniform" || v == "uniformrandom") cfg.policy = ExperimentConfig::Policy::UniformRandom;
      else throw ConfigError("unknown policy: " + value);
    } else if (key == "kernel") {
      kernel_kind = lower(value);
    } else if (key == "kernel.bandwidth") {
      bandwidth = parse_double(key, value);
    } else if (key == "kernel.degree") {
      degree = static_cast<int>(parse_long(key, value));
    } else if (key == "kernel.matrix") {
      matrix_path = value;
    } else if (key == "gamma") {
      cfg.policy_cfg.gamma = parse_double(key, value);
    } else if (key == "recompute_every") {
      const long v = parse_long(key, value);
      if (v < 1) throw ConfigError("recompute_every must be positive");
      cfg.policy_cfg.recompute_every = static_cast<std::size_t>(v);
    } else if (key == "eta.mode") {
      eta_mode = lower(value);
    } else if (key == "eta.value") {
      eta_value = parse_double(key, value);
    } else if (key == "eta.delta") {
      eta_delta = parse_double(key, value);
    } else if (key == "T") {
      cfg.horizon = parse_long(key, value);
    } else if (key == "N") {
      cfg.num_arms = static_cast<int>(parse_long(key, value));
    } else if (key == "replications") {
      cfg.replications = static_cast<int>(parse_long(key, value));
    } else if (key == "seed") {
      cfg.seed = static_cast<std::uint64_t>(parse_long(key, value));
    } else if (key == "out_dir") {
      cfg.out_dir = value;
    } else if (key == "spectrum") {
      cfg.spectrum = parse_bool(key, value);
    } else if (key == "env.type") {
      const std::string v = lower(value);
      if (v == "linear") cfg.env.type = EnvConfig::Type::Linear;
      else if (v == "rkhs") cfg.env.type = EnvConfig::Type::Rkhs;
      else if (v == "scripted") cfg.env.type = EnvConfig::Type::Scripted;
      else throw ConfigError("unknown env.type: " + value);
    } else if (key == "env.d") {
      cfg.env.dim = static_cast<int>(parse_long(key, value));
    } else if (key == "env.noise") {
      env_noise = lower(value);
    } else if (key == "env.noise.sd") {
      noise_sd = parse_double(key, value);
    } else if (key == "env.theta_norm") {
      cfg.env.theta_norm = parse_double(key, value);
    } else if (key == "env.anchors") {
      cfg.env.anchors = static_cast<int>(parse_long(key, value));
    } else if (key == "env.script") {
      cfg.env.script_path = value;
    } else {
      throw ConfigError("unknown config key: " + key);
    }
  }

  if (kernel_kind == "linear") cfg.policy_cfg.kernel = KernelSpec::linear();
  else if (kernel_kind == "rbf") cfg.policy_cfg.kernel = KernelSpec::rbf(bandwidth);
  else if (kernel_kind == "polynomial" || kernel_kind == "poly")
    cfg.policy_cfg.kernel = KernelSpec::polynomial(degree);
  else if (kernel_kind == "precomputed") {
    if (matrix_path.empty()) throw ConfigError("precomputed kernel needs kernel.matrix");
    cfg.policy_cfg.kernel = KernelSpec::precomputed_from_csv(matrix_path);
  } else {
    throw ConfigError("unknown kernel: " + kernel_kind);
  }

  if (eta_mode == "constant") cfg.policy_cfg.eta = EtaSchedule::constant(eta_value);
  else if (eta_mode == "theory") {
    cfg.policy_cfg.eta = EtaSchedule::theory(eta_delta, cfg.horizon, cfg.num_arms);
  } else {
    throw ConfigError("unknown eta.mode: " + eta_mode);
  }

  if (env_noise == "noiseless") cfg.env.noise = NoiseModel::noiseless();
  else if (env_noise == "bernoulli") cfg.env.noise = NoiseModel::bernoulli();
  else if (env_noise == "gaussian" || env_noise == "truncgaussian")
    cfg.env.noise = NoiseModel::trunc_gaussian(noise_sd);
  else throw ConfigError("unknown env.noise: " + env_noise);

  return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
  return config_from_map(read_key_values(path));
}

namespace {

void print_summary(const Summary& s) {
  std::cout << "round,mean_cum_regret,sd_cum_regret\n";
  for (std::size_t i = 0; i < s.checkpoints.size(); ++i)
    std::cout << s.checkpoints[i] << ',' << detail::format_double(s.mean_cum_regret[i]) << ','
              << detail::format_double(s.sd_cum_regret[i]) << '\n';
  if (s.has_spectra)
    std::cout << "mean_effective_dim," << detail::format_double(s.mean_effective_dim)
              << "\nmean_info_gain," << detail::format_double(s.mean_info_gain) << '\n';
}

std::vector<fs::path> sorted_matches(const std::string& dir, const std::string& prefix,
                                     const std::string& suffix) {
  if (!fs::is_directory(dir)) throw ConfigError("not a directory: " + dir);
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind(prefix, 0) == 0 && name.size() > suffix.size() &&
        name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0)
      out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

int cmd_run(const std::map<std::string, std::string>& options) {
  std::map<std::string, std::string> kv;
  if (auto it = options.find("config"); it != options.end()) kv = read_key_values(it->second);
  for (const auto& [key, value] : options)
    if (key != "config") kv[key] = value;
  const ExperimentConfig cfg = config_from_map(kv);
  const ExperimentResult result = run_experiment(cfg);
  std::vector<RegretTrace> traces;
  std::vector<diagnostics::SpectrumReport> spectra;
  for (const auto& rep : result.replications) {
    traces.push_back(rep.trace);
    if (rep.spectrum) spectra.push_back(*rep.spectrum);
  }
  print_summary(summarize(traces, spectra));
  if (!cfg.out_dir.empty()) std::cout << "wrote " << cfg.out_dir << "\n";
  return 0;
}

int cmd_report(const std::map<std::string, std::string>& options) {
  const auto it = options.find("dir");
  if (it == options.end()) throw ConfigError("report needs --dir <path>");
  const std::string dir = it->second;

  std::vector<RegretTrace> traces;
  for (const auto& path : sorted_matches(dir, "rep_", ".csv")) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    traces.push_back(detail::trace_from_csv(buf.str()));
  }
  if (traces.empty()) throw ConfigError("no rep_*.csv traces in " + dir);
  std::vector<diagnostics::SpectrumReport> spectra;
  for (const auto& path : sorted_matches(dir, "spectrum_", ".json")) {
    std::ifstream in(path);
    nlohmann::json j;
    in >> j;
    spectra.push_back(diagnostics::SpectrumReport::from_json(j));
  }
  const Summary summary = summarize(traces, spectra);

  nlohmann::json j;
  const fs::path summary_path = fs::path(dir) / "summary.json";
  if (fs::exists(summary_path)) {
    std::ifstream in(summary_path);
    in >> j;
  }
  j["checkpoints"] = summary.checkpoints;
  j["mean_cum_regret"] = summary.mean_cum_regret;
  j["sd_cum_regret"] = summary.sd_cum_regret;
  if (summary.has_spectra) {
    j["mean_effective_dim"] = summary.mean_effective_dim;
    j["mean_info_gain"] = summary.mean_info_gain;
  }
  nlohmann::json finals = nlohmann::json::array();
  for (const auto& t : traces) finals.push_back(t.final_regret());
  j["final_cum_regret"] = std::move(finals);
  std::ofstream out(summary_path);
  out << j.dump(2) << '\n';

  print_summary(summary);
  return 0;
}

int cmd_spectrum(const std::map<std::string, std::string>& options) {
  const auto it = options.find("dir");
  if (it == options.end()) throw ConfigError("spectrum needs --dir <path>");
  const std::string dir = it->second;

  const auto checkpoints = sorted_matches(dir, "checkpoint_", ".json");
  if (checkpoints.empty()) throw ConfigError("no checkpoint_*.json in " + dir);
  for (const auto& path : checkpoints) {
    std::ifstream in(path);
    nlohmann::json j;
    in >> j;
    const KernelSpec kernel = KernelSpec::from_json(j.at("kernel"));
    std::vector<Context> history;
    for (const auto& cj : j.at("history")) history.push_back(context_from_json(cj));
    const Eigen::MatrixXd gram = kernel.gram_matrix(history);
    const auto report = diagnostics::spectrum_report(
        gram, j.at("gamma").get<double>(), j.at("horizon").get<double>(),
        j.at("num_arms").get<double>(), j.at("delta").get<double>(),
        j.at("theta_norm").get<double>());

    std::string name = path.filename().string();  // checkpoint_XYZ.json -> spectrum_XYZ.json
    name.replace(0, std::string("checkpoint").size(), "spectrum");
    std::ofstream out(fs::path(dir) / name);
    out << report.to_json().dump(2) << '\n';
    std::cout << name << ",effective_dim=" << report.effective_dim
              << ",info_gain=" << detail::format_double(report.info_gain) << '\n';
  }
  return 0;
}

const char* kUsage =
    "usage:\n"
    "  kucb run [--config <file>] [--<key> <value> ...]   run an experiment\n"
    "  kucb report --dir <path>                           re-summarize traces\n"
    "  kucb spectrum --dir <path>                         recompute diagnostics\n"
    "\n"
    "Any config key can be overridden as a flag, e.g. --T 2000 --gamma 0.5\n"
    "--env.noise bernoulli. Exit codes: 0 ok, 1 config error, 2 numerical\n"
    "breakdown.\n";

}  // namespace

int cli_main(const std::vector<std::string>& args) {
  try {
    if (args.empty() || args[0] == "--help" || args[0] == "-h" || args[0] == "help") {
      std::cout << kUsage;
      return args.empty() ? 1 : 0;
    }
    const std::string command = args[0];
    std::map<std::string, std::string> options;
    for (std::size_t i = 1; i < args.size(); ++i) {
      const std::string& arg = args[i];
      if (arg.rfind("--", 0) != 0)
        throw ConfigError("expected --key value pairs, got '" + arg + "'");
      if (i + 1 >= args.size()) throw ConfigError("flag '" + arg + "' needs a value");
      options[arg.substr(2)] = args[++i];
    }
    if (command == "run") return cmd_run(options);
    if (command == "report") return cmd_report(options);
    if (command == "spectrum") return cmd_spectrum(options);
    std::cerr << "unknown command: " << command << '\n' << kUsage;
    return 1;
  } catch (const NumericalError& e) {
    std::cerr << "numerical breakdown: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace kucb
