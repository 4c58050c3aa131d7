#include "kucb/diagnostics.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "kucb/errors.hpp"

namespace kucb::diagnostics {

Eigen::VectorXd gram_eigenvalues(const Eigen::MatrixXd& k) {
  if (k.rows() != k.cols()) throw ConfigError("gram matrix must be square");
  if (k.rows() == 0) return Eigen::VectorXd();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(k, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericalError("gram eigendecomposition failed");
  Eigen::VectorXd eigs = es.eigenvalues();
  const double scale = std::max(k.cwiseAbs().maxCoeff(), 1e-300);
  const double floor = -1e-8 * scale;
  for (Eigen::Index i = 0; i < eigs.size(); ++i) {
    if (eigs[i] < floor)
      throw NumericalError("gram matrix not PSD within tolerance: eigenvalue " +
                           std::to_string(eigs[i]));
    if (eigs[i] < 0.0) eigs[i] = 0.0;
  }
  std::sort(eigs.data(), eigs.data() + eigs.size(), std::greater<double>());
  return eigs;
}

EffectiveDimension effective_dimension(const Eigen::VectorXd& eigs_decreasing, double gamma,
                                       double horizon) {
  if (!(gamma > 0.0)) throw ConfigError("gamma must be strictly positive");
  if (!(horizon >= 2.0)) throw ConfigError("effective dimension needs horizon >= 2");
  const double log_t = std::log(horizon);
  const auto n = eigs_decreasing.size();
  for (Eigen::Index i = 0; i + 1 < n; ++i)
    if (eigs_decreasing[i] < eigs_decreasing[i + 1])
      throw ConfigError("eigenvalues must be sorted decreasing");

  EffectiveDimension out;
  out.tail_sums.assign(static_cast<std::size_t>(n) + 1, 0.0);
  // Accumulate the tail back to front so Lambda_{j-1} - Lambda_j = lambda_j holds exactly.
  for (Eigen::Index j = n - 1; j >= 0; --j)
    out.tail_sums[static_cast<std::size_t>(j)] =
        out.tail_sums[static_cast<std::size_t>(j) + 1] + std::max(0.0, eigs_decreasing[j]);

  out.value = std::max<long>(1, n);
  for (long j = 1; j <= n; ++j) {
    if (static_cast<double>(j) * gamma * log_t >= out.tail_sums[static_cast<std::size_t>(j)]) {
      out.value = j;
      break;
    }
  }
  return out;
}

double information_gain_from_eigs(const Eigen::VectorXd& eigs, double sigma2) {
  if (!(sigma2 > 0.0)) throw ConfigError("sigma2 must be strictly positive");
  double gain = 0.0;
  for (Eigen::Index i = 0; i < eigs.size(); ++i)
    gain += std::log1p(std::max(0.0, eigs[i]) / sigma2);
  return gain;
}

double information_gain(const Eigen::MatrixXd& k, double sigma2) {
  return information_gain_from_eigs(gram_eigenvalues(k), sigma2);
}

double theorem1_bound(double d_eff, double horizon, double num_arms, double gamma, double delta,
                      double theta_norm) {
  if (!(horizon >= 2.0)) throw ConfigError("theorem1_bound needs horizon >= 2");
  if (!(d_eff >= 1.0) || !(num_arms >= 1.0) || !(gamma > 0.0) || !(delta > 0.0 && delta < 1.0) ||
      !(theta_norm >= 0.0))
    throw ConfigError("theorem1_bound parameter out of range");
  const double log_t = std::log(horizon);
  const double two_log = 2.0 * std::log(2.0 * horizon * num_arms * (1.0 + log_t) / delta);
  const double l_t = std::max(std::log(horizon / (d_eff * gamma) + 1.0), log_t);
  const double theta_term = 2.0 * (1.0 + std::sqrt(gamma / two_log)) * theta_norm;
  const double width_term =
      8.0 * std::sqrt((12.0 + 15.0 / gamma) * l_t * l_t * l_t) * std::sqrt(two_log);
  return (2.0 + theta_term + width_term) * std::sqrt(d_eff * horizon);
}

LinUcbScore linucb_oracle(const std::vector<Eigen::VectorXd>& contexts,
                          const std::vector<double>& rewards, double gamma,
                          const Eigen::VectorXd& query, double eta) {
  if (contexts.size() != rewards.size())
    throw ConfigError("linucb oracle: contexts and rewards must align");
  if (!(gamma > 0.0)) throw ConfigError("gamma must be strictly positive");
  const Eigen::Index d = query.size();
  Eigen::MatrixXd c = gamma * Eigen::MatrixXd::Identity(d, d);
  Eigen::VectorXd xty = Eigen::VectorXd::Zero(d);
  for (std::size_t i = 0; i < contexts.size(); ++i) {
    if (contexts[i].size() != d) throw ConfigError("linucb oracle: dimension mismatch");
    c.selfadjointView<Eigen::Lower>().rankUpdate(contexts[i], 1.0);
    xty += rewards[i] * contexts[i];
  }
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(c.selfadjointView<Eigen::Lower>());
  const double mu = query.dot(ldlt.solve(xty));
  const double sigma = std::sqrt(std::max(0.0, query.dot(ldlt.solve(query))));
  return LinUcbScore{mu, sigma, mu + eta * sigma};
}

SpectrumReport spectrum_report(const Eigen::MatrixXd& gram, double gamma, double horizon,
                               double num_arms, double delta, double theta_norm) {
  SpectrumReport r;
  r.eigenvalues = gram_eigenvalues(gram);
  r.gamma = gamma;
  r.horizon = horizon;
  r.theta_norm = theta_norm;
  r.delta = delta;
  r.num_arms = num_arms;
  auto ed = effective_dimension(r.eigenvalues, gamma, horizon);
  r.effective_dim = ed.value;
  r.tail_sums = std::move(ed.tail_sums);
  r.info_gain = information_gain_from_eigs(r.eigenvalues, gamma);
  r.theorem1 =
      theorem1_bound(static_cast<double>(r.effective_dim), horizon, num_arms, gamma, delta,
                     theta_norm);
  return r;
}

nlohmann::json SpectrumReport::to_json() const {
  nlohmann::json j;
  j["eigenvalues"] = std::vector<double>(eigenvalues.data(), eigenvalues.data() + eigenvalues.size());
  j["gamma"] = gamma;
  j["horizon"] = horizon;
  j["tail_sums"] = tail_sums;
  j["effective_dim"] = effective_dim;
  j["info_gain"] = info_gain;
  j["theorem1_bound"] = theorem1;
  j["theta_norm"] = theta_norm;
  j["delta"] = delta;
  j["num_arms"] = num_arms;
  return j;
}

SpectrumReport SpectrumReport::from_json(const nlohmann::json& j) {
  SpectrumReport r;
  const auto eigs = j.at("eigenvalues").get<std::vector<double>>();
  r.eigenvalues.resize(static_cast<Eigen::Index>(eigs.size()));
  for (std::size_t i = 0; i < eigs.size(); ++i) r.eigenvalues[static_cast<Eigen::Index>(i)] = eigs[i];
  r.gamma = j.at("gamma").get<double>();
  r.horizon = j.at("horizon").get<double>();
  r.tail_sums = j.at("tail_sums").get<std::vector<double>>();
  r.effective_dim = j.at("effective_dim").get<long>();
  r.info_gain = j.at("info_gain").get<double>();
  r.theorem1 = j.at("theorem1_bound").get<double>();
  r.theta_norm = j.value("theta_norm", 0.0);
  r.delta = j.value("delta", 0.05);
  r.num_arms = j.value("num_arms", 0.0);
  return r;
}

}  // namespace kucb::diagnostics
