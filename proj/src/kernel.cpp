#include "kucb/kernel.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "kucb/errors.hpp"

namespace kucb {

KernelSpec KernelSpec::linear() {
  KernelSpec k;
  k.kind_ = Kind::Linear;
  return k;
}

KernelSpec KernelSpec::rbf(double bandwidth) {
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth))
    throw ConfigError("rbf bandwidth must be strictly positive");
  KernelSpec k;
  k.kind_ = Kind::Rbf;
  k.bandwidth_ = bandwidth;
  return k;
}

KernelSpec KernelSpec::polynomial(int degree) {
  if (degree < 1) throw ConfigError("polynomial degree must be a positive integer");
  KernelSpec k;
  k.kind_ = Kind::Polynomial;
  k.degree_ = degree;
  return k;
}

KernelSpec KernelSpec::precomputed(Eigen::MatrixXd similarity) {
  if (similarity.rows() != similarity.cols() || similarity.rows() == 0)
    throw ConfigError("similarity matrix must be square and non-empty");
  const double scale = similarity.cwiseAbs().maxCoeff();
  const double asym = (similarity - similarity.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-9 * std::max(scale, 1e-300))
    throw ConfigError("similarity matrix not symmetric: max|S - S^T| = " + std::to_string(asym));

  Eigen::MatrixXd sym = 0.5 * (similarity + similarity.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success)
    throw NumericalError("eigendecomposition of similarity matrix failed");
  const double min_eig = es.eigenvalues().minCoeff();
  if (min_eig < -1e-8 * scale)
    throw ConfigError("similarity matrix not positive semi-definite: smallest eigenvalue " +
                      std::to_string(min_eig));

  KernelSpec k;
  k.kind_ = Kind::Precomputed;
  k.similarity_ = std::make_shared<const Eigen::MatrixXd>(std::move(sym));
  return k;
}

KernelSpec KernelSpec::precomputed_from_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open similarity file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("similarity file is empty: " + path);
  long m = 0;
  try {
    m = std::stol(line);
  } catch (const std::exception&) {
    throw ConfigError("similarity file must start with the matrix size M: " + path);
  }
  if (m <= 0) throw ConfigError("similarity matrix size must be positive");

  Eigen::MatrixXd s(m, m);
  for (long i = 0; i < m; ++i) {
    if (!std::getline(in, line))
      throw ConfigError("similarity file truncated at row " + std::to_string(i + 1));
    std::stringstream row(line);
    std::string cell;
    for (long j = 0; j < m; ++j) {
      if (!std::getline(row, cell, ','))
        throw ConfigError("similarity row " + std::to_string(i + 1) + " has fewer than M values");
      try {
        s(i, j) = std::stod(cell);
      } catch (const std::exception&) {
        throw ConfigError("bad similarity value '" + cell + "' at row " + std::to_string(i + 1));
      }
    }
  }
  return precomputed(std::move(s));
}

const Eigen::MatrixXd& KernelSpec::similarity() const {
  if (kind_ != Kind::Precomputed)
    throw ConfigError("similarity() is only available for precomputed kernels");
  return *similarity_;
}

namespace {

const Eigen::VectorXd& checked_features(const Context& c, Eigen::Index expected_dim) {
  const Eigen::VectorXd& f = c.features();
  if (expected_dim >= 0 && f.size() != expected_dim)
    throw ConfigError("feature dimension mismatch: " + std::to_string(f.size()) + " vs " +
                      std::to_string(expected_dim));
  return f;
}

}  // namespace

double KernelSpec::eval(const Context& a, const Context& b) const {
  if (kind_ == Kind::Precomputed) {
    const auto m = static_cast<std::size_t>(similarity_->rows());
    const std::size_t i = a.id();
    const std::size_t j = b.id();
    if (i >= m || j >= m)
      throw ConfigError("similarity id out of range: " + std::to_string(std::max(i, j)) +
                        " >= " + std::to_string(m));
    return (*similarity_)(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
  const Eigen::VectorXd& x = a.features();
  const Eigen::VectorXd& y = checked_features(b, x.size());
  switch (kind_) {
    case Kind::Linear:
      return x.dot(y);
    case Kind::Rbf:
      return std::exp(-(x - y).squaredNorm() / (2.0 * bandwidth_ * bandwidth_));
    case Kind::Polynomial:
      return std::pow(x.dot(y) + 1.0, static_cast<double>(degree_));
    default:
      throw ConfigError("unknown kernel kind");
  }
}

Eigen::VectorXd KernelSpec::gram_vector(const Context& x, const std::vector<Context>& history) const {
  Eigen::VectorXd v(static_cast<Eigen::Index>(history.size()));
  for (std::size_t i = 0; i < history.size(); ++i)
    v[static_cast<Eigen::Index>(i)] = eval(x, history[i]);
  return v;
}

Eigen::MatrixXd KernelSpec::gram_matrix(const std::vector<Context>& contexts) const {
  const auto n = static_cast<Eigen::Index>(contexts.size());
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i; j < n; ++j) {
      const double v = eval(contexts[i], contexts[j]);
      k(i, j) = v;
      k(j, i) = v;
    }
  return k;
}

std::string KernelSpec::name() const {
  switch (kind_) {
    case Kind::Linear: return "linear";
    case Kind::Rbf: return "rbf";
    case Kind::Polynomial: return "polynomial";
    case Kind::Precomputed: return "precomputed";
  }
  return "?";
}

nlohmann::json KernelSpec::to_json() const {
  nlohmann::json j;
  j["kind"] = name();
  switch (kind_) {
    case Kind::Rbf:
      j["bandwidth"] = bandwidth_;
      break;
    case Kind::Polynomial:
      j["degree"] = degree_;
      break;
    case Kind::Precomputed: {
      const auto m = similarity_->rows();
      nlohmann::json rows = nlohmann::json::array();
      for (Eigen::Index i = 0; i < m; ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index jj = 0; jj < m; ++jj) row.push_back((*similarity_)(i, jj));
        rows.push_back(std::move(row));
      }
      j["similarity"] = std::move(rows);
      break;
    }
    default:
      break;
  }
  return j;
}

KernelSpec KernelSpec::from_json(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "linear") return linear();
  if (kind == "rbf") return rbf(j.value("bandwidth", 1.0));
  if (kind == "polynomial") return polynomial(j.at("degree").get<int>());
  if (kind == "precomputed") {
    const auto& rows = j.at("similarity");
    const auto m = static_cast<Eigen::Index>(rows.size());
    Eigen::MatrixXd s(m, m);
    for (Eigen::Index i = 0; i < m; ++i)
      for (Eigen::Index jj = 0; jj < m; ++jj) s(i, jj) = rows[i][jj].get<double>();
    return precomputed(std::move(s));
  }
  throw ConfigError("unknown kernel kind: " + kind);
}

}  // namespace kucb
