#pragma once

#include <Eigen/Core>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "kucb/context.hpp"

namespace kucb {

/// Which kernel defines the RKHS. Immutable after construction; every
/// operation is pure, so a KernelSpec can be shared across threads freely.
///
/// Analytic kernels operate on feature vectors:
///   linear      k(x,y) = x.y
///   rbf         k(x,y) = exp(-|x-y|^2 / (2 sigma^2))
///   polynomial  k(x,y) = (x.y + 1)^p
/// The precomputed kernel looks entries up in a fixed similarity matrix and
/// expects id-mode contexts.
class KernelSpec {
 public:
  enum class Kind { Linear, Rbf, Polynomial, Precomputed };

  static KernelSpec linear();
  static KernelSpec rbf(double bandwidth = 1.0);
  static KernelSpec polynomial(int degree);

  /// Validates symmetry (1e-9 relative) and positive semi-definiteness
  /// (smallest eigenvalue >= -1e-8 * max|S|), then symmetrizes exactly.
  static KernelSpec precomputed(Eigen::MatrixXd similarity);

  /// CSV format: first line M, then M rows of M comma-separated values.
  static KernelSpec precomputed_from_csv(const std::string& path);

  Kind kind() const { return kind_; }
  double bandwidth() const { return bandwidth_; }
  int degree() const { return degree_; }
  const Eigen::MatrixXd& similarity() const;

  double eval(const Context& a, const Context& b) const;
  double operator()(const Context& a, const Context& b) const { return eval(a, b); }

  /// [k(x, h) for h in history]; empty history gives a length-0 vector.
  Eigen::VectorXd gram_vector(const Context& x, const std::vector<Context>& history) const;

  /// Exactly symmetric: the upper triangle is computed and mirrored.
  Eigen::MatrixXd gram_matrix(const std::vector<Context>& contexts) const;

  nlohmann::json to_json() const;
  static KernelSpec from_json(const nlohmann::json& j);

  std::string name() const;

 private:
  KernelSpec() = default;

  Kind kind_ = Kind::Linear;
  double bandwidth_ = 1.0;
  int degree_ = 1;
  std::shared_ptr<const Eigen::MatrixXd> similarity_;
};

}  // namespace kucb
