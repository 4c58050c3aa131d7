#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <utility>
#include <variant>

#include "kucb/errors.hpp"

namespace kucb {

/// One action's context: either a feature vector (analytic kernels) or an
/// opaque row index into a precomputed similarity matrix.
class Context {
 public:
  Context() : value_(Eigen::VectorXd()) {}

  static Context from_features(Eigen::VectorXd features) {
    if (!features.allFinite())
      throw ConfigError("context features must be finite (no NaN/Inf)");
    Context c;
    c.value_ = std::move(features);
    return c;
  }

  static Context from_id(std::size_t id) {
    Context c;
    c.value_ = id;
    return c;
  }

  bool has_features() const { return std::holds_alternative<Eigen::VectorXd>(value_); }

  const Eigen::VectorXd& features() const {
    if (!has_features())
      throw ConfigError("kernel mode mismatch: similarity-id context where features expected");
    return std::get<Eigen::VectorXd>(value_);
  }

  std::size_t id() const {
    if (has_features())
      throw ConfigError("kernel mode mismatch: feature context where similarity id expected");
    return std::get<std::size_t>(value_);
  }

 private:
  std::variant<Eigen::VectorXd, std::size_t> value_;
};

inline bool identical(const Context& a, const Context& b) {
  if (a.has_features() != b.has_features()) return false;
  if (!a.has_features()) return a.id() == b.id();
  return a.features().size() == b.features().size() &&
         (a.features().array() == b.features().array()).all();
}

}  // namespace kucb
