#pragma once

#include <stdexcept>
#include <string>

namespace kucb {

/// Raised when a linear-algebra step loses enough precision that the
/// result can no longer be trusted (Schur pivot collapse, failed
/// factorization, a matrix that is negative beyond tolerance).
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

/// Invalid experiment configuration (bad key, out-of-range value,
/// unreadable input file). Maps to CLI exit code 1.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

}  // namespace kucb
