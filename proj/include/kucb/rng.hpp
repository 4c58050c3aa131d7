#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <random>

// Hand-rolled draws on top of mt19937_64. The standard <random>
// distributions are implementation-defined, which would break the
// bit-for-bit reproducibility the harness promises; these are not.
namespace kucb::rng {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Derives an independent stream seed from a master seed and a stream tag.
inline std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632BE59BD9B4E019ULL));
}

/// Uniform double in [0, 1), 53 random bits.
inline double uniform01(std::mt19937_64& g) {
  return std::ldexp(static_cast<double>(g() >> 11), -53);
}

/// Uniform integer in [0, n).
inline int uniform_below(std::mt19937_64& g, int n) {
  int k = static_cast<int>(uniform01(g) * n);
  return k < n ? k : n - 1;
}

/// Standard normal via Box-Muller (two uniforms per draw).
inline double normal(std::mt19937_64& g) {
  const double u1 = 1.0 - uniform01(g);  // (0, 1]
  const double u2 = uniform01(g);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

/// Uniform direction on the unit sphere in R^d.
inline Eigen::VectorXd unit_sphere(std::mt19937_64& g, int d) {
  Eigen::VectorXd v(d);
  double n2 = 0.0;
  do {
    for (int i = 0; i < d; ++i) v[i] = normal(g);
    n2 = v.squaredNorm();
  } while (n2 < 1e-24);
  return v / std::sqrt(n2);
}

/// Uniform on [-1,1]^d, then scaled into the unit ball.
inline Eigen::VectorXd box_to_ball(std::mt19937_64& g, int d) {
  Eigen::VectorXd v(d);
  for (int i = 0; i < d; ++i) v[i] = 2.0 * uniform01(g) - 1.0;
  const double n = v.norm();
  if (n > 1.0) v /= n;
  return v;
}

}  // namespace kucb::rng
