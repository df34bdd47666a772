#pragma once

#include <cstdint>
#include <random>

namespace jmls {

/// Portable random stream: std::mt19937_64 (bit-exact by the C++ standard)
/// with uniforms built from the top 53 bits, u = (b + 0.5) 2^-53 in (0, 1),
/// and standard normals by inverse CDF, x = -sqrt(2) erfc^{-1}(2u) using
/// Boost.Math. No library distribution objects are involved, so a seed
/// reproduces the same stream on every conforming platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform();
  double normal();
  /// Index drawn from unnormalised nonnegative weights.
  template <typename Weights>
  std::size_t categorical(const Weights& w) {
    double total = 0.0;
    for (auto v : w) total += static_cast<double>(v);
    const double target = uniform() * total;
    double acc = 0.0;
    std::size_t last = 0;
    std::size_t i = 0;
    for (auto v : w) {
      if (static_cast<double>(v) > 0.0) last = i;
      acc += static_cast<double>(v);
      if (target < acc) return i;
      ++i;
    }
    return last;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace jmls
