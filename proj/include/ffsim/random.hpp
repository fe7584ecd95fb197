#pragma once

#include <cstdint>
#include <limits>
#include <random>

namespace ffsim {

/// Deterministic random stream for one simulation run.
///
/// std::mt19937_64 output is fully specified by the standard, but the
/// std::*_distribution adaptors are not, so the conversions to doubles and
/// bounded integers are done here to keep results identical across
/// standard library implementations.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  static constexpr result_type min() { return std::numeric_limits<result_type>::min(); }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform on {0, ..., n-1}; rejection sampling, no modulo bias. n must be > 0.
  std::uint64_t index(std::uint64_t n) {
    const std::uint64_t limit = max() - max() % n;
    std::uint64_t draw = engine_();
    while (draw >= limit) draw = engine_();
    return draw % n;
  }

  // Always consumes exactly one draw.
  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace ffsim
