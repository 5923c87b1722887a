#pragma once

#include <cmath>
#include <cstdint>

namespace evasim {

/// PCG32 generator. Hand-rolled so that streams are reproducible across
/// platforms and standard-library versions; std::mt19937 distributions are
/// not bit-stable across implementations.
class Pcg32 {
 public:
  /// Distinct (seed, stream) pairs give statistically independent sequences.
  explicit Pcg32(std::uint64_t seed, std::uint64_t stream = 0) {
    inc_ = (stream << 1u) | 1u;
    state_ = 0u;
    next_u32();
    state_ += seed;
    next_u32();
  }

  std::uint32_t next_u32() {
    const std::uint64_t old = state_;
    state_ = old * 6364136223846793005ULL + inc_;
    const std::uint32_t xorshifted = static_cast<std::uint32_t>(((old >> 18u) ^ old) >> 27u);
    const std::uint32_t rot = static_cast<std::uint32_t>(old >> 59u);
    return (xorshifted >> rot) | (xorshifted << ((-rot) & 31u));
  }

  /// Unbiased integer in [0, bound); bound must be > 0.
  std::uint32_t next_below(std::uint32_t bound) {
    const std::uint32_t threshold = (-bound) % bound;
    for (;;) {
      const std::uint32_t r = next_u32();
      if (r >= threshold) return r % bound;
    }
  }

  /// Uniform double in [0, 1).
  double uniform() { return next_u32() * 0x1.0p-32; }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  bool bernoulli(double p) { return uniform() < p; }

  /// Standard normal via Box-Muller; caches the second deviate.
  double gaussian() {
    if (has_cache_) {
      has_cache_ = false;
      return cache_;
    }
    const double u1 = (next_u32() + 0.5) * 0x1.0p-32;  // (0, 1), keeps log finite
    const double u2 = next_u32() * 0x1.0p-32;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 2.0 * M_PI * u2;
    cache_ = r * std::sin(t);
    has_cache_ = true;
    return r * std::cos(t);
  }

  double gaussian(double mean, double stddev) { return mean + stddev * gaussian(); }

 private:
  std::uint64_t state_ = 0;
  std::uint64_t inc_ = 1;
  double cache_ = 0.0;
  bool has_cache_ = false;
};

}  // namespace evasim
