#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace cidlab {

// SplitMix64 (Steele/Lea/Flood; Vigna's reference constants). The state
// walks a 64-bit counter with the golden-gamma increment and each output is
// a bijective hash of the state, so the stream for (seed, n-th draw) is
// fully portable across platforms and languages. Test vectors live in
// tests/test_rng.cpp.
class SplitMix64 {
 public:
  explicit SplitMix64(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform on (0, 1]: 53 top bits, shifted into (0,1] so log() is safe.
  double next_unit() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; draws two uniforms per pair and caches
  // the second variate.
  double next_normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = next_unit();
    double u2 = next_unit();
    double radius = std::sqrt(-2.0 * std::log(u1));
    double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    have_spare_ = true;
    return radius * std::cos(angle);
  }

  double next_normal(double mean, double sd) { return mean + sd * next_normal(); }

  // Derives an independent stream for a named substream; used so that
  // adding draws to one synthetic component never shifts another.
  SplitMix64 fork(uint64_t stream_tag) const {
    SplitMix64 mix(state_ ^ 0x5851F42D4C957F2DULL);
    for (uint64_t i = 0; i <= (stream_tag & 0x7); ++i) mix.next_u64();
    return SplitMix64(mix.next_u64() + stream_tag * 0x9E3779B97F4A7C15ULL);
  }

 private:
  uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace cidlab
