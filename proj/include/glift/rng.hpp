#pragma once

#include <cstdint>

namespace glift {

// Stateless counter-based generator built from the SplitMix64 finalizer.
// word(i) depends only on (seed, stream, i), so entities can draw their own
// values in any order and still reproduce bit-identically. Uses integer ops
// only; derived floats use IEEE-754 multiply, so sequences are identical
// across platforms.
class CounterRng {
 public:
  CounterRng(uint64_t seed, uint64_t stream)
      : base_(finalize(seed * kGolden + finalize(stream + kGolden))) {}

  uint64_t word(uint64_t counter) const {
    return finalize(base_ + (counter + 1) * kGolden);
  }

  // uniform in [0, 1), 53-bit mantissa
  double uniform(uint64_t counter) const {
    return static_cast<double>(word(counter) >> 11) * 0x1.0p-53;
  }

  double uniform(uint64_t counter, double lo, double hi) const {
    return lo + (hi - lo) * uniform(counter);
  }

  // Irwin-Hall approximation to a standard normal (sum of 12 uniforms minus
  // 6). Needs only additions, which keeps generation platform-exact.
  double normal(uint64_t counter) const {
    double s = 0.0;
    for (uint64_t k = 0; k < 12; ++k) s += uniform(counter * 12 + k);
    return s - 6.0;
  }

 private:
  static constexpr uint64_t kGolden = 0x9E3779B97F4A7C15ull;

  static uint64_t finalize(uint64_t x) {
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
  }

  uint64_t base_;
};

}  // namespace glift
