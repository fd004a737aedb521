#pragma once

// Counter-based, splittable generator.
//
// Stream definition (reproducible in any language):
//   mix(z):  z ^= z >> 30; z *= 0xbf58476d1ce4e5b9;
//            z ^= z >> 27; z *= 0x94d049bb133111eb; z ^= z >> 31   (SplitMix64 finalizer)
//   key(seed)            = mix(seed + 0x9e3779b97f4a7c15)
//   split(key, stream)   = mix(key ^ mix(stream + 0x9e3779b97f4a7c15))
//   draw n (n = 0,1,...) = mix(key + (n + 1) * 0x9e3779b97f4a7c15)
//   uniform double       = (draw >> 11) * 2^-53
//   normal               = Box-Muller on two consecutive uniforms u1, u2:
//                          sqrt(-2 ln(1 - u1)) * cos(2 pi u2)

#include <cmath>
#include <cstdint>
#include <numbers>

namespace adsgnn {

class CounterRng {
 public:
  static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

  static constexpr std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ULL;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebULL;
    z ^= z >> 31;
    return z;
  }

  explicit CounterRng(std::uint64_t seed) : key_(mix(seed + kGolden)) {}

  /// Independent child stream; does not advance this generator.
  CounterRng split(std::uint64_t stream) const {
    CounterRng child(0);
    child.key_ = mix(key_ ^ mix(stream + kGolden));
    child.counter_ = 0;
    return child;
  }

  std::uint64_t next_u64() {
    ++counter_;
    return mix(key_ + counter_ * kGolden);
  }

  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n) by rejection on the top bits.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t v = next_u64();
    while (v >= limit) v = next_u64();
    return v % n;
  }

  double normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log1p(-u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace adsgnn
