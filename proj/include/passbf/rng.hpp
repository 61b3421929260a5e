#pragma once

#include <cmath>
#include <cstdint>

#include "passbf/types.hpp"

namespace passbf {

/// Counter-based SplitMix64. value(key, i) depends only on (key, i), so streams
/// can be regenerated in any order:
///   z = key + (i + 1) * 0x9E3779B97F4A7C15
///   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
///   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
///   value = z ^ (z >> 31)
/// Uniform doubles take the top 53 bits: (value >> 11) * 2^-53.
struct SplitMix64 {
  static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }
  static std::uint64_t value(std::uint64_t key, std::uint64_t i) { return mix(key + (i + 1) * kGolden); }
  static double uniform(std::uint64_t key, std::uint64_t i) {
    return static_cast<double>(value(key, i) >> 11) * 0x1.0p-53;
  }
};

/// Sequential view over a counter stream.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t key) : key_(key) {}
  std::uint64_t next_u64() { return SplitMix64::value(key_, counter_++); }
  double uniform() { return SplitMix64::uniform(key_, counter_++); }
  /// Box-Muller; consumes two uniforms per call.
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace passbf
