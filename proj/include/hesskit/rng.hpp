#pragma once

#include <cstdint>
#include <cmath>

namespace hesskit {

// 64-bit avalanche mix (splitmix64 finalizer).
constexpr std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ULL;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBULL;
  z ^= z >> 31;
  return z;
}

/// Counter-based random stream. Output i depends only on (key, i), where
/// the key is derived from (master_seed, stream_index). Substreams for
/// different indices are statistically independent and can be consumed in
/// any order across threads without affecting each other.
class RngStream {
 public:
  RngStream(std::uint64_t master_seed, std::uint64_t stream_index)
      : key_(mix64(mix64(master_seed ^ 0x6A09E667F3BCC909ULL) +
                   stream_index * kGamma)) {}

  std::uint64_t next_u64() { return mix64(key_ + (++counter_) * kGamma); }

  /// Uniform in the open interval (0, 1).
  double next_uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller. Two uniforms per call, no caching,
  /// so the draw count stays predictable.
  double next_gaussian() {
    const double u1 = next_uniform();
    const double u2 = next_uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  double next_rademacher() { return (next_u64() >> 63) ? 1.0 : -1.0; }

 private:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace hesskit
