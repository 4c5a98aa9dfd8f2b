#pragma once

#include <cstdint>
#include <limits>

namespace lockstack {

/// Counter-based, splittable random bit generator.
///
/// Output number n of a stream is a bijective 64-bit mix of `key + n * gamma`
/// (the SplitMix64 output function), so a stream is fully described by its key
/// and counter. `split` derives child keys from the parent key and a stream id;
/// replications and models each draw from their own child stream, which keeps
/// results independent of scheduling order.
///
/// Satisfies UniformRandomBitGenerator, so it plugs into <random> distributions.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0) : key_{mix(seed ^ kSeedSalt)} {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return mix(key_ + (++counter_) * kGamma); }

  /// Child stream `stream`. Splitting does not advance the parent.
  [[nodiscard]] Rng split(std::uint64_t stream) const {
    Rng child;
    child.key_ = mix(key_ ^ mix(stream * kGamma + kSplitSalt));
    return child;
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  [[nodiscard]] std::uint64_t key() const { return key_; }
  [[nodiscard]] std::uint64_t counter() const { return counter_; }

 private:
  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;
  static constexpr std::uint64_t kSeedSalt = 0x6a09e667f3bcc908ULL;
  static constexpr std::uint64_t kSplitSalt = 0xbb67ae8584caa73bULL;

  static constexpr std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace lockstack
