#pragma once

#include <cstdint>
#include <limits>

namespace fdsel {

// Substream domains. Each random consumer draws from its own keyed stream so
// that output never depends on evaluation order or worker count.
enum class StreamTag : std::uint64_t {
  ErrorCurve = 1,
  ChiSquare = 2,
  CurveOutlier = 3,
  LocalOutlier = 4,
  Mask = 5,
  Permutation = 6,
  Bootstrap = 7,
  Folds = 8,
  Experiment = 9,
};

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Counter-based generator: the k-th output is a hash of (key, k), where the
/// key is derived from (seed, tag, index). Satisfies UniformRandomBitGenerator.
class Stream {
 public:
  using result_type = std::uint64_t;

  Stream(std::uint64_t seed, StreamTag tag, std::uint64_t index) noexcept
      : key_(splitmix64(splitmix64(splitmix64(seed) ^
                                   static_cast<std::uint64_t>(tag)) ^
                        splitmix64(index + 0x632BE59BD9B4E019ULL))) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() noexcept {
    return splitmix64(key_ ^ splitmix64(counter_++));
  }

  /// Uniform double in [0, 1) with 53 bits of resolution.
  double uniform() noexcept {
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace fdsel
