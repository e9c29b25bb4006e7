#pragma once

#include <cstdint>
#include <numbers>

namespace kgtopo {

/// Counter-based generator: the k-th draw of stream (seed, stream) is
/// splitmix64_mix(seed ^ stream_key(stream) + (k + 1) * golden_gamma).
///
/// Every value is a pure function of (seed, stream, k), so results are
/// identical across compilers and standard libraries. Bounded integers use
/// the multiply-shift map floor(x * n / 2^64); reals use the top 53 bits.
class CounterRng {
 public:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

  static constexpr std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Key for independent streams derived from one user seed.
  static constexpr std::uint64_t stream_key(std::uint64_t stream) {
    return mix(stream * 0xD1B54A32D192ED03ULL + 0x8CB92BA72F3D8DD7ULL);
  }

  constexpr explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
      : base_(seed ^ stream_key(stream)) {}

  /// Value at an absolute counter position; does not advance.
  constexpr std::uint64_t at(std::uint64_t k) const { return mix(base_ + (k + 1) * kGamma); }

  constexpr std::uint64_t next() { return at(counter_++); }

  /// Uniform integer in [0, n).
  constexpr std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next()) * n) >> 64);
  }

  /// Uniform real in [0, 1).
  constexpr double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Uniform real in [lo, hi).
  constexpr double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

  constexpr std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t base_;
  std::uint64_t counter_ = 0;
};

// Named streams, so each stochastic stage draws from its own sequence.
namespace streams {
inline constexpr std::uint64_t kSplit = 1;
inline constexpr std::uint64_t kInit = 2;
inline constexpr std::uint64_t kEpochOrder = 3;
inline constexpr std::uint64_t kNegatives = 4;
inline constexpr std::uint64_t kCaseStudy = 5;
}  // namespace streams

}  // namespace kgtopo
