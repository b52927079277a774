#pragma once

// Counter-based random numbers.
//
// Every draw is a pure function of (seed, stream, counter):
//   key    = mix64(seed ^ mix64(stream + 0x632be59bd9b4e019))
//   u64(n) = mix64(key + (n + 1) * 0x9e3779b97f4a7c15)
// where mix64 is the SplitMix64 finalizer. Outputs are identical on every
// platform and compiler.
//
// Stream splitting: each operation that consumes randomness opens its own
// stream id (see `streams` below) on the seed it was handed, so two
// operations invoked with the same seed never share draws. Experiment
// drivers derive one seed per parameter combination and replicate with
// derive_seed(base, index...).

#include <cmath>
#include <cstdint>
#include <numbers>

namespace codisp {

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) noexcept {
  return mix64(base ^ mix64(index ^ 0xd1b54a32d192ed03ULL));
}

constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) noexcept {
  return derive_seed(derive_seed(base, a), b);
}

namespace streams {
inline constexpr std::uint64_t kMixtureNoise = 1;
inline constexpr std::uint64_t kClassicNoise = 2;
inline constexpr std::uint64_t kRandomBlocks = 3;
inline constexpr std::uint64_t kGapAnchor = 4;
inline constexpr std::uint64_t kThinning = 5;
inline constexpr std::uint64_t kFieldCholesky = 6;
inline constexpr std::uint64_t kFieldCirculant = 7;
inline constexpr std::uint64_t kAr2dSimulation = 8;
inline constexpr std::uint64_t kSynthetic = 9;
}  // namespace streams

class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream) noexcept
      : key_(mix64(seed ^ mix64(stream + 0x632be59bd9b4e019ULL))) {}

  std::uint64_t next_u64() noexcept {
    ++counter_;
    return mix64(key_ + counter_ * 0x9e3779b97f4a7c15ULL);
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform on (0, 1].
  double uniform_open0() noexcept { return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53; }

  /// Uniform integer in [0, n), n > 0. Lemire-style rejection keeps it unbiased.
  std::uint64_t below(std::uint64_t n) noexcept {
    const std::uint64_t limit = (~std::uint64_t{0}) - (~std::uint64_t{0}) % n;
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % n;
  }

  bool bernoulli(double p) noexcept { return uniform() < p; }

  /// Standard normal by Box-Muller; the second variate is cached.
  double normal() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform_open0();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace codisp
