#pragma once
#include <array>
#include <cstdint>
#include <limits>

namespace twinbeam {

/// Splittable random stream: xoshiro256** seeded through a SplitMix64 chain
/// from a (seed, stream) pair. Streams with distinct indices are statistically
/// independent, so batch generation can hand stream i to frame i and stay
/// reproducible for a fixed seed regardless of thread count or schedule.
///
/// Satisfies UniformRandomBitGenerator, so <random> distributions plug in
/// directly.
class RngStream {
public:
  using result_type = std::uint64_t;

  RngStream(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t x = seed;
    x = splitmix(x);
    x ^= stream;
    x = splitmix(x);
    for (auto &word : state_) {
      x = splitmix(x);
      word = x;
    }
    // xoshiro must not start from the all-zero state.
    if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0)
      state_[0] = 0x9E3779B97F4A7C15ULL;
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// SplitMix64 mixing step; also used standalone to derive sub-seeds.
  static std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
  }

private:
  static std::uint64_t rotl(std::uint64_t v, int k) { return (v << k) | (v >> (64 - k)); }

  std::array<std::uint64_t, 4> state_{};
};

/// Deterministically derives an independent sub-seed from (seed, stream).
/// Used to give each pipeline stage (calibration, per-alpha jobs, baselines)
/// its own seed lineage under one master seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t x = RngStream::splitmix(seed);
  x ^= stream;
  return RngStream::splitmix(x);
}

} // namespace twinbeam
