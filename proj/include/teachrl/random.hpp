#pragma once

#include <cstdint>
#include <limits>
#include <random>

namespace teachrl {

// Engine owned by every learning agent. Seeded explicitly; never from the clock.
using AgentRng = std::mt19937_64;

/// SplitMix64 finalizer. Bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Counter-based generator: the stream is a pure function of the key words,
/// so a draw keyed by (seed, episode, step) does not depend on how many
/// draws happened elsewhere. Satisfies UniformRandomBitGenerator.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  CounterRng(std::uint64_t seed, std::uint64_t a = 0, std::uint64_t b = 0)
      : state_(mix64(mix64(mix64(seed) ^ a) ^ b)) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix64(state_);
  }

 private:
  std::uint64_t state_;
};

/// Uniform double in [0, 1) from the top 53 bits of one draw.
template <class Urbg>
double uniform01(Urbg& rng) {
  static_assert(Urbg::max() == std::numeric_limits<std::uint64_t>::max() && Urbg::min() == 0);
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace teachrl
