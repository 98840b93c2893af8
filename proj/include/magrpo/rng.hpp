#pragma once

// Named deterministic random streams. Every random draw in the project comes
// from a stream derived from (seed, labels...), so a rollout member's draws
// depend only on its own labels, never on scheduling or on other members.
// The generator is splitmix64: fully specified arithmetic, identical output
// on every platform.

#include <cstdint>
#include <initializer_list>
#include <vector>

#include "magrpo/core.hpp"

namespace magrpo {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ull;

inline std::uint64_t mix64(std::uint64_t z) {
  z += kGolden;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

class RngStream {
 public:
  explicit RngStream(std::uint64_t key) : state_(mix64(key ^ kGolden)) {}

  std::uint64_t next_u64() {
    state_ += kGolden;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1), 53 bits of precision.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform in [0, n), unbiased via masked rejection.
  std::uint64_t next_below(std::uint64_t n) {
    MAGRPO_REQUIRE(n > 0, "next_below: n must be positive");
    if (n == 1) return 0;
    std::uint64_t mask = ~0ull >> __builtin_clzll(n - 1);
    for (;;) {
      std::uint64_t v = next_u64() & mask;
      if (v < n) return v;
    }
  }

  // Samples an index from an explicit probability vector by walking the CDF
  // in index order. The caller guarantees the probabilities sum to ~1.
  int categorical(const std::vector<double>& probs) {
    MAGRPO_REQUIRE(!probs.empty(), "categorical: empty probability vector");
    double u = next_double();
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      acc += probs[i];
      if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(probs.size()) - 1;
  }

 private:
  std::uint64_t state_;
};

// Derives a stream key from a seed and a label path, e.g.
// {episode, member} or {kEvalLabel, sample}. Order-sensitive and collision
// resistant enough for distinct small label paths.
inline std::uint64_t derive_key(std::uint64_t seed,
                                std::initializer_list<std::uint64_t> labels) {
  std::uint64_t k = mix64(seed);
  for (std::uint64_t label : labels) k = mix64(k ^ mix64(label));
  return k;
}

inline RngStream derive_stream(std::uint64_t seed,
                               std::initializer_list<std::uint64_t> labels) {
  return RngStream(derive_key(seed, labels));
}

// Label constants keeping the project's stream namespace collision-free.
constexpr std::uint64_t kTaskLabel = 0x7461736bull;    // task sampling
constexpr std::uint64_t kMemberLabel = 0x6d656d62ull;  // rollout members
constexpr std::uint64_t kEvalLabel = 0x6576616cull;    // evaluation samples

}  // namespace magrpo
