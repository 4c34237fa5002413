#pragma once

#include <cstdint>

namespace bagcn {

// Deterministic pseudo-random stream (SplitMix64 core). We roll our own
// instead of <random> because libstdc++/libc++ distributions are allowed to
// differ, and reproducibility guarantees here are part of the contract:
// the same seed must yield bitwise-identical parameter trajectories.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1), 53-bit resolution
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // standard normal via Marsaglia's polar method (no libm trig, so the
  // sequence depends only on the uniform stream)
  double normal();

 private:
  std::uint64_t state_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

// Decorrelates substreams: every (seed, stream) pair gets an independent Rng.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

// Substream namespaces. Parameter ids / dropout sites index within these, so
// two models that share a parameter draw identical initial values and two
// models that share a dropout site draw identical masks.
inline constexpr std::uint64_t kStreamInit = 0x10000;
inline constexpr std::uint64_t kStreamDropout = 0x20000;
inline constexpr std::uint64_t kStreamSplit = 0x30000;
inline constexpr std::uint64_t kStreamSynth = 0x40000;

}  // namespace bagcn
