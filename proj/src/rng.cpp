#include "bagcn/rng.hpp"

#include <cmath>

namespace bagcn {

double Rng::normal() {
  if (has_cached_) {
    has_cached_ = false;
    return cached_;
  }
  double u, v, s;
  do {
    u = uniform(-1.0, 1.0);
    v = uniform(-1.0, 1.0);
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  double scale = std::sqrt(-2.0 * std::log(s) / s);
  cached_ = v * scale;
  has_cached_ = true;
  return u * scale;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  // one SplitMix64 scramble of (seed advanced by stream) gives well-separated
  // starting states even for adjacent seeds/streams
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace bagcn
