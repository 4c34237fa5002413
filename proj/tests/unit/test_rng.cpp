#include <doctest.h>

#include <cmath>
#include <set>

#include "bagcn/rng.hpp"

using namespace bagcn;

TEST_CASE("splitmix64 matches the published reference sequence") {
  // test vectors from the reference implementation (seed 0 and seed 42)
  Rng r0(0);
  CHECK(r0.next_u64() == 0xe220a8397b1dcdafULL);
  CHECK(r0.next_u64() == 0x6e789e6aa1b965f4ULL);
  CHECK(r0.next_u64() == 0x06c45d188009454fULL);
  CHECK(r0.next_u64() == 0xf88bb8a8724c81ecULL);

  Rng r42(42);
  CHECK(r42.next_u64() == 0xbdd732262feb6e95ULL);
  CHECK(r42.next_u64() == 0x28efe333b266f103ULL);
  CHECK(r42.next_u64() == 0x47526757130f9f52ULL);
}

TEST_CASE("uniform is deterministic and in [0,1)") {
  Rng r(0);
  CHECK(r.uniform() == doctest::Approx(0.8833108082136426).epsilon(1e-15));
  Rng a(7), b(7);
  for (int i = 0; i < 1000; ++i) {
    double v = a.uniform();
    CHECK(v == b.uniform());
    CHECK(v >= 0.0);
    CHECK(v < 1.0);
  }
}

TEST_CASE("uniform(lo,hi) stays inside the interval") {
  Rng r(3);
  for (int i = 0; i < 1000; ++i) {
    double v = r.uniform(-2.5, 1.5);
    CHECK(v >= -2.5);
    CHECK(v < 1.5);
  }
}

TEST_CASE("normal has roughly standard moments") {
  Rng r(11);
  const int n = 100000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    double v = r.normal();
    sum += v;
    sumsq += v * v;
  }
  double mean = sum / n;
  double var = sumsq / n - mean * mean;
  CHECK(std::abs(mean) < 0.02);
  CHECK(std::abs(var - 1.0) < 0.03);
}

TEST_CASE("normal stream is reproducible") {
  Rng a(5), b(5);
  for (int i = 0; i < 100; ++i) CHECK(a.normal() == b.normal());
}

TEST_CASE("mix_seed separates streams and seeds") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t seed : {0ULL, 1ULL, 2ULL, 42ULL}) {
    for (std::uint64_t stream : {kStreamInit, kStreamDropout, kStreamSplit, kStreamSynth}) {
      for (std::uint64_t off : {0ULL, 1ULL, 2ULL, 12ULL}) {
        CHECK(seen.insert(mix_seed(seed, stream + off)).second);
      }
    }
  }
  // mixing must be stable across calls
  CHECK(mix_seed(1, kStreamInit) == mix_seed(1, kStreamInit));
}

TEST_CASE("streams from nearby seeds are decorrelated at the output level") {
  Rng a(mix_seed(0, kStreamInit));
  Rng b(mix_seed(1, kStreamInit));
  int agree = 0;
  for (int i = 0; i < 64; ++i) {
    agree += ((a.next_u64() ^ b.next_u64()) & 1) == 0;
  }
  // both streams share no obvious bit correlation; ~32 expected
  CHECK(agree > 10);
  CHECK(agree < 54);
}
