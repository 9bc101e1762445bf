#include "doctest.h"

#include "cacs/rng.hpp"

using namespace cacs;

TEST_CASE("SplitMix64 reproduces the reference sequence") {
  SplitMix64 r0(0);
  CHECK(r0.next() == 0xe220a8397b1dcdafULL);
  CHECK(r0.next() == 0x6e789e6aa1b965f4ULL);
  CHECK(r0.next() == 0x06c45d188009454fULL);

  SplitMix64 r42(42);
  CHECK(r42.next() == 0xbdd732262feb6e95ULL);
  CHECK(r42.next() == 0x28efe333b266f103ULL);

  SplitMix64 big(0x123456789abcdef0ULL);
  CHECK(big.next() == 0x161922c645ce50e8ULL);
}

TEST_CASE("SplitMix64 state is the whole generator") {
  SplitMix64 a(999);
  a.next();
  a.next();
  SplitMix64 b(0);
  b.state = a.state;
  for (int i = 0; i < 16; ++i) CHECK(a.next() == b.next());
}

TEST_CASE("below and unit stay in range") {
  SplitMix64 r(7);
  for (int i = 0; i < 200; ++i) {
    CHECK(r.below(13) < 13);
    double u = r.unit();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  CHECK(r.below(0) == 0);
}

TEST_CASE("fnv1a matches the published constants") {
  CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a("cacs") == 0xb5277390e84a0bf7ULL);
}

TEST_CASE("mix_seed separates nearby inputs") {
  CHECK(mix_seed(1, 1) != mix_seed(1, 2));
  CHECK(mix_seed(1, 2) != mix_seed(2, 1));
  CHECK(mix_seed(0, 0) != 0);
}
