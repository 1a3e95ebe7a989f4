#include <catch2/catch_amalgamated.hpp>

#include "dsta/sampling.hpp"

using namespace dsta;

TEST_CASE("one frame per chunk is forced when T equals N") {
  Rng rng(1);
  CHECK(restricted_random_sample(6, 6, rng) == std::vector<std::size_t>{0, 1, 2, 3, 4, 5});
}

TEST_CASE("samples stay inside their chunks for T=12 N=6") {
  Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const auto idx = restricted_random_sample(12, 6, rng);
    REQUIRE(idx.size() == 6);
    for (std::size_t i = 0; i < 6; ++i) {
      CHECK(idx[i] >= 2 * i);
      CHECK(idx[i] < 2 * i + 2);
    }
  }
}

TEST_CASE("short videos pad cyclically with size-1 chunks") {
  Rng rng(3);
  CHECK(restricted_random_sample(4, 6, rng) == std::vector<std::size_t>{0, 1, 2, 3, 0, 1});
  CHECK(first_frame_sample(4, 6) == std::vector<std::size_t>{0, 1, 2, 3, 0, 1});
}

TEST_CASE("first_frame_sample returns chunk starts") {
  CHECK(first_frame_sample(12, 6) == std::vector<std::size_t>{0, 2, 4, 6, 8, 10});
  CHECK(first_frame_sample(6, 6) == std::vector<std::size_t>{0, 1, 2, 3, 4, 5});
}

TEST_CASE("first_frame_sample for T=7 N=6 follows floor(n*T/N) boundaries") {
  // Oracle: enumerate the chunk boundaries by the stated formula.
  std::vector<std::size_t> expected;
  for (std::size_t n = 0; n < 6; ++n) expected.push_back(n * 7 / 6);
  CHECK(expected == std::vector<std::size_t>{0, 1, 2, 3, 4, 5});
  CHECK(first_frame_sample(7, 6) == expected);
}

TEST_CASE("indices strictly increase and occupy disjoint chunks whenever T >= N") {
  Rng rng(4);
  for (std::size_t t = 1; t <= 40; ++t) {
    for (std::size_t n = 1; n <= t; ++n) {
      const auto idx = restricted_random_sample(t, n, rng);
      REQUIRE(idx.size() == n);
      for (std::size_t i = 0; i < n; ++i) {
        const auto [lo, hi] = chunk_bounds(t, n, i);
        CHECK(idx[i] >= lo);
        CHECK(idx[i] < hi);
        if (i > 0) CHECK(idx[i] > idx[i - 1]);
      }
    }
  }
}

TEST_CASE("chunk sizes differ by at most one") {
  for (std::size_t t : {6, 7, 11, 13, 29, 100}) {
    for (std::size_t n : {1, 2, 3, 5, 6}) {
      if (n > t) continue;
      std::size_t min_sz = t, max_sz = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const auto [lo, hi] = chunk_bounds(t, n, i);
        min_sz = std::min(min_sz, hi - lo);
        max_sz = std::max(max_sz, hi - lo);
      }
      CHECK(max_sz - min_sz <= 1);
    }
  }
}

TEST_CASE("sampling is deterministic for a fixed seed") {
  Rng a(77), b(77);
  for (int trial = 0; trial < 20; ++trial)
    CHECK(restricted_random_sample(37, 6, a) == restricted_random_sample(37, 6, b));
}

TEST_CASE("within-chunk selection is uniform") {
  Rng rng(5);
  std::vector<std::size_t> low_count(6, 0);
  const int trials = 10000;
  for (int trial = 0; trial < trials; ++trial) {
    const auto idx = restricted_random_sample(12, 6, rng);
    for (std::size_t i = 0; i < 6; ++i)
      if (idx[i] == 2 * i) ++low_count[i];
  }
  for (std::size_t i = 0; i < 6; ++i) {
    const double freq = static_cast<double>(low_count[i]) / trials;
    CHECK(freq >= 0.45);
    CHECK(freq <= 0.55);
  }
}

TEST_CASE("zero frame or chunk counts are rejected") {
  Rng rng(6);
  CHECK_THROWS_AS(restricted_random_sample(0, 6, rng), Error);
  CHECK_THROWS_AS(restricted_random_sample(6, 0, rng), Error);
  CHECK_THROWS_AS(first_frame_sample(0, 6), Error);
  CHECK_THROWS_AS(first_frame_sample(6, 0), Error);
}
