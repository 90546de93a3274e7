#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <vector>

#include "rcml/rng.hpp"

using namespace rcml;

TEST_CASE("mix_seed derives distinct deterministic streams") {
  CHECK(mix_seed(7, 0) == mix_seed(7, 0));
  CHECK(mix_seed(7, 0) != mix_seed(7, 1));
  CHECK(mix_seed(7, 0) != mix_seed(8, 0));
  // No short-range collisions among the stream tags the pipeline uses.
  std::set<std::uint64_t> seen;
  for (std::uint64_t base : {0ULL, 1ULL, 2ULL, 42ULL}) {
    for (std::uint64_t stream = 0; stream < 64; ++stream) {
      seen.insert(mix_seed(base, stream));
    }
  }
  CHECK(seen.size() == 4 * 64);
}

TEST_CASE("next_u64 replays the standard mt19937_64 stream") {
  std::mt19937_64 ref(42);
  Rng rng(42);
  for (int i = 0; i < 100; ++i) CHECK(rng.next_u64() == ref());
}

TEST_CASE("next_unit maps raw draws to [0, 1) with 53-bit resolution") {
  std::mt19937_64 ref(7);
  Rng rng(7);
  for (int i = 0; i < 200; ++i) {
    const double expected = static_cast<double>(ref() >> 11) * 0x1.0p-53;
    const double got = rng.next_unit();
    CHECK(got == expected);
    CHECK(got >= 0.0);
    CHECK(got < 1.0);
  }
}

TEST_CASE("uniform stays inside its interval") {
  Rng rng(3);
  for (int i = 0; i < 500; ++i) {
    const double x = rng.uniform(-2.5, 4.0);
    CHECK(x >= -2.5);
    CHECK(x < 4.0);
  }
}

TEST_CASE("below is bounded, exhaustive, and rejects n = 0") {
  Rng rng(11);
  CHECK_THROWS_AS(rng.below(0), std::invalid_argument);
  for (int i = 0; i < 50; ++i) CHECK(rng.below(1) == 0);
  std::set<std::uint64_t> hit;
  for (int i = 0; i < 2000; ++i) {
    const std::uint64_t x = rng.below(7);
    CHECK(x < 7);
    hit.insert(x);
  }
  CHECK(hit.size() == 7);
}

TEST_CASE("normal draws consume two uniforms via Box-Muller") {
  std::mt19937_64 ref(19);
  Rng rng(19);
  for (int i = 0; i < 100; ++i) {
    const double u1 = 1.0 - static_cast<double>(ref() >> 11) * 0x1.0p-53;
    const double u2 = static_cast<double>(ref() >> 11) * 0x1.0p-53;
    const double expected = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    CHECK(rng.normal() == expected);
  }
}

TEST_CASE("normal has roughly standard moments") {
  Rng rng(23);
  const int n = 20000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    CHECK(std::isfinite(x));
    sum += x;
    sumsq += x * x;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  CHECK(std::abs(mean) < 0.05);
  CHECK(var == doctest::Approx(1.0).epsilon(0.1));
}

TEST_CASE("shuffle permutes without losing elements") {
  Rng rng(5);
  std::vector<int> v{1, 2, 3, 4, 5, 6, 7, 8};
  const std::vector<int> original = v;
  rng.shuffle(v);
  std::vector<int> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == original);

  // Same seed gives the same permutation.
  Rng rng2(5);
  std::vector<int> w = original;
  rng2.shuffle(w);
  CHECK(w == v);

  std::vector<int> empty;
  rng.shuffle(empty);
  CHECK(empty.empty());
  std::vector<int> one{9};
  rng.shuffle(one);
  CHECK(one == std::vector<int>{9});
}

TEST_CASE("choose returns ascending distinct indices") {
  Rng rng(31);
  for (int rep = 0; rep < 50; ++rep) {
    const auto picked = rng.choose(20, 6);
    REQUIRE(picked.size() == 6);
    CHECK(std::is_sorted(picked.begin(), picked.end()));
    CHECK(std::set<std::size_t>(picked.begin(), picked.end()).size() == 6);
    for (std::size_t idx : picked) CHECK(idx < 20);
  }
  CHECK(rng.choose(4, 0).empty());
  const auto all = rng.choose(5, 5);
  CHECK(all == std::vector<std::size_t>{0, 1, 2, 3, 4});
  CHECK_THROWS_AS(rng.choose(3, 4), std::invalid_argument);
}

TEST_CASE("choose is uniform enough over small cases") {
  // Each 2-subset of {0,1,2,3} should appear with frequency near 1/6.
  Rng rng(77);
  std::map<std::pair<std::size_t, std::size_t>, int> counts;
  const int n = 12000;
  for (int i = 0; i < n; ++i) {
    const auto p = rng.choose(4, 2);
    counts[{p[0], p[1]}]++;
  }
  CHECK(counts.size() == 6);
  for (const auto& [pair, count] : counts) {
    CHECK(count > n / 6 - n / 30);
    CHECK(count < n / 6 + n / 30);
  }
}
