#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"
#include "keystream_stats.hpp"
#include "support.hpp"
#include "wmark/error.hpp"
#include "wmark/keystream.hpp"

using namespace wmark;
using namespace wmark::testing;

TEST_CASE("seed vector for key 50 matches the reference generator") {
  std::ifstream in(golden_dir() / "seed_vector_key50.txt");
  REQUIRE(in);
  std::string line;
  std::getline(in, line);  // comment
  std::getline(in, line);
  std::istringstream seeds_line(line);
  const SeedVector sv = derive_seed_vector(WatermarkKey(50));
  for (int k = 0; k < kSlotCount; ++k) {
    std::uint32_t expected = 0;
    seeds_line >> expected;
    CHECK(sv.seeds[k] == expected);
  }
  std::getline(in, line);
  std::istringstream samples_line(line);
  const auto g = gaussian_sequence(50, 8);
  for (double v : g) {
    double expected = 0.0;
    samples_line >> expected;
    CHECK(v == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("derive_seed_vector is deterministic, distinct and in range") {
  for (std::int64_t k : {50, 100, 200, 350, 700}) {
    const SeedVector a = derive_seed_vector(WatermarkKey(k));
    const SeedVector b = derive_seed_vector(WatermarkKey(k));
    CHECK(a.seeds == b.seeds);
    CHECK(a.seeds[0] == k);
    const std::set<std::uint32_t> unique(a.seeds.begin(), a.seeds.end());
    CHECK(unique.size() == kSlotCount);
    for (auto s : a.seeds) CHECK((s >= 1 && s <= kMaxSeed));
  }
}

TEST_CASE("seed vectors of 10000 keys have pairwise distinct seeds") {
  MixStream keys(12345);
  int bad = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto k = static_cast<std::int64_t>(1 + keys.next() % kMaxSeed);
    const SeedVector sv = derive_seed_vector(WatermarkKey(k));
    const std::set<std::uint32_t> unique(sv.seeds.begin(), sv.seeds.end());
    if (unique.size() != kSlotCount) ++bad;
  }
  CHECK(bad == 0);
}

TEST_CASE("invalid keys") {
  CHECK_THROWS_AS(WatermarkKey(0), Error);
  CHECK_THROWS_AS(WatermarkKey(-5), Error);
  CHECK_THROWS_AS(WatermarkKey(static_cast<std::int64_t>(kMaxSeed) + 1), Error);
  CHECK(WatermarkKey(kMaxSeed).value() == kMaxSeed);
}

TEST_CASE("gaussian_sequence is bitwise reproducible and prefix-stable") {
  const auto a = gaussian_sequence(777, 1001);
  const auto b = gaussian_sequence(777, 1001);
  CHECK(a == b);
  const auto c = gaussian_sequence(777, 10);
  CHECK(std::equal(c.begin(), c.end(), a.begin()));
}

TEST_CASE("gaussian_sequence moments and KS distance at n = 100000") {
  for (std::uint32_t seed : {1u, 50u, 123456789u}) {
    const auto g = gaussian_sequence(seed, 100000);
    CHECK(std::abs(mean_of(g)) < 0.013);
    CHECK(std::abs(variance_of(g) - 1.0) < 0.026);
    CHECK(ks_normal(g) < 0.01);
  }
}

TEST_CASE("sequences from different seeds are uncorrelated") {
  const double bound = 4.0 / std::sqrt(16000.0);
  const SeedVector sv = derive_seed_vector(WatermarkKey(50));
  std::vector<std::vector<double>> seqs;
  for (auto s : sv.seeds) seqs.push_back(gaussian_sequence(s, 16000));
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    for (std::size_t j = i + 1; j < seqs.size(); ++j) {
      CHECK(std::abs(correlation(seqs[i], seqs[j])) < bound);
    }
  }
  const auto other = gaussian_sequence(100, 16000);
  CHECK(std::abs(correlation(seqs[0], other)) < bound);
}
