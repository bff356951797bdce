#include <doctest.h>

#include <cmath>
#include <vector>

#include "bilevel/rng.hpp"

using namespace bilevel;

TEST_CASE("identical (seed, label, counter) reproduces draws") {
  RngStream a(7, "t");
  RngStream b(7, "t");
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  RngStream s1(7, "t");
  RngStream s2(7, "t");
  const BatchIndices b1 = sample_batch(s1, 10, 3);
  const BatchIndices b2 = sample_batch(s2, 10, 3);
  CHECK(b1.indices == b2.indices);
}

TEST_CASE("distinct labels give distinct streams") {
  RngStream root(7, "root");
  RngStream a = root.child("a");
  RngStream b = root.child("b");
  int equal = 0;
  for (int i = 0; i < 64; ++i) {
    if (a.next_u64() == b.next_u64()) ++equal;
  }
  CHECK(equal == 0);
}

TEST_CASE("sample_batch advances the counter by one per index") {
  RngStream s(3, "counting");
  sample_batch(s, 17, 5);
  CHECK(s.counter() == 5);
}

TEST_CASE("single-element source always yields index 0") {
  RngStream s(99, "one");
  const BatchIndices b = sample_batch(s, 1, 4);
  CHECK(b.indices == std::vector<std::size_t>{0, 0, 0, 0});
}

TEST_CASE("sample_batch preconditions") {
  RngStream s(1, "pre");
  CHECK_THROWS_AS(sample_batch(s, 0, 3), InvalidArgumentError);
  CHECK_THROWS_AS(sample_batch(s, 3, 0), InvalidArgumentError);
}

TEST_CASE("index frequencies match the uniform law") {
  RngStream s(7, "lln");
  const BatchIndices b = sample_batch(s, 10, 10000);
  std::vector<int> counts(10, 0);
  for (std::size_t i : b.indices) counts[i]++;
  for (int c : counts) {
    const double freq = c / 10000.0;
    CHECK(freq >= 0.08);
    CHECK(freq <= 0.12);
  }
}

TEST_CASE("chi-square over 1e5 draws below the 99.9% quantile") {
  RngStream s(123, "chisq");
  const std::size_t n = 10;
  const std::size_t draws = 100000;
  std::vector<double> counts(n, 0.0);
  for (std::size_t i = 0; i < draws; ++i) counts[s.next_index(n)] += 1.0;
  const double expected = static_cast<double>(draws) / n;
  double chi2 = 0.0;
  for (double c : counts) chi2 += (c - expected) * (c - expected) / expected;
  CHECK(chi2 < 27.877);  // chi-square df=9, 99.9% quantile
}

TEST_CASE("gaussian moments") {
  RngStream s(5, "gauss");
  const int n = 40000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double g = s.next_gaussian();
    sum += g;
    sum_sq += g * g;
  }
  const double mean = sum / n;
  const double var = sum_sq / n - mean * mean;
  CHECK(std::abs(mean) < 0.03);
  CHECK(std::abs(var - 1.0) < 0.05);
}

TEST_CASE("uniform doubles live in [0, 1)") {
  RngStream s(11, "unif");
  for (int i = 0; i < 10000; ++i) {
    const double u = s.next_double();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}
