#include "doctest.h"
#include "glassbox/error.hpp"
#include "glassbox/metrics.hpp"
#include "glassbox/random.hpp"
#include "test_support.hpp"

using namespace glassbox;

TEST_CASE("accuracy") {
  const std::vector<double> s1 = {0.9, 0.1};
  const std::vector<double> s2 = {0.9, 0.9};
  const std::vector<int> y = {1, 0};
  CHECK(accuracy(s1, y) == 1.0);
  CHECK(accuracy(s2, y) == 0.5);
  // tie at the threshold counts as positive
  const std::vector<double> at = {0.5};
  const std::vector<int> pos = {1};
  CHECK(accuracy(at, pos) == 1.0);
  CHECK_THROWS_AS(accuracy(std::vector<double>{}, std::vector<int>{}), UsageError);
}

TEST_CASE("auc") {
  const std::vector<int> y = {1, 0};
  CHECK(*auc(std::vector<double>{0.9, 0.1}, y) == 1.0);
  CHECK(*auc(std::vector<double>{0.5, 0.5}, y) == 0.5);
  CHECK_FALSE(auc(std::vector<double>{0.2, 0.8}, std::vector<int>{1, 1}).has_value());
}

TEST_CASE("auc agrees with pairwise counting and ignores monotone transforms") {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + rng.below(60);
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(rng.below(10)) / 10.0;  // many ties
      y[i] = rng.bernoulli(0.5) ? 1 : 0;
    }
    y[0] = 1;
    y[1] = 0;
    const auto a = auc(s, y);
    REQUIRE(a.has_value());
    CHECK(*a == doctest::Approx(testing::brute_force_auc(s, y)).epsilon(1e-12));
    std::vector<double> t(n);
    for (std::size_t i = 0; i < n; ++i) t[i] = std::exp(3.0 * s[i]) - 7.0;
    CHECK(*auc(t, y) == doctest::Approx(*a).epsilon(1e-12));
  }
}

TEST_CASE("f1") {
  const std::vector<int> y = {1, 1};
  CHECK(f1(std::vector<double>{0.9, 0.8}, y) == 1.0);
  CHECK(f1(std::vector<double>{0.1, 0.2}, std::vector<int>{0, 0}) == 0.0);
  // TP=1, FP=1, FN=1
  CHECK(f1(std::vector<double>{0.9, 0.9, 0.1}, std::vector<int>{1, 0, 1}) == doctest::Approx(0.5));
}

TEST_CASE("complementing predictions complements accuracy") {
  Rng rng(5);
  std::vector<double> s(101);
  std::vector<int> y(101);
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = rng.uniform();
    y[i] = rng.bernoulli(0.4) ? 1 : 0;
  }
  std::vector<double> flipped(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) flipped[i] = s[i] >= 0.5 ? 0.0 : 1.0;
  const double a = accuracy(s, y);
  CHECK(a >= 0.0);
  CHECK(a <= 1.0);
  CHECK(accuracy(flipped, y) == doctest::Approx(1.0 - a));
}
