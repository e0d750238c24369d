#include <cmath>
#include <cstdint>
#include <tuple>
#include <utility>
#include <vector>

#include "doctest.h"
#include "ghostcert/error.hpp"
#include "ghostcert/stats.hpp"
#include "oracles.hpp"

using namespace ghostcert;

TEST_SUITE("stats") {
  TEST_CASE("normal_quantile at the centre is zero") { CHECK(stats::normal_quantile(0.5) == doctest::Approx(0.0).epsilon(1e-15)); }

  TEST_CASE("normal_quantile matches a bisection oracle") {
    for (double p : {0.75, 0.999, 0.001, 0.025, 0.6, 1e-6, 1 - 1e-6, 0.3}) {
      CAPTURE(p);
      CHECK(std::abs(stats::normal_quantile(p) - oracle::phi_inverse(p)) < 1e-9);
    }
    CHECK(std::abs(stats::normal_quantile(0.75) - 0.674490) < 5e-7);
    CHECK(std::abs(stats::normal_quantile(0.999) - 3.090232) < 5e-7);
  }

  TEST_CASE("normal_quantile rejects values outside the open unit interval") {
    CHECK_THROWS_AS(stats::normal_quantile(0.0), DomainError);
    CHECK_THROWS_AS(stats::normal_quantile(1.0), DomainError);
    CHECK_THROWS_AS(stats::normal_quantile(-0.1), DomainError);
    CHECK_THROWS_AS(stats::normal_quantile(std::nan("")), DomainError);
  }

  TEST_CASE("quantile round trip holds on a log-spaced grid") {
    double worst = 0.0;
    for (int i = 0; i <= 2000; ++i) {
      const double t = -6.0 + 6.0 * i / 2000.0;
      for (double p : {std::pow(10.0, t), 1.0 - std::pow(10.0, t)}) {
        if (!(p > 0.0 && p < 1.0)) continue;
        worst = std::max(worst, std::abs(static_cast<double>(oracle::phi(stats::normal_quantile(p))) - p));
      }
    }
    CHECK(worst <= 1e-9);
  }

  TEST_CASE("quantile is antisymmetric") {
    for (double p : {0.51, 0.7, 0.9, 0.99, 0.999999}) {
      CHECK(stats::normal_quantile(1 - p) == doctest::Approx(-stats::normal_quantile(p)).epsilon(1e-10));
    }
  }

  TEST_CASE("incomplete beta has closed forms at integer parameters") {
    // I_x(1, b) = 1 − (1 − x)^b and I_x(a, 1) = x^a.
    for (double x : {0.1, 0.5, 0.93}) {
      CHECK(stats::regularized_incomplete_beta(1, 7, x) == doctest::Approx(1 - std::pow(1 - x, 7)).epsilon(1e-12));
      CHECK(stats::regularized_incomplete_beta(5, 1, x) == doctest::Approx(std::pow(x, 5)).epsilon(1e-12));
    }
    CHECK(stats::regularized_incomplete_beta(3, 4, 0.0) == 0.0);
    CHECK(stats::regularized_incomplete_beta(3, 4, 1.0) == 1.0);
  }

  TEST_CASE("Clopper-Pearson lower bound: zero successes") { CHECK(stats::clopper_pearson_lower(0, 1000, 0.001) == 0.0); }

  TEST_CASE("Clopper-Pearson lower bound: all successes has the closed form alpha^(1/n)") {
    const double expected = std::pow(0.001, 1.0 / 1000);
    CHECK(std::abs(stats::clopper_pearson_lower(1000, 1000, 0.001) - expected) < 1e-9);
    CHECK(std::abs(expected - 0.993116) < 1e-6);
    CHECK(std::abs(oracle::clopper_pearson_lower(1000, 1000, 0.001) - expected) < 1e-9);
  }

  TEST_CASE("Clopper-Pearson lower bound matches a pmf-summation oracle") {
    const double b = stats::clopper_pearson_lower(990, 1000, 0.001);
    CHECK(b > 0.97);
    CHECK(b < 0.99);
    const std::vector<std::tuple<std::int64_t, std::int64_t, double>> cases{
        {990, 1000, 0.001}, {500, 1000, 0.001}, {7, 10, 0.05}, {1, 1, 0.01}, {60, 200, 0.1}, {3, 50, 0.001}};
    for (auto [k, n, a] : cases) {
      CAPTURE(k);
      CAPTURE(n);
      CHECK(std::abs(stats::clopper_pearson_lower(k, n, a) - oracle::clopper_pearson_lower(k, n, a)) < 1e-8);
    }
  }

  TEST_CASE("Clopper-Pearson lower bound is monotone in k and alpha") {
    double prev = -1.0;
    for (int k = 0; k <= 100; ++k) {
      const double b = stats::clopper_pearson_lower(k, 100, 0.01);
      CHECK(b >= prev);
      prev = b;
    }
    CHECK(stats::clopper_pearson_lower(80, 100, 0.001) <= stats::clopper_pearson_lower(80, 100, 0.01));
    CHECK(stats::clopper_pearson_lower(80, 100, 0.01) <= stats::clopper_pearson_lower(80, 100, 0.2));
  }

  TEST_CASE("Clopper-Pearson lower bound validates its arguments") {
    CHECK_THROWS_AS(stats::clopper_pearson_lower(11, 10, 0.01), DomainError);
    CHECK_THROWS_AS(stats::clopper_pearson_lower(1, 0, 0.01), DomainError);
    CHECK_THROWS_AS(stats::clopper_pearson_lower(1, 10, 0.0), DomainError);
    CHECK_THROWS_AS(stats::clopper_pearson_lower(1, 10, 1.0), DomainError);
    CHECK_THROWS_AS(stats::clopper_pearson_lower(-1, 10, 0.1), DomainError);
  }

  TEST_CASE("binomial upper tail matches direct summation") {
    const std::vector<std::tuple<std::int64_t, std::int64_t, double>> cases{
        {5, 10, 0.5}, {0, 10, 0.3}, {900, 1000, 0.9}, {11, 20, 0.25}};
    for (auto [k, n, p] : cases) {
      CHECK(stats::binomial_upper_tail(k, n, p) ==
            doctest::Approx(static_cast<double>(oracle::binomial_upper_tail(k, n, p))).epsilon(1e-9));
    }
  }

  TEST_CASE("two-sided binomial test against one half matches an exact oracle") {
    CHECK(stats::binomial_test_half(1, 1) == 1.0);
    CHECK(stats::binomial_test_half(5, 10) == 1.0);
    const std::vector<std::pair<std::int64_t, std::int64_t>> cases{{9, 10}, {1, 10}, {60, 100}, {30, 40}, {520, 1000}, {0, 7}};
    for (auto [k, n] : cases) {
      CAPTURE(k);
      CAPTURE(n);
      CHECK(stats::binomial_test_half(k, n) == doctest::Approx(oracle::binomial_test_half(k, n)).epsilon(1e-9));
    }
  }
}
