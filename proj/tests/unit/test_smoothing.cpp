#include <cmath>

#include "doctest.h"
#include "ghostcert/error.hpp"
#include "ghostcert/smoothing.hpp"
#include "ghostcert/stats.hpp"
#include "oracles.hpp"

using namespace ghostcert;

namespace {

// Zero weights and a bias that favours `cls`: f(x) = cls everywhere.
LinearClassifier constant_classifier(Shape shape, int classes, int cls) {
  std::vector<double> bias(static_cast<std::size_t>(classes), 0.0);
  bias[static_cast<std::size_t>(cls)] = 1.0;
  return LinearClassifier(shape, classes, std::vector<double>(shape.size() * static_cast<std::size_t>(classes), 0.0),
                          bias);
}

const Shape kPair{1, 2, 1};

}  // namespace

TEST_SUITE("smoothing") {
  TEST_CASE("sample_class_counts of a constant classifier") {
    const auto clf = constant_classifier(Shape{4, 4, 1}, 5, 3);
    const auto counts = sample_class_counts(clf, Image(Shape{4, 4, 1}, 0.5), 0.25, 100, 7);
    CHECK(counts.total == 100);
    CHECK(counts.count(3) == 100);
    CHECK(counts.counts.size() == 1);
  }

  TEST_CASE("zero noise concentrates counts on the base prediction") {
    const auto clf = LinearClassifier::binary(kPair, {1.0, 0.0}, -0.2);
    Image x(kPair, std::vector<double>{0.5, 0.0});
    const auto counts = sample_class_counts(clf, x, 0.0, 50, 1);
    CHECK(counts.count(clf.label(x)) == 50);
  }

  TEST_CASE("linear classifier: sampled class frequency matches the analytic smoothed probability") {
    const auto clf = LinearClassifier::binary(kPair, {1.0, 0.0}, 0.0);
    Image x(kPair, std::vector<double>{0.5, 0.0});
    const int n = 100000;
    const auto counts = sample_class_counts(clf, x, 0.25, n, 2024);
    const double p = static_cast<double>(oracle::phi(2.0L));
    CHECK(std::abs(p - 0.97725) < 1e-5);
    const double se = std::sqrt(p * (1 - p) / n);
    CHECK(std::abs(static_cast<double>(counts.count(1)) / n - p) <= 3 * se);
  }

  TEST_CASE("serial and OpenMP sampling agree bit for bit") {
    const auto clf = LinearClassifier::binary(kPair, {1.0, -2.0}, 0.1);
    Image x(kPair, std::vector<double>{0.2, 0.1});
    CHECK(sample_class_counts(clf, x, 0.5, 5000, 99, Execution::serial) ==
          sample_class_counts(clf, x, 0.5, 5000, 99, Execution::parallel));
  }

  TEST_CASE("noise batches are reproducible and have the requested spread") {
    const auto a = NoiseBatch::draw(Shape{8, 8, 3}, 0.5, 40, 11);
    const auto b = NoiseBatch::draw(Shape{8, 8, 3}, 0.5, 40, 11);
    REQUIRE(a.samples.size() == 40);
    CHECK(a.samples == b.samples);
    double s2 = 0.0;
    std::size_t m = 0;
    for (const auto& s : a.samples) {
      for (double v : s.values()) {
        s2 += v * v;
        ++m;
      }
    }
    // 7680 draws: the sample variance is within a few percent of σ².
    CHECK(std::sqrt(s2 / m) == doctest::Approx(0.5).epsilon(0.05));
  }

  TEST_CASE("predict_smoothed returns the class of a constant classifier") {
    const auto clf = constant_classifier(kPair, 4, 2);
    for (std::uint64_t seed = 0; seed < 5; ++seed) CHECK(predict_smoothed(clf, Image(kPair), SmoothingConfig{}, seed) == 2);
  }

  TEST_CASE("predict_smoothed abstains on a fair coin") {
    // x on the decision boundary: each noisy label is Bernoulli(1/2).
    const auto clf = LinearClassifier::binary(kPair, {1.0, 0.0}, 0.0);
    const Image x(kPair);
    SmoothingConfig cfg;
    const int runs = 300;
    int predicted = 0;
    for (int s = 0; s < runs; ++s) predicted += predict_smoothed(clf, x, cfg, static_cast<std::uint64_t>(s)) != kAbstain;
    const double tol = cfg.alpha * runs + 3 * std::sqrt(runs * cfg.alpha * (1 - cfg.alpha));
    CHECK(predicted <= tol);
  }

  TEST_CASE("predict_smoothed with a single sample always abstains") {
    const auto clf = constant_classifier(kPair, 2, 1);
    SmoothingConfig cfg;
    cfg.n = 1;
    for (double a : {0.5, 0.1, 0.001}) {
      cfg.alpha = a;
      CHECK(predict_smoothed(clf, Image(kPair), cfg, 3) == kAbstain);
    }
  }

  TEST_CASE("certify a constant classifier gives sigma times the quantile of alpha^(1/n)") {
    const auto clf = constant_classifier(kPair, 3, 0);
    const auto out = certify(clf, Image(kPair), SmoothingConfig{}, 5);
    const double expected = 0.25 * oracle::phi_inverse(std::pow(0.001, 1.0 / 1000));
    CHECK(out.decision == 0);
    CHECK(std::abs(out.radius - expected) < 1e-8);
    CHECK(std::abs(out.radius - 0.6156) < 5e-4);  // quoted to four places; exact value 0.615816
    CHECK(out.counts.total == 1000);
    CHECK(out.selection.total == 10);
  }

  TEST_CASE("certify abstains on a fair coin with frequency at least 1 - alpha") {
    const auto clf = LinearClassifier::binary(kPair, {1.0, 0.0}, 0.0);
    SmoothingConfig cfg;
    const int runs = 300;
    int certified = 0;
    for (int s = 0; s < runs; ++s) {
      const auto out = certify(clf, Image(kPair), cfg, static_cast<std::uint64_t>(s));
      if (out.abstained()) {
        CHECK(out.radius == 0.0);
      } else {
        ++certified;
      }
    }
    CHECK(certified <= cfg.alpha * runs + 3 * std::sqrt(runs * cfg.alpha * (1 - cfg.alpha)));
  }

  TEST_CASE("certify a linear classifier with a million samples is within 5% of the exact radius") {
    const auto clf = LinearClassifier::binary(kPair, {1.0, 0.0}, 0.0);
    Image x(kPair, std::vector<double>{0.5, 0.0});
    SmoothingConfig cfg;
    cfg.n = 1000000;
    const auto out = certify(clf, x, cfg, 77);
    const double exact = 0.25 * oracle::phi_inverse(static_cast<double>(oracle::phi(0.5L / 0.25L)));
    CHECK(exact == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(out.decision == 1);
    CHECK(std::abs(out.radius - exact) / exact <= 0.05);
  }

  TEST_CASE("certification outcome invariants") {
    const auto clf = LinearClassifier::binary(kPair, {2.0, -1.0}, 0.05);
    for (double x0 : {-0.3, -0.05, 0.0, 0.02, 0.1, 0.4}) {
      Image x(kPair, std::vector<double>{x0, 0.0});
      const auto out = certify(clf, x, SmoothingConfig{}, 9);
      if (out.abstained()) {
        CHECK(out.radius == 0.0);
        CHECK(out.pa_lower <= 0.5);
      } else {
        CHECK(out.pa_lower > 0.5);
        CHECK(out.radius > 0.0);
      }
      CHECK(out.pa_lower >= 0.0);
      CHECK(out.pa_lower <= 1.0);
    }
  }

  TEST_CASE("certify is deterministic and independent of the execution mode") {
    const auto clf = LinearClassifier::binary(kPair, {1.0, 0.3}, -0.1);
    Image x(kPair, std::vector<double>{0.4, 0.2});
    const auto a = certify(clf, x, SmoothingConfig{}, 1234, Execution::parallel);
    const auto b = certify(clf, x, SmoothingConfig{}, 1234, Execution::parallel);
    const auto c = certify(clf, x, SmoothingConfig{}, 1234, Execution::serial);
    CHECK(a == b);
    CHECK(a == c);
  }

  TEST_CASE("margin rule tightens the certification threshold") {
    ClassCounts sel;
    sel.add(1, 10);
    ClassCounts est;
    est.add(1, 800);
    est.add(0, 200);
    SmoothingConfig cfg;
    const auto base = certify_from_counts(sel, est, cfg);
    REQUIRE(base.decision == 1);
    cfg.mu = 2 * (base.pa_lower - 0.5) + 1e-6;
    CHECK(certify_from_counts(sel, est, cfg).decision == kAbstain);
    cfg.mu = 2 * (base.pa_lower - 0.5) - 1e-6;
    CHECK(certify_from_counts(sel, est, cfg).decision == 1);
  }

  TEST_CASE("certified radius is non-decreasing in the top-class count") {
    ClassCounts sel;
    sel.add(4, 10);
    double prev = 0.0;
    for (int k = 0; k <= 1000; k += 10) {
      ClassCounts est;
      est.add(4, k);
      est.add(2, 1000 - k);
      const auto out = certify_from_counts(sel, est, SmoothingConfig{});
      CHECK(out.radius >= prev);
      prev = out.radius;
    }
    CHECK(prev > 0.6);
  }

  TEST_CASE("class count bookkeeping") {
    ClassCounts c;
    CHECK(c.top() == kAbstain);
    c.add(7, 3);
    c.add(2, 3);
    c.add(5, 1);
    CHECK(c.total == 7);
    CHECK(c.top() == 2);
    CHECK(c.runner_up() == 7);
    CHECK(c.count(9) == 0);
  }

  TEST_CASE("two-sided radius") {
    CHECK(two_sided_radius(0.5, 0.5, 0.7) == 0.0);
    const double q = oracle::phi_inverse(0.999);
    CHECK(two_sided_radius(0.999, 0.001, 0.5) == doctest::Approx(0.25 * 2 * q).epsilon(1e-9));
    CHECK(std::abs(two_sided_radius(0.999, 0.001, 0.5) - 1.545116) < 1e-6);
    for (double p : {0.6, 0.8, 0.95}) {
      CHECK(two_sided_radius(p, 1 - p, 0.3) == doctest::Approx(0.3 * stats::normal_quantile(p)).epsilon(1e-12));
    }
    CHECK_THROWS_AS(two_sided_radius(0.4, 0.6, 0.5), DomainError);
    CHECK_THROWS_AS(two_sided_radius(1.0, 0.2, 0.5), DomainError);
    CHECK_THROWS_AS(two_sided_radius(0.7, 0.0, 0.5), DomainError);
  }

  TEST_CASE("smoothing configuration validation") {
    SmoothingConfig ok;
    CHECK_NOTHROW(ok.validate());
    auto bad = ok;
    bad.sigma = 0.0;
    CHECK_THROWS(bad.validate());
    bad = ok;
    bad.alpha = 1.0;
    CHECK_THROWS(bad.validate());
    bad = ok;
    bad.n0 = 0;
    CHECK_THROWS(bad.validate());
    bad = ok;
    bad.n = 0;
    CHECK_THROWS(bad.validate());
    bad = ok;
    bad.mu = 1.5;
    CHECK_THROWS(bad.validate());
  }
}
