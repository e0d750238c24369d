#pragma once

#include <cstdint>

namespace ghostcert::stats {

// Standard normal CDF Φ, evaluated through erfc so both tails keep relative precision.
double normal_cdf(double x);

// Φ⁻¹(p) for p in (0,1). Rational approximation followed by one Halley refinement
// against normal_cdf; |Φ(result) − p| stays below 1e-12 in practice.
// Throws DomainError outside (0,1).
double normal_quantile(double p);

// Regularized incomplete beta I_x(a, b) via Lentz's continued fraction.
double regularized_incomplete_beta(double a, double b, double x);

// One-sided (1 − alpha) Clopper–Pearson lower bound for k successes in n trials:
// the alpha-quantile of Beta(k, n − k + 1), found by bisection to 1e-10.
// Returns 0 when k == 0. Throws DomainError when k > n, n == 0 or alpha ∉ (0,1).
double clopper_pearson_lower(std::int64_t k, std::int64_t n, double alpha);

// P(X >= k) for X ~ Binomial(n, p).
double binomial_upper_tail(std::int64_t k, std::int64_t n, double p);

// Exact two-sided binomial test of H0: success probability 0.5.
double binomial_test_half(std::int64_t k, std::int64_t n);

}  // namespace ghostcert::stats
