#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "ghostcert/classifier.hpp"
#include "ghostcert/image.hpp"
#include "ghostcert/parallel.hpp"

namespace ghostcert {

inline constexpr int kAbstain = -1;

struct SmoothingConfig {
  double sigma = 0.25;
  int n0 = 10;
  int n = 1000;
  double alpha = 0.001;
  // Margin: certify only when pa_lower > 0.5 + mu / 2.
  double mu = 0.0;

  void validate() const;
};

struct ClassCounts {
  std::map<int, std::int64_t> counts;
  std::int64_t total = 0;

  std::int64_t count(int label) const;
  // Most frequent label, lowest label on ties; kAbstain when empty.
  int top() const;
  // Second most frequent label or kAbstain.
  int runner_up() const;
  void add(int label, std::int64_t n = 1);

  friend bool operator==(const ClassCounts&, const ClassCounts&) = default;
};

struct CertificationOutcome {
  int decision = kAbstain;
  double radius = 0.0;
  double pa_lower = 0.0;
  ClassCounts selection;
  ClassCounts counts;
  std::uint64_t seed = 0;

  bool abstained() const { return decision == kAbstain; }
  friend bool operator==(const CertificationOutcome&, const CertificationOutcome&) = default;
};

struct NoiseBatch {
  std::vector<Image> samples;
  double sigma = 0.0;
  std::uint64_t seed = 0;

  // samples[i] == gaussian_noise(shape, sigma, seed, i).
  static NoiseBatch draw(const Shape& shape, double sigma, int count, std::uint64_t seed);
};

// counts[c] = #{i < count : f(x + ε_i) = c} with ε_i = gaussian_noise(shape, sigma, seed, i).
ClassCounts sample_class_counts(const Classifier& clf, const Image& x, double sigma, int count,
                                std::uint64_t seed, Execution exec = Execution::parallel);

// Smoothed prediction with abstention: majority label when a two-sided binomial
// test of top vs runner-up counts rejects p = 0.5 at level alpha.
int predict_smoothed(const Classifier& clf, const Image& x, const SmoothingConfig& cfg,
                     std::uint64_t seed, Execution exec = Execution::parallel);

// Selection on n0 samples, estimation on n fresh samples, one-sided Clopper–Pearson
// bound, radius σ·Φ⁻¹(pa_lower) or abstention.
CertificationOutcome certify(const Classifier& clf, const Image& x, const SmoothingConfig& cfg,
                             std::uint64_t seed, Execution exec = Execution::parallel);

// The decision rule of certify() applied to already-drawn counts.
CertificationOutcome certify_from_counts(const ClassCounts& selection, const ClassCounts& estimation,
                                         const SmoothingConfig& cfg);

// σ/2 · (Φ⁻¹(pa) − Φ⁻¹(pb)), requiring 0 < pb ≤ pa < 1.
double two_sided_radius(double pa, double pb, double sigma);

}  // namespace ghostcert
