#include "ghostcert/smoothing.hpp"

#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "ghostcert/error.hpp"
#include "ghostcert/random.hpp"
#include "ghostcert/stats.hpp"

namespace ghostcert {

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void SmoothingConfig::validate() const {
  if (!(sigma > 0.0)) throw ConfigError("sigma must be > 0", "sigma");
  if (n0 < 1) throw ConfigError("n0 must be >= 1", "n0");
  if (n < 1) throw ConfigError("n must be >= 1", "n");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0,1)", "alpha");
  if (!(mu >= 0.0 && mu <= 1.0)) throw ConfigError("mu must lie in [0,1]", "mu");
}

std::int64_t ClassCounts::count(int label) const {
  auto it = counts.find(label);
  return it == counts.end() ? 0 : it->second;
}

int ClassCounts::top() const {
  int best = kAbstain;
  std::int64_t best_count = -1;
  for (const auto& [label, c] : counts) {
    if (c > best_count) {
      best = label;
      best_count = c;
    }
  }
  return best;
}

int ClassCounts::runner_up() const {
  const int first = top();
  int best = kAbstain;
  std::int64_t best_count = -1;
  for (const auto& [label, c] : counts) {
    if (label != first && c > best_count) {
      best = label;
      best_count = c;
    }
  }
  return best;
}

void ClassCounts::add(int label, std::int64_t n) {
  counts[label] += n;
  total += n;
}

NoiseBatch NoiseBatch::draw(const Shape& shape, double sigma, int count, std::uint64_t seed) {
  NoiseBatch batch{{}, sigma, seed};
  batch.samples.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) batch.samples.push_back(gaussian_noise(shape, sigma, seed, i));
  return batch;
}

namespace {

void count_range(const Classifier& clf, const Image& x, double sigma, std::uint64_t seed,
                 std::int64_t begin, std::int64_t end, std::vector<std::int64_t>& tally, Image& buffer) {
  for (std::int64_t i = begin; i < end; ++i) {
    fill_gaussian(buffer.values(), sigma, derive_seed(seed, 0x6E6F697365ull, static_cast<std::uint64_t>(i)));
    buffer += x;
    ++tally[static_cast<std::size_t>(clf.label(buffer))];
  }
}

ClassCounts to_counts(const std::vector<std::int64_t>& tally) {
  ClassCounts out;
  for (std::size_t c = 0; c < tally.size(); ++c) {
    if (tally[c] > 0) out.add(static_cast<int>(c), tally[c]);
  }
  return out;
}

}  // namespace

ClassCounts sample_class_counts(const Classifier& clf, const Image& x, double sigma, int count,
                                std::uint64_t seed, Execution exec) {
  require_input_shape(clf, x);
  if (count < 1) throw DomainError("sample_class_counts: count must be >= 1");
  if (sigma < 0.0) throw DomainError("sample_class_counts: sigma must be >= 0");
  const auto classes = static_cast<std::size_t>(clf.num_classes());
  std::vector<std::int64_t> tally(classes, 0);

  if (exec == Execution::serial) {
    Image buffer(x.shape());
    count_range(clf, x, sigma, seed, 0, count, tally, buffer);
    return to_counts(tally);
  }

#pragma omp parallel
  {
    std::vector<std::int64_t> local(classes, 0);
    Image buffer(x.shape());
#pragma omp for schedule(static)
    for (std::int64_t i = 0; i < count; ++i) {
      count_range(clf, x, sigma, seed, i, i + 1, local, buffer);
    }
#pragma omp critical
    for (std::size_t c = 0; c < classes; ++c) tally[c] += local[c];
  }
  return to_counts(tally);
}

namespace {
constexpr std::uint64_t kSelectionStream = 1;
constexpr std::uint64_t kEstimationStream = 2;
constexpr std::uint64_t kPredictionStream = 3;
}  // namespace

int predict_smoothed(const Classifier& clf, const Image& x, const SmoothingConfig& cfg,
                     std::uint64_t seed, Execution exec) {
  cfg.validate();
  const auto counts = sample_class_counts(clf, x, cfg.sigma, cfg.n,
                                          derive_seed(seed, kPredictionStream), exec);
  const int top = counts.top();
  const std::int64_t n_a = counts.count(top);
  const std::int64_t n_b = counts.count(counts.runner_up());
  if (stats::binomial_test_half(n_a, n_a + n_b) > cfg.alpha) return kAbstain;
  return top;
}

CertificationOutcome certify_from_counts(const ClassCounts& selection, const ClassCounts& estimation,
                                         const SmoothingConfig& cfg) {
  cfg.validate();
  CertificationOutcome out;
  out.selection = selection;
  out.counts = estimation;
  const int candidate = selection.top();
  if (candidate == kAbstain || estimation.total <= 0) return out;
  out.pa_lower = stats::clopper_pearson_lower(estimation.count(candidate), estimation.total, cfg.alpha);
  if (out.pa_lower > 0.5 + 0.5 * cfg.mu) {
    out.decision = candidate;
    out.radius = cfg.sigma * stats::normal_quantile(out.pa_lower);
  }
  return out;
}

CertificationOutcome certify(const Classifier& clf, const Image& x, const SmoothingConfig& cfg,
                             std::uint64_t seed, Execution exec) {
  cfg.validate();
  const auto selection = sample_class_counts(clf, x, cfg.sigma, cfg.n0,
                                             derive_seed(seed, kSelectionStream), exec);
  const auto estimation = sample_class_counts(clf, x, cfg.sigma, cfg.n,
                                              derive_seed(seed, kEstimationStream), exec);
  auto out = certify_from_counts(selection, estimation, cfg);
  out.seed = seed;
  return out;
}

double two_sided_radius(double pa, double pb, double sigma) {
  if (!(pa > 0.0 && pa < 1.0 && pb > 0.0 && pb < 1.0)) {
    throw DomainError("two_sided_radius: probabilities must lie in (0,1)");
  }
  if (pa < pb) throw DomainError("two_sided_radius: requires pb <= pa");
  if (pa == pb) return 0.0;
  return 0.5 * sigma * (stats::normal_quantile(pa) - stats::normal_quantile(pb));
}

}  // namespace ghostcert
