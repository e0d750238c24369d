#include "ghostcert/classifier.hpp"

#include <algorithm>
#include <cmath>

#include "ghostcert/error.hpp"

namespace ghostcert {

int Classifier::label(const Image& x) const { return argmax(logits(x)); }

int argmax(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("argmax of empty vector");
  return static_cast<int>(std::max_element(values.begin(), values.end()) - values.begin());
}

namespace {

double log_sum_exp(std::span<const double> z) {
  const double m = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (double v : z) s += std::exp(v - m);
  return m + std::log(s);
}

}  // namespace

double cross_entropy(std::span<const double> logits, int label) {
  if (label < 0 || label >= static_cast<int>(logits.size())) {
    throw std::out_of_range("cross_entropy: label " + std::to_string(label) + " out of range");
  }
  return log_sum_exp(logits) - logits[static_cast<std::size_t>(label)];
}

std::vector<double> softmax(std::span<const double> logits) {
  const double lse = log_sum_exp(logits);
  std::vector<double> p(logits.size());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = std::exp(logits[i] - lse);
  return p;
}

void require_input_shape(const Classifier& clf, const Image& x) {
  if (x.shape() != clf.input_shape()) {
    throw ShapeError(clf.kind() + " expects input " + clf.input_shape().str() + ", got " +
                     x.shape().str());
  }
}

LossGradient loss_and_input_gradient(const Classifier& clf, const Image& x, int label) {
  const auto z = clf.logits(x);
  LossGradient out;
  out.loss = cross_entropy(z, label);
  auto upstream = softmax(z);
  upstream[static_cast<std::size_t>(label)] -= 1.0;
  out.gradient = clf.input_gradient(x, upstream);
  return out;
}

LinearClassifier::LinearClassifier(Shape input, int classes, std::vector<double> weights,
                                   std::vector<double> bias)
    : input_(input), classes_(classes), weights_(std::move(weights)), bias_(std::move(bias)) {
  if (!input.valid() || classes < 1) throw ShapeError("linear classifier: invalid dimensions");
  if (weights_.size() != input.size() * classes || bias_.size() != static_cast<std::size_t>(classes)) {
    throw ShapeError("linear classifier: weight/bias size mismatch");
  }
}

LinearClassifier LinearClassifier::binary(Shape input, std::vector<double> w, double b) {
  if (w.size() != input.size()) throw ShapeError("linear classifier: weight size mismatch");
  std::vector<double> weights(2 * w.size(), 0.0);
  std::copy(w.begin(), w.end(), weights.begin() + static_cast<std::ptrdiff_t>(w.size()));
  return LinearClassifier(input, 2, std::move(weights), {0.0, b});
}

std::vector<double> LinearClassifier::logits(const Image& x) const {
  require_input_shape(*this, x);
  const auto d = x.size();
  std::vector<double> z(bias_);
  for (int c = 0; c < classes_; ++c) {
    z[static_cast<std::size_t>(c)] +=
        dot(std::span(weights_).subspan(static_cast<std::size_t>(c) * d, d), x.values());
  }
  return z;
}

Image LinearClassifier::input_gradient(const Image& x, std::span<const double> upstream) const {
  require_input_shape(*this, x);
  const auto d = x.size();
  Image g(input_);
  for (int c = 0; c < classes_; ++c) {
    const double u = upstream[static_cast<std::size_t>(c)];
    if (u == 0.0) continue;
    const double* w = weights_.data() + static_cast<std::size_t>(c) * d;
    for (std::size_t i = 0; i < d; ++i) g[i] += u * w[i];
  }
  return g;
}

}  // namespace ghostcert
