#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ghostcert/image.hpp"

namespace ghostcert {

// A differentiable base classifier f: Image → logits. label() is the argmax,
// lowest index on ties.
class Classifier {
 public:
  virtual ~Classifier() = default;

  virtual Shape input_shape() const = 0;
  virtual int num_classes() const = 0;
  virtual std::vector<double> logits(const Image& x) const = 0;

  // Vector–Jacobian product: returns (∂logits/∂x)ᵀ · upstream.
  virtual Image input_gradient(const Image& x, std::span<const double> upstream) const = 0;

  virtual std::string kind() const = 0;

  int label(const Image& x) const;
};

using ClassifierPtr = std::shared_ptr<const Classifier>;

int argmax(std::span<const double> values);

// Numerically stable log-softmax cross-entropy.
double cross_entropy(std::span<const double> logits, int label);
std::vector<double> softmax(std::span<const double> logits);

struct LossGradient {
  double loss = 0.0;
  Image gradient;
};

// Cross-entropy of clf at (x, y) and its gradient with respect to x.
LossGradient loss_and_input_gradient(const Classifier& clf, const Image& x, int label);

// Affine classifier: logits = W x + b, W is classes × x.size() row-major.
class LinearClassifier final : public Classifier {
 public:
  LinearClassifier(Shape input, int classes, std::vector<double> weights, std::vector<double> bias);

  // Two-class model with logits (0, w·x + b): label 1 iff w·x + b > 0.
  static LinearClassifier binary(Shape input, std::vector<double> w, double b);

  Shape input_shape() const override { return input_; }
  int num_classes() const override { return classes_; }
  std::vector<double> logits(const Image& x) const override;
  Image input_gradient(const Image& x, std::span<const double> upstream) const override;
  std::string kind() const override { return "linear"; }

  const std::vector<double>& weights() const { return weights_; }
  const std::vector<double>& bias() const { return bias_; }

 private:
  Shape input_;
  int classes_;
  std::vector<double> weights_;
  std::vector<double> bias_;
};

void require_input_shape(const Classifier& clf, const Image& x);

}  // namespace ghostcert
