#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ghostcert/classifier.hpp"

namespace ghostcert {

// conv3x3 → SiLU → avgpool2, once per entry of conv_channels, then a dense head.
struct Architecture {
  Shape input{28, 28, 1};
  std::vector<int> conv_channels{8, 16};
  int num_classes = 10;

  void validate() const;
  // Spatial size of the last conv layer's feature maps (before pooling).
  int last_conv_height() const;
  int last_conv_width() const;
  std::size_t feature_count() const;
  std::size_t parameter_count() const;

  friend bool operator==(const Architecture&, const Architecture&) = default;
};

// CHW block of feature maps.
struct FeatureMaps {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> values;

  double at(int c, int y, int x) const {
    return values[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
};

struct ConvFeatures {
  FeatureMaps activations;  // A^k, post-activation output of the last conv layer
  FeatureMaps gradients;    // ∂ logit_y / ∂A^k
};

// Implemented by classifiers whose last convolutional layer is addressable.
class ConvFeatureSource {
 public:
  virtual ~ConvFeatureSource() = default;
  virtual ConvFeatures last_conv_features(const Image& x, int label) const = 0;
};

class SmallConvNet final : public Classifier, public ConvFeatureSource {
 public:
  // He-normal weights from `seed`, zero biases.
  SmallConvNet(Architecture arch, std::uint64_t seed);
  SmallConvNet(Architecture arch, std::vector<double> parameters);

  Shape input_shape() const override { return arch_.input; }
  int num_classes() const override { return arch_.num_classes; }
  std::vector<double> logits(const Image& x) const override;
  Image input_gradient(const Image& x, std::span<const double> upstream) const override;
  std::string kind() const override { return "small_conv_net"; }

  ConvFeatures last_conv_features(const Image& x, int label) const override;

  // Cross-entropy at (x, label); adds ∂loss/∂θ into grad (size parameter_count()).
  double loss_and_parameter_gradient(const Image& x, int label, std::span<double> grad) const;

  const Architecture& architecture() const { return arch_; }
  std::span<const double> parameters() const { return params_; }
  std::span<double> mutable_parameters() { return params_; }

  // Views into the flat parameter vector.
  std::span<const double> conv_weights(std::size_t layer) const;
  std::span<const double> conv_bias(std::size_t layer) const;
  std::span<const double> dense_weights() const;
  std::span<const double> dense_bias() const;

 private:
  struct Cache;
  struct Offsets {
    std::vector<std::size_t> conv_w, conv_b;
    std::size_t dense_w = 0, dense_b = 0;
  };

  void forward(const Image& x, Cache& cache) const;
  // Back-propagates dlogits through the cached forward pass.
  void backward(const Cache& cache, std::span<const double> dlogits, Image* dinput,
                std::span<double> dparams, FeatureMaps* dlast_activation) const;

  Architecture arch_;
  std::vector<double> params_;
  Offsets offsets_;
};

// Throws UnsupportedError when clf does not expose a conv layer.
ConvFeatures last_conv_activations_and_gradients(const Classifier& clf, const Image& x, int label);

}  // namespace ghostcert
