#pragma once

#include <vector>

#include "ghostcert/classifier.hpp"
#include "ghostcert/conv_net.hpp"

namespace ghostcert {

// H×W map with values in [0,1].
struct SaliencyMap {
  int height = 0;
  int width = 0;
  std::vector<double> values;

  double at(int row, int col) const { return values[static_cast<std::size_t>(row) * width + col]; }
  double sum() const;
  double max() const;
};

// Half-pixel-centred bilinear resampling of a single-channel map.
std::vector<double> bilinear_resize(const std::vector<double>& src, int src_h, int src_w, int dst_h, int dst_w);

// GradCAM from already computed last-conv activations and gradients: channel weights
// are the spatial means of the gradients, map = ReLU(Σ_k w_k A^k), upsampled to
// height×width and min-max normalised.
SaliencyMap gradcam_from_features(const ConvFeatures& features, int height, int width);

// Throws UnsupportedError when clf has no addressable conv layer.
SaliencyMap gradcam(const Classifier& clf, const Image& x, int label);

// Per-pixel L2 norm (over channels) of ∂loss/∂x, divided by its maximum.
SaliencyMap input_gradient_saliency(const Classifier& clf, const Image& x, int label);

// GradCAM where the model allows it. Ensembles average their members' maps; denoised
// classifiers explain the base model on the denoised input; anything else falls back
// to input-gradient saliency.
SaliencyMap saliency_for(const Classifier& clf, const Image& x, int label);

}  // namespace ghostcert
