#include "ghostcert/saliency.hpp"

#include <algorithm>
#include <cmath>

#include "ghostcert/denoiser.hpp"
#include "ghostcert/ensemble.hpp"
#include "ghostcert/error.hpp"

namespace ghostcert {

double SaliencyMap::sum() const {
  double s = 0.0;
  for (double v : values) s += v;
  return s;
}

double SaliencyMap::max() const { return values.empty() ? 0.0 : *std::max_element(values.begin(), values.end()); }

std::vector<double> bilinear_resize(const std::vector<double>& src, int src_h, int src_w, int dst_h, int dst_w) {
  if (src.size() != static_cast<std::size_t>(src_h) * src_w) throw ShapeError("bilinear_resize: source size mismatch");
  std::vector<double> dst(static_cast<std::size_t>(dst_h) * dst_w, 0.0);
  const double sy = static_cast<double>(src_h) / dst_h;
  const double sx = static_cast<double>(src_w) / dst_w;
  for (int y = 0; y < dst_h; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(src_h - 1));
    const int y0 = static_cast<int>(std::floor(fy));
    const int y1 = std::min(y0 + 1, src_h - 1);
    const double wy = fy - y0;
    for (int x = 0; x < dst_w; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(src_w - 1));
      const int x0 = static_cast<int>(std::floor(fx));
      const int x1 = std::min(x0 + 1, src_w - 1);
      const double wx = fx - x0;
      auto s = [&](int r, int c) { return src[static_cast<std::size_t>(r) * src_w + c]; };
      dst[static_cast<std::size_t>(y) * dst_w + x] =
          (1 - wy) * ((1 - wx) * s(y0, x0) + wx * s(y0, x1)) + wy * ((1 - wx) * s(y1, x0) + wx * s(y1, x1));
    }
  }
  return dst;
}

namespace {

void minmax_normalize(std::vector<double>& v) {
  if (v.empty()) return;
  const auto [lo_it, hi_it] = std::minmax_element(v.begin(), v.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  if (hi <= 0.0) {
    std::fill(v.begin(), v.end(), 0.0);
  } else if (hi - lo <= 1e-15 * hi) {
    std::fill(v.begin(), v.end(), 1.0);
  } else {
    for (double& x : v) x = std::clamp((x - lo) / (hi - lo), 0.0, 1.0);
  }
}

}  // namespace

SaliencyMap gradcam_from_features(const ConvFeatures& f, int height, int width) {
  const auto& A = f.activations;
  const auto& G = f.gradients;
  if (A.channels != G.channels || A.height != G.height || A.width != G.width) {
    throw ShapeError("gradcam: activation and gradient maps differ in shape");
  }
  const std::size_t plane = static_cast<std::size_t>(A.height) * A.width;
  std::vector<double> cam(plane, 0.0);
  for (int k = 0; k < A.channels; ++k) {
    double w = 0.0;
    for (std::size_t p = 0; p < plane; ++p) w += G.values[static_cast<std::size_t>(k) * plane + p];
    w /= static_cast<double>(plane);
    if (w == 0.0) continue;
    for (std::size_t p = 0; p < plane; ++p) cam[p] += w * A.values[static_cast<std::size_t>(k) * plane + p];
  }
  for (double& v : cam) v = std::max(v, 0.0);
  SaliencyMap map{height, width, bilinear_resize(cam, A.height, A.width, height, width)};
  minmax_normalize(map.values);
  return map;
}

SaliencyMap gradcam(const Classifier& clf, const Image& x, int label) {
  return gradcam_from_features(last_conv_activations_and_gradients(clf, x, label), x.height(), x.width());
}

SaliencyMap input_gradient_saliency(const Classifier& clf, const Image& x, int label) {
  const auto g = loss_and_input_gradient(clf, x, label).gradient;
  SaliencyMap map{x.height(), x.width(), std::vector<double>(x.shape().pixels(), 0.0)};
  const int C = x.channels();
  for (std::size_t p = 0; p < map.values.size(); ++p) {
    double s = 0.0;
    for (int c = 0; c < C; ++c) s += g[p * static_cast<std::size_t>(C) + static_cast<std::size_t>(c)] * g[p * static_cast<std::size_t>(C) + static_cast<std::size_t>(c)];
    map.values[p] = std::sqrt(s);
  }
  const double m = map.max();
  if (m > 0.0) {
    for (double& v : map.values) v /= m;
  }
  return map;
}

SaliencyMap saliency_for(const Classifier& clf, const Image& x, int label) {
  if (dynamic_cast<const ConvFeatureSource*>(&clf)) return gradcam(clf, x, label);
  if (const auto* ens = dynamic_cast<const Ensemble*>(&clf)) {
    SaliencyMap mean{x.height(), x.width(), std::vector<double>(x.shape().pixels(), 0.0)};
    for (const auto& m : ens->members()) {
      const auto s = saliency_for(*m, x, label);
      for (std::size_t i = 0; i < s.values.size(); ++i) mean.values[i] += s.values[i];
    }
    minmax_normalize(mean.values);
    return mean;
  }
  if (const auto* den = dynamic_cast<const DenoisedClassifier*>(&clf)) {
    return saliency_for(*den->base(), den->denoiser()->denoise(x), label);
  }
  return input_gradient_saliency(clf, x, label);
}

}  // namespace ghostcert
