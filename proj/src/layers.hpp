#pragma once

// Dense kernels shared by the conv classifier and the denoiser. Tensors are CHW.

#include <cstddef>
#include <span>
#include <vector>

#include "ghostcert/image.hpp"

namespace ghostcert::layers {

struct Tensor3 {
  int c = 0;
  int h = 0;
  int w = 0;
  std::vector<double> v;

  Tensor3() = default;
  Tensor3(int channels, int height, int width) : c(channels), h(height), w(width),
      v(static_cast<std::size_t>(channels) * height * width, 0.0) {}

  double& at(int ch, int y, int x) { return v[(static_cast<std::size_t>(ch) * h + y) * w + x]; }
  double at(int ch, int y, int x) const { return v[(static_cast<std::size_t>(ch) * h + y) * w + x]; }
  std::size_t size() const { return v.size(); }
};

Tensor3 from_image(const Image& img);
Image to_image(const Tensor3& t);

// 3×3 convolution, stride 1, zero padding 1. Weights [out][in][3][3], bias [out].
inline std::size_t conv_weight_count(int in_c, int out_c) { return static_cast<std::size_t>(out_c) * in_c * 9; }

void conv_forward(const Tensor3& in, std::span<const double> weights, std::span<const double> bias,
                  int out_c, Tensor3& out);

// Accumulates into din (if non-null), dweights and dbias (if non-empty).
void conv_backward(const Tensor3& in, std::span<const double> weights, const Tensor3& dout,
                   Tensor3* din, std::span<double> dweights, std::span<double> dbias);

// SiLU, x·sigmoid(x): smooth and zero at zero, so finite-difference checks of
// input gradients are not spoiled by activation kinks.
Tensor3 silu(const Tensor3& pre);
// grad *= silu'(pre)
void silu_backward(const Tensor3& pre, Tensor3& grad);

// 2×2 average pooling with stride 2; trailing odd rows/cols are dropped.
Tensor3 avgpool2(const Tensor3& in);
Tensor3 avgpool2_backward(const Tensor3& dout, int in_h, int in_w);

// out = W in + b, W is [out][in].
void dense_forward(std::span<const double> in, std::span<const double> weights,
                   std::span<const double> bias, std::span<double> out);
void dense_backward(std::span<const double> in, std::span<const double> weights,
                    std::span<const double> dout, std::span<double> din,
                    std::span<double> dweights, std::span<double> dbias);

}  // namespace ghostcert::layers
