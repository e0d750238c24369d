#include "layers.hpp"

#include <algorithm>
#include <cmath>

namespace ghostcert::layers {

Tensor3 from_image(const Image& img) {
  Tensor3 t(img.channels(), img.height(), img.width());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      for (int c = 0; c < img.channels(); ++c) t.at(c, y, x) = img.at(y, x, c);
  return t;
}

Image to_image(const Tensor3& t) {
  Image img(Shape{t.h, t.w, t.c});
  for (int y = 0; y < t.h; ++y)
    for (int x = 0; x < t.w; ++x)
      for (int c = 0; c < t.c; ++c) img.at(y, x, c) = t.at(c, y, x);
  return img;
}

void conv_forward(const Tensor3& in, std::span<const double> weights, std::span<const double> bias,
                  int out_c, Tensor3& out) {
  const int H = in.h;
  const int W = in.w;
  out = Tensor3(out_c, H, W);
  for (int o = 0; o < out_c; ++o) {
    double* dst = out.v.data() + static_cast<std::size_t>(o) * H * W;
    std::fill(dst, dst + static_cast<std::size_t>(H) * W, bias.empty() ? 0.0 : bias[static_cast<std::size_t>(o)]);
    for (int i = 0; i < in.c; ++i) {
      const double* src = in.v.data() + static_cast<std::size_t>(i) * H * W;
      const double* k = weights.data() + (static_cast<std::size_t>(o) * in.c + i) * 9;
      for (int ky = 0; ky < 3; ++ky) {
        const int dy = ky - 1;
        const int y0 = std::max(0, -dy);
        const int y1 = std::min(H, H - dy);
        for (int kx = 0; kx < 3; ++kx) {
          const int dx = kx - 1;
          const double kv = k[ky * 3 + kx];
          if (kv == 0.0) continue;
          const int x0 = std::max(0, -dx);
          const int x1 = std::min(W, W - dx);
          for (int y = y0; y < y1; ++y) {
            double* row = dst + static_cast<std::size_t>(y) * W;
            const double* srow = src + static_cast<std::size_t>(y + dy) * W + dx;
            for (int x = x0; x < x1; ++x) row[x] += kv * srow[x];
          }
        }
      }
    }
  }
}

void conv_backward(const Tensor3& in, std::span<const double> weights, const Tensor3& dout,
                   Tensor3* din, std::span<double> dweights, std::span<double> dbias) {
  const int H = in.h;
  const int W = in.w;
  const int out_c = dout.c;
  for (int o = 0; o < out_c; ++o) {
    const double* g = dout.v.data() + static_cast<std::size_t>(o) * H * W;
    if (!dbias.empty()) {
      double s = 0.0;
      for (std::size_t p = 0; p < static_cast<std::size_t>(H) * W; ++p) s += g[p];
      dbias[static_cast<std::size_t>(o)] += s;
    }
    for (int i = 0; i < in.c; ++i) {
      const double* src = in.v.data() + static_cast<std::size_t>(i) * H * W;
      double* dsrc = din ? din->v.data() + static_cast<std::size_t>(i) * H * W : nullptr;
      const std::size_t kbase = (static_cast<std::size_t>(o) * in.c + i) * 9;
      for (int ky = 0; ky < 3; ++ky) {
        const int dy = ky - 1;
        const int y0 = std::max(0, -dy);
        const int y1 = std::min(H, H - dy);
        for (int kx = 0; kx < 3; ++kx) {
          const int dx = kx - 1;
          const int x0 = std::max(0, -dx);
          const int x1 = std::min(W, W - dx);
          const double kv = weights[kbase + static_cast<std::size_t>(ky * 3 + kx)];
          double acc = 0.0;
          for (int y = y0; y < y1; ++y) {
            const double* grow = g + static_cast<std::size_t>(y) * W;
            const double* srow = src + static_cast<std::size_t>(y + dy) * W + dx;
            if (!dweights.empty()) {
              for (int x = x0; x < x1; ++x) acc += grow[x] * srow[x];
            }
            if (dsrc && kv != 0.0) {
              double* drow = dsrc + static_cast<std::size_t>(y + dy) * W + dx;
              for (int x = x0; x < x1; ++x) drow[x] += kv * grow[x];
            }
          }
          if (!dweights.empty()) dweights[kbase + static_cast<std::size_t>(ky * 3 + kx)] += acc;
        }
      }
    }
  }
}

namespace {

double sigmoid(double v) { return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v)); }

}  // namespace

Tensor3 silu(const Tensor3& pre) {
  Tensor3 out(pre.c, pre.h, pre.w);
  for (std::size_t i = 0; i < pre.v.size(); ++i) out.v[i] = pre.v[i] * sigmoid(pre.v[i]);
  return out;
}

void silu_backward(const Tensor3& pre, Tensor3& grad) {
  for (std::size_t i = 0; i < grad.v.size(); ++i) {
    const double s = sigmoid(pre.v[i]);
    grad.v[i] *= s * (1.0 + pre.v[i] * (1.0 - s));
  }
}

Tensor3 avgpool2(const Tensor3& in) {
  Tensor3 out(in.c, in.h / 2, in.w / 2);
  for (int c = 0; c < in.c; ++c)
    for (int y = 0; y < out.h; ++y)
      for (int x = 0; x < out.w; ++x) {
        out.at(c, y, x) = 0.25 * (in.at(c, 2 * y, 2 * x) + in.at(c, 2 * y, 2 * x + 1) +
                                  in.at(c, 2 * y + 1, 2 * x) + in.at(c, 2 * y + 1, 2 * x + 1));
      }
  return out;
}

Tensor3 avgpool2_backward(const Tensor3& dout, int in_h, int in_w) {
  Tensor3 din(dout.c, in_h, in_w);
  for (int c = 0; c < dout.c; ++c)
    for (int y = 0; y < dout.h; ++y)
      for (int x = 0; x < dout.w; ++x) {
        const double g = 0.25 * dout.at(c, y, x);
        din.at(c, 2 * y, 2 * x) = g;
        din.at(c, 2 * y, 2 * x + 1) = g;
        din.at(c, 2 * y + 1, 2 * x) = g;
        din.at(c, 2 * y + 1, 2 * x + 1) = g;
      }
  return din;
}

void dense_forward(std::span<const double> in, std::span<const double> weights,
                   std::span<const double> bias, std::span<double> out) {
  const std::size_t n_in = in.size();
  for (std::size_t o = 0; o < out.size(); ++o) {
    const double* w = weights.data() + o * n_in;
    double s = bias.empty() ? 0.0 : bias[o];
    for (std::size_t i = 0; i < n_in; ++i) s += w[i] * in[i];
    out[o] = s;
  }
}

void dense_backward(std::span<const double> in, std::span<const double> weights,
                    std::span<const double> dout, std::span<double> din,
                    std::span<double> dweights, std::span<double> dbias) {
  const std::size_t n_in = in.size();
  for (std::size_t o = 0; o < dout.size(); ++o) {
    const double g = dout[o];
    if (!dbias.empty()) dbias[o] += g;
    if (g == 0.0) continue;
    const double* w = weights.data() + o * n_in;
    if (!din.empty()) {
      for (std::size_t i = 0; i < n_in; ++i) din[i] += g * w[i];
    }
    if (!dweights.empty()) {
      double* dw = dweights.data() + o * n_in;
      for (std::size_t i = 0; i < n_in; ++i) dw[i] += g * in[i];
    }
  }
}

}  // namespace ghostcert::layers
