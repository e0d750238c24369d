#include "ghostcert/denoiser.hpp"

#include <cmath>
#include <random>

#include "ghostcert/error.hpp"
#include "ghostcert/random.hpp"
#include "layers.hpp"

namespace ghostcert {

using layers::Tensor3;

Image IdentityDenoiser::denoise(const Image& x) const {
  if (x.shape() != shape_) throw ShapeError("identity denoiser: shape mismatch");
  return clip01(x);
}

Image IdentityDenoiser::backward(const Image& x, const Image& upstream) const {
  Image g = upstream;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (x[i] < 0.0 || x[i] > 1.0) g[i] = 0.0;
  }
  return g;
}

void DenoiserArchitecture::validate() const {
  if (!input.valid()) throw ConfigError("denoiser input shape must be positive", "input");
  if (hidden_channels < 1) throw ConfigError("denoiser hidden_channels must be >= 1", "hidden_channels");
  if (hidden_layers < 1) throw ConfigError("denoiser hidden_layers must be >= 1", "hidden_layers");
}

namespace {

// Channel counts of each conv: C → h → ... → h → C.
std::vector<std::pair<int, int>> denoiser_convs(const DenoiserArchitecture& a) {
  std::vector<std::pair<int, int>> convs;
  int in = a.input.channels;
  for (int l = 0; l < a.hidden_layers; ++l) {
    convs.emplace_back(in, a.hidden_channels);
    in = a.hidden_channels;
  }
  convs.emplace_back(in, a.input.channels);
  return convs;
}

}  // namespace

std::size_t DenoiserArchitecture::parameter_count() const {
  std::size_t n = 0;
  for (auto [in, out] : denoiser_convs(*this)) n += layers::conv_weight_count(in, out) + static_cast<std::size_t>(out);
  return n;
}

namespace {

std::vector<double> denoiser_init(const DenoiserArchitecture& arch, std::uint64_t seed) {
  arch.validate();
  std::vector<double> params(arch.parameter_count(), 0.0);
  Xoshiro256 gen(derive_seed(seed, 0x64656E6Full));
  std::size_t pos = 0;
  const auto convs = denoiser_convs(arch);
  for (std::size_t l = 0; l < convs.size(); ++l) {
    auto [in, out] = convs[l];
    // The final layer starts small so the untrained network is close to the identity.
    const double scale = l + 1 == convs.size() ? 0.1 : 1.0;
    std::normal_distribution<double> normal(0.0, scale * std::sqrt(2.0 / (9.0 * in)));
    const auto nw = layers::conv_weight_count(in, out);
    for (std::size_t i = 0; i < nw; ++i) params[pos++] = normal(gen);
    pos += static_cast<std::size_t>(out);
  }
  return params;
}

}  // namespace

ConvDenoiser::ConvDenoiser(DenoiserArchitecture arch, double sigma, std::uint64_t seed)
    : ConvDenoiser(arch, sigma, denoiser_init(arch, seed)) {}

ConvDenoiser::ConvDenoiser(DenoiserArchitecture arch, double sigma, std::vector<double> parameters)
    : arch_(std::move(arch)), sigma_(sigma), params_(std::move(parameters)) {
  arch_.validate();
  if (!(sigma_ >= 0.0)) throw ConfigError("denoiser sigma must be >= 0", "sigma");
  if (params_.size() != arch_.parameter_count()) throw ShapeError("conv denoiser: parameter count mismatch");
}

struct ConvDenoiser::Cache {
  std::vector<Tensor3> conv_in;
  std::vector<Tensor3> conv_pre;  // pre-activation output of each conv layer
  std::vector<Tensor3> conv_out;  // post-activation for hidden layers, raw residual for the last
  Image pre_clip;
};

void ConvDenoiser::forward(const Image& x, Cache& cache) const {
  if (x.shape() != arch_.input) throw ShapeError("conv denoiser expects " + arch_.input.str() + ", got " + x.shape().str());
  const auto convs = denoiser_convs(arch_);
  cache.conv_in.resize(convs.size());
  cache.conv_pre.resize(convs.size());
  cache.conv_out.resize(convs.size());
  Tensor3 cur = layers::from_image(x);
  std::size_t pos = 0;
  const std::span<const double> p(params_);
  for (std::size_t l = 0; l < convs.size(); ++l) {
    auto [in, out] = convs[l];
    const auto nw = layers::conv_weight_count(in, out);
    cache.conv_in[l] = std::move(cur);
    layers::conv_forward(cache.conv_in[l], p.subspan(pos, nw), p.subspan(pos + nw, static_cast<std::size_t>(out)),
                         out, cache.conv_pre[l]);
    pos += nw + static_cast<std::size_t>(out);
    cache.conv_out[l] = l + 1 < convs.size() ? layers::silu(cache.conv_pre[l]) : cache.conv_pre[l];
    cur = cache.conv_out[l];
  }
  cache.pre_clip = x + layers::to_image(cache.conv_out.back());
}

void ConvDenoiser::backward_impl(const Cache& cache, const Image& upstream, Image* dinput,
                                 std::span<double> dparams) const {
  const auto convs = denoiser_convs(arch_);
  // Clip gradient: pass-through strictly inside (0,1).
  Image dpre = upstream;
  for (std::size_t i = 0; i < dpre.size(); ++i) {
    const double v = cache.pre_clip[i];
    if (!(v > 0.0 && v < 1.0)) dpre[i] = 0.0;
  }
  std::vector<std::size_t> offsets;
  std::size_t pos = 0;
  for (auto [in, out] : convs) {
    offsets.push_back(pos);
    pos += layers::conv_weight_count(in, out) + static_cast<std::size_t>(out);
  }
  const std::span<const double> p(params_);
  Tensor3 grad = layers::from_image(dpre);
  for (std::size_t l = convs.size(); l-- > 0;) {
    auto [in, out] = convs[l];
    const auto nw = layers::conv_weight_count(in, out);
    if (l + 1 < convs.size()) layers::silu_backward(cache.conv_pre[l], grad);
    const Tensor3& cin = cache.conv_in[l];
    Tensor3 din(cin.c, cin.h, cin.w);
    const bool need_din = l > 0 || dinput != nullptr;
    layers::conv_backward(cin, p.subspan(offsets[l], nw), grad, need_din ? &din : nullptr,
                          dparams.empty() ? std::span<double>{} : dparams.subspan(offsets[l], nw),
                          dparams.empty() ? std::span<double>{} : dparams.subspan(offsets[l] + nw, static_cast<std::size_t>(out)));
    grad = std::move(din);
  }
  if (dinput) {
    // Residual path adds the clipped upstream directly.
    *dinput = layers::to_image(grad) + dpre;
  }
}

Image ConvDenoiser::denoise(const Image& x) const {
  Cache cache;
  forward(x, cache);
  return clip01(std::move(cache.pre_clip));
}

Image ConvDenoiser::backward(const Image& x, const Image& upstream) const {
  require_same_shape(x, upstream, "conv denoiser backward");
  Cache cache;
  forward(x, cache);
  Image g;
  backward_impl(cache, upstream, &g, {});
  return g;
}

double ConvDenoiser::mse_and_parameter_gradient(const Image& noisy, const Image& clean,
                                                std::span<double> grad) const {
  require_same_shape(noisy, clean, "denoiser mse");
  if (grad.size() != params_.size()) throw ShapeError("denoiser gradient buffer has wrong size");
  Cache cache;
  forward(noisy, cache);
  Image out = clip01(cache.pre_clip);
  const double inv = 1.0 / static_cast<double>(out.size());
  double mse = 0.0;
  Image dout(out.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double d = out[i] - clean[i];
    mse += d * d;
    dout[i] = 2.0 * d * inv;
  }
  backward_impl(cache, dout, nullptr, grad);
  return mse * inv;
}

DenoisedClassifier::DenoisedClassifier(ClassifierPtr base, DenoiserPtr denoiser)
    : base_(std::move(base)), denoiser_(std::move(denoiser)) {
  if (!base_ || !denoiser_) throw std::invalid_argument("denoised classifier: null component");
  if (base_->input_shape() != denoiser_->shape()) {
    throw ShapeError("denoiser shape " + denoiser_->shape().str() + " does not match classifier input " +
                     base_->input_shape().str());
  }
}

std::vector<double> DenoisedClassifier::logits(const Image& x) const { return base_->logits(denoiser_->denoise(x)); }

Image DenoisedClassifier::input_gradient(const Image& x, std::span<const double> upstream) const {
  const Image denoised = denoiser_->denoise(x);
  return denoiser_->backward(x, base_->input_gradient(denoised, upstream));
}

void DenoisedClassifier::require_sigma(double sigma) const {
  const auto trained = denoiser_->trained_sigma();
  if (trained && std::abs(*trained - sigma) > 1e-12) {
    throw ConfigError("denoiser trained for sigma=" + std::to_string(*trained) +
                          " cannot serve a smoothing sigma of " + std::to_string(sigma),
                      "sigma");
  }
}

std::shared_ptr<DenoisedClassifier> compose_denoised(ClassifierPtr base, DenoiserPtr denoiser) {
  return std::make_shared<DenoisedClassifier>(std::move(base), std::move(denoiser));
}

}  // namespace ghostcert
