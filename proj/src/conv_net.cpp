#include "ghostcert/conv_net.hpp"

#include <cmath>
#include <random>

#include "ghostcert/error.hpp"
#include "ghostcert/random.hpp"
#include "layers.hpp"

namespace ghostcert {

using layers::Tensor3;

void Architecture::validate() const {
  if (!input.valid()) throw ConfigError("architecture input shape must be positive", "input");
  if (conv_channels.size() < 2) throw ConfigError("architecture needs at least two conv layers", "conv_channels");
  for (int c : conv_channels) {
    if (c < 1) throw ConfigError("conv channel counts must be positive", "conv_channels");
  }
  if (num_classes < 2) throw ConfigError("num_classes must be >= 2", "num_classes");
  int h = input.height;
  int w = input.width;
  for (std::size_t i = 0; i < conv_channels.size(); ++i) {
    h /= 2;
    w /= 2;
  }
  if (h < 1 || w < 1) throw ConfigError("input too small for the number of pooling stages", "input");
}

int Architecture::last_conv_height() const {
  int h = input.height;
  for (std::size_t i = 0; i + 1 < conv_channels.size(); ++i) h /= 2;
  return h;
}

int Architecture::last_conv_width() const {
  int w = input.width;
  for (std::size_t i = 0; i + 1 < conv_channels.size(); ++i) w /= 2;
  return w;
}

std::size_t Architecture::feature_count() const {
  return static_cast<std::size_t>(conv_channels.back()) * (last_conv_height() / 2) *
         (last_conv_width() / 2);
}

std::size_t Architecture::parameter_count() const {
  std::size_t n = 0;
  int in_c = input.channels;
  for (int c : conv_channels) {
    n += layers::conv_weight_count(in_c, c) + static_cast<std::size_t>(c);
    in_c = c;
  }
  return n + feature_count() * num_classes + static_cast<std::size_t>(num_classes);
}

struct SmallConvNet::Cache {
  std::vector<Tensor3> conv_in;   // input of each conv layer
  std::vector<Tensor3> conv_pre;  // pre-activation output of each conv layer
  std::vector<Tensor3> conv_act;  // post-activation output of each conv layer
  std::vector<double> features;   // flattened last pooled block
  std::vector<double> logits;
};

namespace {

std::vector<double> he_init(const Architecture& arch, std::uint64_t seed) {
  std::vector<double> params(arch.parameter_count(), 0.0);
  Xoshiro256 gen(derive_seed(seed, 0x696E6974ull));
  std::size_t pos = 0;
  int in_c = arch.input.channels;
  for (int c : arch.conv_channels) {
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / (9.0 * in_c)));
    const auto nw = layers::conv_weight_count(in_c, c);
    for (std::size_t i = 0; i < nw; ++i) params[pos++] = normal(gen);
    pos += static_cast<std::size_t>(c);
    in_c = c;
  }
  std::normal_distribution<double> normal(0.0, std::sqrt(1.0 / static_cast<double>(arch.feature_count())));
  const auto nd = arch.feature_count() * arch.num_classes;
  for (std::size_t i = 0; i < nd; ++i) params[pos++] = normal(gen);
  return params;
}

}  // namespace

SmallConvNet::SmallConvNet(Architecture arch, std::uint64_t seed)
    : SmallConvNet(arch, he_init((arch.validate(), arch), seed)) {}

SmallConvNet::SmallConvNet(Architecture arch, std::vector<double> parameters)
    : arch_(std::move(arch)), params_(std::move(parameters)) {
  arch_.validate();
  if (params_.size() != arch_.parameter_count()) {
    throw ShapeError("small_conv_net: expected " + std::to_string(arch_.parameter_count()) +
                     " parameters, got " + std::to_string(params_.size()));
  }
  std::size_t pos = 0;
  int in_c = arch_.input.channels;
  for (int c : arch_.conv_channels) {
    offsets_.conv_w.push_back(pos);
    pos += layers::conv_weight_count(in_c, c);
    offsets_.conv_b.push_back(pos);
    pos += static_cast<std::size_t>(c);
    in_c = c;
  }
  offsets_.dense_w = pos;
  pos += arch_.feature_count() * arch_.num_classes;
  offsets_.dense_b = pos;
}

std::span<const double> SmallConvNet::conv_weights(std::size_t layer) const {
  const int in_c = layer == 0 ? arch_.input.channels : arch_.conv_channels[layer - 1];
  return std::span<const double>(params_).subspan(offsets_.conv_w[layer],
                                                  layers::conv_weight_count(in_c, arch_.conv_channels[layer]));
}

std::span<const double> SmallConvNet::conv_bias(std::size_t layer) const {
  return std::span<const double>(params_).subspan(offsets_.conv_b[layer],
                                                  static_cast<std::size_t>(arch_.conv_channels[layer]));
}

std::span<const double> SmallConvNet::dense_weights() const {
  return std::span<const double>(params_).subspan(offsets_.dense_w, arch_.feature_count() * arch_.num_classes);
}

std::span<const double> SmallConvNet::dense_bias() const {
  return std::span<const double>(params_).subspan(offsets_.dense_b, static_cast<std::size_t>(arch_.num_classes));
}

void SmallConvNet::forward(const Image& x, Cache& cache) const {
  require_input_shape(*this, x);
  const auto layers_n = arch_.conv_channels.size();
  cache.conv_in.resize(layers_n);
  cache.conv_pre.resize(layers_n);
  cache.conv_act.resize(layers_n);
  Tensor3 cur = layers::from_image(x);
  for (std::size_t l = 0; l < layers_n; ++l) {
    cache.conv_in[l] = std::move(cur);
    layers::conv_forward(cache.conv_in[l], conv_weights(l), conv_bias(l), arch_.conv_channels[l],
                         cache.conv_pre[l]);
    cache.conv_act[l] = layers::silu(cache.conv_pre[l]);
    cur = layers::avgpool2(cache.conv_act[l]);
  }
  cache.features = std::move(cur.v);
  cache.logits.assign(static_cast<std::size_t>(arch_.num_classes), 0.0);
  layers::dense_forward(cache.features, dense_weights(), dense_bias(), cache.logits);
}

void SmallConvNet::backward(const Cache& cache, std::span<const double> dlogits, Image* dinput,
                            std::span<double> dparams, FeatureMaps* dlast_activation) const {
  const bool want_params = !dparams.empty();
  auto slice = [&](std::size_t off, std::size_t n) {
    return want_params ? dparams.subspan(off, n) : std::span<double>{};
  };

  std::vector<double> dfeatures(cache.features.size(), 0.0);
  layers::dense_backward(cache.features, dense_weights(), dlogits, dfeatures,
                         slice(offsets_.dense_w, arch_.feature_count() * arch_.num_classes),
                         slice(offsets_.dense_b, static_cast<std::size_t>(arch_.num_classes)));

  const auto layers_n = arch_.conv_channels.size();
  const Tensor3& last = cache.conv_act[layers_n - 1];
  Tensor3 dpooled(last.c, last.h / 2, last.w / 2);
  dpooled.v = std::move(dfeatures);

  for (std::size_t l = layers_n; l-- > 0;) {
    const Tensor3& act = cache.conv_act[l];
    Tensor3 dact = layers::avgpool2_backward(dpooled, act.h, act.w);
    if (l == layers_n - 1 && dlast_activation) {
      *dlast_activation = FeatureMaps{dact.c, dact.h, dact.w, dact.v};
      if (!want_params && !dinput) return;
    }
    layers::silu_backward(cache.conv_pre[l], dact);
    const Tensor3& in = cache.conv_in[l];
    const bool need_din = l > 0 || dinput != nullptr;
    Tensor3 din(in.c, in.h, in.w);
    layers::conv_backward(in, conv_weights(l), dact, need_din ? &din : nullptr,
                          slice(offsets_.conv_w[l], conv_weights(l).size()),
                          slice(offsets_.conv_b[l], conv_bias(l).size()));
    if (l == 0) {
      if (dinput) *dinput = layers::to_image(din);
    } else {
      dpooled = std::move(din);
    }
  }
}

std::vector<double> SmallConvNet::logits(const Image& x) const {
  Cache cache;
  forward(x, cache);
  return cache.logits;
}

Image SmallConvNet::input_gradient(const Image& x, std::span<const double> upstream) const {
  Cache cache;
  forward(x, cache);
  Image g;
  backward(cache, upstream, &g, {}, nullptr);
  return g;
}

ConvFeatures SmallConvNet::last_conv_features(const Image& x, int label) const {
  if (label < 0 || label >= arch_.num_classes) throw std::out_of_range("last_conv_features: label out of range");
  Cache cache;
  forward(x, cache);
  std::vector<double> onehot(static_cast<std::size_t>(arch_.num_classes), 0.0);
  onehot[static_cast<std::size_t>(label)] = 1.0;
  ConvFeatures out;
  const Tensor3& act = cache.conv_act.back();
  out.activations = FeatureMaps{act.c, act.h, act.w, act.v};
  backward(cache, onehot, nullptr, {}, &out.gradients);
  return out;
}

double SmallConvNet::loss_and_parameter_gradient(const Image& x, int label, std::span<double> grad) const {
  if (grad.size() != params_.size()) throw ShapeError("parameter gradient buffer has wrong size");
  Cache cache;
  forward(x, cache);
  const double loss = cross_entropy(cache.logits, label);
  auto dlogits = softmax(cache.logits);
  dlogits[static_cast<std::size_t>(label)] -= 1.0;
  backward(cache, dlogits, nullptr, grad, nullptr);
  return loss;
}

ConvFeatures last_conv_activations_and_gradients(const Classifier& clf, const Image& x, int label) {
  const auto* source = dynamic_cast<const ConvFeatureSource*>(&clf);
  if (!source) throw UnsupportedError(clf.kind() + " does not expose a convolutional layer");
  return source->last_conv_features(x, label);
}

}  // namespace ghostcert
