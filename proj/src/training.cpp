#include "ghostcert/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ghostcert/error.hpp"
#include "ghostcert/random.hpp"

namespace ghostcert {

void TrainingConfig::validate() const {
  if (epochs < 0) throw ConfigError("epochs must be >= 0", "epochs");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1", "batch_size");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0", "learning_rate");
  if (!(noise_sigma >= 0.0)) throw ConfigError("noise_sigma must be >= 0", "noise_sigma");
}

Architecture default_architecture(const Dataset& ds) {
  Architecture a;
  a.input = ds.shape;
  a.num_classes = ds.num_classes;
  a.conv_channels = ds.shape.channels == 1 ? std::vector<int>{8, 16} : std::vector<int>{12, 24};
  return a;
}

namespace {

class Adam {
 public:
  Adam(std::size_t n, double lr) : lr_(lr), m_(n, 0.0), v_(n, 0.0) {}

  void step(std::span<double> params, std::span<const double> grad) {
    ++t_;
    const double c1 = 1.0 - std::pow(kBeta1, t_);
    const double c2 = 1.0 - std::pow(kBeta2, t_);
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = kBeta1 * m_[i] + (1.0 - kBeta1) * grad[i];
      v_[i] = kBeta2 * v_[i] + (1.0 - kBeta2) * grad[i] * grad[i];
      params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + 1e-8);
    }
  }

 private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  double lr_;
  int t_ = 0;
  std::vector<double> m_, v_;
};

// Mean per-sample loss and mean gradient over a batch. Per-sample gradients land in
// their own buffers and are summed in index order, so thread count never changes the result.
template <class PerSample>
double batch_gradient(std::size_t batch, std::size_t params, PerSample per_sample, std::span<double> out,
                      Execution exec) {
  std::vector<double> buffers(batch * params, 0.0);
  std::vector<double> losses(batch, 0.0);
  const auto n = static_cast<std::int64_t>(batch);
  if (exec == Execution::serial) {
    for (std::int64_t i = 0; i < n; ++i) {
      const auto u = static_cast<std::size_t>(i);
      losses[u] = per_sample(u, std::span<double>(buffers).subspan(u * params, params));
    }
  } else {
#pragma omp parallel for schedule(dynamic, 1)
    for (std::int64_t i = 0; i < n; ++i) {
      const auto u = static_cast<std::size_t>(i);
      losses[u] = per_sample(u, std::span<double>(buffers).subspan(u * params, params));
    }
  }
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t b = 0; b < batch; ++b) {
    const double* g = buffers.data() + b * params;
    for (std::size_t p = 0; p < params; ++p) out[p] += g[p];
  }
  const double inv = 1.0 / static_cast<double>(batch);
  for (double& g : out) g *= inv;
  return std::accumulate(losses.begin(), losses.end(), 0.0) * inv;
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Xoshiro256 gen(derive_seed(seed, 0x73687566ull, static_cast<std::uint64_t>(epoch)));
  // Fisher–Yates with our own engine keeps the order identical across standard libraries.
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(gen() % i);
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

Image noisy_copy(const Image& x, double sigma, std::uint64_t seed) {
  Image noisy(x.shape());
  fill_gaussian(noisy.values(), sigma, seed);
  noisy += x;
  return noisy;
}

}  // namespace

std::uint64_t classifier_init_seed(const TrainingConfig& cfg) { return derive_seed(cfg.seed, 0x6D6F64656Cull); }

std::uint64_t denoiser_init_seed(const TrainingConfig& cfg) { return derive_seed(cfg.seed, 0x64656Eull); }

double accuracy(const Classifier& clf, const Dataset& ds, double noise_sigma, std::uint64_t seed, std::size_t limit) {
  const std::size_t n = std::min(limit, ds.size());
  if (n == 0) return 0.0;
  std::int64_t correct = 0;
  const auto total = static_cast<std::int64_t>(n);
#pragma omp parallel for reduction(+ : correct)
  for (std::int64_t i = 0; i < total; ++i) {
    const auto u = static_cast<std::size_t>(i);
    const Image input = noise_sigma > 0.0 ? noisy_copy(ds.images[u], noise_sigma, derive_seed(seed, 0x61636375ull, u))
                                          : ds.images[u];
    correct += clf.label(input) == ds.labels[u] ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(n);
}

TrainedClassifier train_noise_augmented(const Dataset& train, const Architecture& arch, const TrainingConfig& cfg,
                                        const Dataset* eval, Execution exec) {
  cfg.validate();
  if (train.empty()) throw std::invalid_argument("train_noise_augmented: dataset is empty");
  train.validate();
  if (arch.input != train.shape || arch.num_classes != train.num_classes) {
    throw ConfigError("architecture does not match dataset (" + arch.input.str() + " vs " + train.shape.str() + ")",
                      "architecture");
  }
  auto model = std::make_shared<SmallConvNet>(arch, classifier_init_seed(cfg));
  const std::size_t P = arch.parameter_count();
  Adam adam(P, cfg.learning_rate);
  std::vector<double> grad(P, 0.0);
  TrainReport report;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto order = epoch_order(train.size(), cfg.seed, epoch);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t B = std::min(order.size() - start, static_cast<std::size_t>(cfg.batch_size));
      const SmallConvNet& net = *model;
      auto per_sample = [&](std::size_t b, std::span<double> g) {
        const std::size_t idx = order[start + b];
        const Image input = noisy_copy(train.images[idx], cfg.noise_sigma,
                                       derive_seed(cfg.seed, 0x6E6F6973ull + static_cast<std::uint64_t>(epoch), start + b));
        return net.loss_and_parameter_gradient(input, train.labels[idx], g);
      };
      loss_sum += batch_gradient(B, P, per_sample, grad, exec);
      adam.step(model->mutable_parameters(), grad);
      ++batches;
    }
    report.epoch_loss.push_back(loss_sum / static_cast<double>(batches));
  }

  const Dataset& e = eval ? *eval : train;
  report.eval_count = std::min<std::size_t>(1000, e.size());
  report.clean_accuracy = accuracy(*model, e, 0.0, cfg.seed);
  report.noisy_accuracy = accuracy(*model, e, cfg.noise_sigma, cfg.seed);
  return {model, report};
}

std::shared_ptr<Ensemble> train_ensemble(const Dataset& train, const Architecture& arch, const TrainingConfig& cfg,
                                         int members, Execution exec) {
  if (members < 1) throw ConfigError("ensemble needs at least one member", "members");
  std::vector<ClassifierPtr> trained;
  for (int l = 0; l < members; ++l) {
    TrainingConfig member_cfg = cfg;
    member_cfg.seed = derive_seed(cfg.seed, 0x656E73ull, static_cast<std::uint64_t>(l));
    trained.push_back(train_noise_augmented(train, arch, member_cfg, nullptr, exec).model);
  }
  return std::make_shared<Ensemble>(std::move(trained));
}

TrainedDenoiser train_denoiser(const Dataset& train, const DenoiserArchitecture& arch, const TrainingConfig& cfg,
                               const Dataset* heldout, Execution exec) {
  cfg.validate();
  if (train.empty()) throw std::invalid_argument("train_denoiser: dataset is empty");
  if (arch.input != train.shape) throw ConfigError("denoiser architecture does not match dataset", "architecture");
  auto model = std::make_shared<ConvDenoiser>(arch, cfg.noise_sigma, denoiser_init_seed(cfg));
  const std::size_t P = arch.parameter_count();
  Adam adam(P, cfg.learning_rate);
  std::vector<double> grad(P, 0.0);
  DenoiserReport report;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto order = epoch_order(train.size(), cfg.seed, epoch);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t B = std::min(order.size() - start, static_cast<std::size_t>(cfg.batch_size));
      const ConvDenoiser& net = *model;
      auto per_sample = [&](std::size_t b, std::span<double> g) {
        const std::size_t idx = order[start + b];
        const Image noisy = noisy_copy(train.images[idx], cfg.noise_sigma,
                                       derive_seed(cfg.seed, 0x646E6F69ull + static_cast<std::uint64_t>(epoch), start + b));
        return net.mse_and_parameter_gradient(noisy, train.images[idx], g);
      };
      loss_sum += batch_gradient(B, P, per_sample, grad, exec);
      adam.step(model->mutable_parameters(), grad);
      ++batches;
    }
    report.epoch_loss.push_back(loss_sum / static_cast<double>(batches));
  }

  const Dataset& e = heldout ? *heldout : train;
  const std::size_t n = std::min<std::size_t>(1000, e.size());
  double den = 0.0;
  double ident = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Image noisy = noisy_copy(e.images[i], cfg.noise_sigma, derive_seed(cfg.seed, 0x68656C64ull, i));
    const Image out = model->denoise(noisy);
    for (std::size_t j = 0; j < out.size(); ++j) {
      den += (out[j] - e.images[i][j]) * (out[j] - e.images[i][j]);
      ident += (noisy[j] - e.images[i][j]) * (noisy[j] - e.images[i][j]);
    }
  }
  const double denom = static_cast<double>(n) * static_cast<double>(train.shape.size());
  report.eval_count = n;
  report.denoiser_mse = n ? den / denom : 0.0;
  report.identity_mse = n ? ident / denom : 0.0;
  return {model, report};
}

}  // namespace ghostcert
