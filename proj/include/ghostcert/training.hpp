#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "ghostcert/conv_net.hpp"
#include "ghostcert/dataset.hpp"
#include "ghostcert/denoiser.hpp"
#include "ghostcert/ensemble.hpp"
#include "ghostcert/parallel.hpp"

namespace ghostcert {

struct TrainingConfig {
  int epochs = 5;
  int batch_size = 64;
  double learning_rate = 2e-3;
  // σ of the Gaussian corruption applied to every training input.
  double noise_sigma = 0.25;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainReport {
  std::vector<double> epoch_loss;
  double clean_accuracy = 0.0;
  double noisy_accuracy = 0.0;
  std::size_t eval_count = 0;
};

struct TrainedClassifier {
  std::shared_ptr<SmallConvNet> model;
  TrainReport report;
};

struct DenoiserReport {
  std::vector<double> epoch_loss;
  // Mean per-pixel squared error on noisy held-out inputs.
  double denoiser_mse = 0.0;
  double identity_mse = 0.0;
  std::size_t eval_count = 0;
};

struct TrainedDenoiser {
  std::shared_ptr<ConvDenoiser> model;
  DenoiserReport report;
};

// Seeds that initialise the networks trained from cfg.
std::uint64_t classifier_init_seed(const TrainingConfig& cfg);
std::uint64_t denoiser_init_seed(const TrainingConfig& cfg);

// Architecture whose input and class count match the dataset.
Architecture default_architecture(const Dataset& ds);

// Adam on cross-entropy with every input corrupted by N(0, σ²I). Accuracy is
// reported on `eval` (the training set when null), capped at 1000 records.
TrainedClassifier train_noise_augmented(const Dataset& train, const Architecture& arch,
                                        const TrainingConfig& cfg, const Dataset* eval = nullptr,
                                        Execution exec = Execution::parallel);

// k members trained with seeds derived from cfg.seed.
std::shared_ptr<Ensemble> train_ensemble(const Dataset& train, const Architecture& arch,
                                         const TrainingConfig& cfg, int members,
                                         Execution exec = Execution::parallel);

// MSE between denoise(x + ε) and x.
TrainedDenoiser train_denoiser(const Dataset& train, const DenoiserArchitecture& arch,
                               const TrainingConfig& cfg, const Dataset* heldout = nullptr,
                               Execution exec = Execution::parallel);

// Fraction of the first `limit` records classified correctly, optionally under one
// Gaussian draw per record.
double accuracy(const Classifier& clf, const Dataset& ds, double noise_sigma, std::uint64_t seed,
                std::size_t limit = 1000);

}  // namespace ghostcert
