#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "ghostcert/classifier.hpp"

namespace ghostcert {

class Denoiser {
 public:
  virtual ~Denoiser() = default;
  virtual Shape shape() const = 0;
  // Output has the input's shape and lies in [0,1].
  virtual Image denoise(const Image& x) const = 0;
  // (∂denoise/∂x)ᵀ · upstream
  virtual Image backward(const Image& x, const Image& upstream) const = 0;
  virtual std::string kind() const = 0;
  // Noise level the denoiser was trained for; nullopt when it is σ-agnostic.
  virtual std::optional<double> trained_sigma() const { return std::nullopt; }
};

using DenoiserPtr = std::shared_ptr<const Denoiser>;

class IdentityDenoiser final : public Denoiser {
 public:
  explicit IdentityDenoiser(Shape shape) : shape_(shape) {}
  Shape shape() const override { return shape_; }
  Image denoise(const Image& x) const override;
  Image backward(const Image& x, const Image& upstream) const override;
  std::string kind() const override { return "identity"; }

 private:
  Shape shape_;
};

struct DenoiserArchitecture {
  Shape input{28, 28, 1};
  int hidden_channels = 16;
  int hidden_layers = 2;

  void validate() const;
  std::size_t parameter_count() const;
  friend bool operator==(const DenoiserArchitecture&, const DenoiserArchitecture&) = default;
};

// Residual conv autoencoder: clip(x + conv(silu(conv(...silu(conv(x))))), 0, 1).
class ConvDenoiser final : public Denoiser {
 public:
  ConvDenoiser(DenoiserArchitecture arch, double sigma, std::uint64_t seed);
  ConvDenoiser(DenoiserArchitecture arch, double sigma, std::vector<double> parameters);

  Shape shape() const override { return arch_.input; }
  Image denoise(const Image& x) const override;
  Image backward(const Image& x, const Image& upstream) const override;
  std::string kind() const override { return "conv_denoiser"; }
  std::optional<double> trained_sigma() const override { return sigma_; }

  // Mean squared error against `clean`; adds ∂mse/∂θ into grad.
  double mse_and_parameter_gradient(const Image& noisy, const Image& clean, std::span<double> grad) const;

  const DenoiserArchitecture& architecture() const { return arch_; }
  double sigma() const { return sigma_; }
  std::span<const double> parameters() const { return params_; }
  std::span<double> mutable_parameters() { return params_; }

 private:
  struct Cache;
  void forward(const Image& x, Cache& cache) const;
  void backward_impl(const Cache& cache, const Image& upstream, Image* dinput, std::span<double> dparams) const;

  DenoiserArchitecture arch_;
  double sigma_;
  std::vector<double> params_;
};

// f ∘ D: logits = base.logits(denoiser.denoise(x)).
class DenoisedClassifier final : public Classifier {
 public:
  DenoisedClassifier(ClassifierPtr base, DenoiserPtr denoiser);

  Shape input_shape() const override { return base_->input_shape(); }
  int num_classes() const override { return base_->num_classes(); }
  std::vector<double> logits(const Image& x) const override;
  Image input_gradient(const Image& x, std::span<const double> upstream) const override;
  std::string kind() const override { return "denoised"; }

  const ClassifierPtr& base() const { return base_; }
  const DenoiserPtr& denoiser() const { return denoiser_; }

  // Throws ConfigError when the denoiser was trained for a different noise level.
  void require_sigma(double sigma) const;

 private:
  ClassifierPtr base_;
  DenoiserPtr denoiser_;
};

std::shared_ptr<DenoisedClassifier> compose_denoised(ClassifierPtr base, DenoiserPtr denoiser);

}  // namespace ghostcert
