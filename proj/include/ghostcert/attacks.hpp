#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "ghostcert/classifier.hpp"
#include "ghostcert/image.hpp"
#include "ghostcert/parallel.hpp"
#include "ghostcert/regions.hpp"

namespace ghostcert {

enum class ProjectionMode { sphere, ball };

std::string to_string(ProjectionMode mode);
ProjectionMode parse_projection_mode(const std::string& text);

struct AttackConfig {
  double epsilon = 1.0;      // L2 budget in pixel units of the attacked image
  double step_size = 1e-4;   // λ, applied to the unit-norm gradient direction
  int steps = 20;            // T
  int noise_batch = 32;      // N_atk
  double sigma = 0.25;
  bool targeted = false;
  int target = -1;
  std::uint64_t seed = 0;
  // Restrict the gradient to the mask before normalising, so every step lies in the
  // feasible set. When false the raw gradient is normalised and the mask is applied
  // only by the projection.
  bool mask_inside_forward = true;
  ProjectionMode projection = ProjectionMode::ball;

  void validate() const;
};

struct ShadowConfig {
  double step_size = 0.05;
  int steps = 20;
  double lambda_tv = 0.3;
  double lambda_color_mean = 1.0;
  double lambda_channel_sim = 0.5;
  // L2 bound of the bounded variant; infinity leaves δ unconstrained.
  double l2_bound = std::numeric_limits<double>::infinity();
  double sigma = 0.25;
  int noise_batch = 32;
  bool targeted = false;
  int target = -1;
  std::uint64_t seed = 0;

  void validate() const;
};

struct AttackResult {
  std::string kind;  // "ghostcert", "shadow" or "shadow_bounded"
  Image delta;
  Image adversarial;
  double l2_norm = 0.0;
  double linf_norm = 0.0;
  double total_variation = 0.0;
  // Objective value (noise-averaged loss, minus penalties for Shadow) before each step.
  std::vector<double> loss_trace;
  // Steps whose search direction vanished and were skipped.
  int skipped_steps = 0;
  std::string config_echo;  // canonical JSON of the configuration used
  std::uint64_t seed = 0;
};

// Anisotropic TV summed over channels.
double total_variation(const Image& delta);

// sphere: δ' = (ε·δ/‖δ‖₂) ⊙ m, zero when δ = 0. ball: rescale only when ‖δ‖₂ > ε, then mask.
Image project_and_mask(const Image& delta, double epsilon, const Mask& mask, ProjectionMode mode);

// Noise sample i of attack step t.
Image attack_noise(const Shape& shape, double sigma, std::uint64_t seed, int step, int index);

struct NoisyLossGradient {
  double mean_loss = 0.0;
  Image gradient;  // Σ_i ∂L(f(x + Δ_i + δ), label)/∂δ
};

// Sum of cross-entropy gradients over the step's noise batch. The parallel kernel
// keeps one buffer per sample and reduces them in index order, so both execution
// modes agree bit for bit.
NoisyLossGradient noise_averaged_gradient(const Classifier& clf, const Image& x, const Image& delta, int label,
                                          double sigma, int count, std::uint64_t seed, int step,
                                          Execution exec = Execution::parallel);

// Masked PGD against the smoothed classifier built on clf. label is the source label
// for untargeted attacks and ignored when cfg.targeted (cfg.target is used instead).
AttackResult ghostcert_attack(const Classifier& clf, const Image& x, int label, const Mask& mask, const AttackConfig& cfg,
                       Execution exec = Execution::parallel);

// Full-frame PGD on loss − λ_tv·TV − λ_cm·Σ_c mean_c(δ)² − λ_cs·dissim(δ) with no norm
// projection (cfg.l2_bound is ignored).
AttackResult shadow_attack(const Classifier& clf, const Image& x, int label, const ShadowConfig& cfg,
                           Execution exec = Execution::parallel);

// shadow_attack with a ball projection to cfg.l2_bound after every step.
AttackResult shadow_attack_bounded(const Classifier& clf, const Image& x, int label, const ShadowConfig& cfg,
                                   Execution exec = Execution::parallel);

// The Shadow penalty terms and their gradients, exposed for testing.
double color_mean_penalty(const Image& delta);
double channel_similarity_penalty(const Image& delta);
Image total_variation_gradient(const Image& delta);
Image color_mean_gradient(const Image& delta);
Image channel_similarity_gradient(const Image& delta);

}  // namespace ghostcert
