#include "ghostcert/attacks.hpp"

#include <cmath>
#include <sstream>

#include "json.hpp"

#include "ghostcert/error.hpp"
#include "ghostcert/random.hpp"

namespace ghostcert {

namespace {

constexpr std::uint64_t kAttackStream = 0x61747461636Bull;  // "attack"

void require_label(const Classifier& clf, int label, const char* what) {
  if (label < 0 || label >= clf.num_classes()) {
    throw DomainError(std::string(what) + " " + std::to_string(label) + " outside [0, " +
                      std::to_string(clf.num_classes()) + ")");
  }
}

// Label whose loss the attack differentiates and the sign of the ascent direction.
struct Objective {
  int label;
  double sign;
};

Objective objective_for(const Classifier& clf, int source, bool targeted, int target) {
  require_label(clf, source, "source label");
  if (!targeted) return {source, 1.0};
  require_label(clf, target, "target label");
  if (target == source) throw DomainError("target label equals the source label");
  return {target, -1.0};
}

void finish(AttackResult& r, const Image& x) {
  r.adversarial = clip01(x + r.delta);
  r.l2_norm = l2_norm(r.delta);
  r.linf_norm = linf_norm(r.delta);
  r.total_variation = total_variation(r.delta);
}

std::string json_number(double v) {
  return std::isfinite(v) ? nlohmann::json(v).dump() : std::string("\"inf\"");
}

}  // namespace

std::string to_string(ProjectionMode mode) { return mode == ProjectionMode::sphere ? "sphere" : "ball"; }

ProjectionMode parse_projection_mode(const std::string& text) {
  if (text == "sphere") return ProjectionMode::sphere;
  if (text == "ball") return ProjectionMode::ball;
  throw DomainError("unknown projection mode '" + text + "' (expected sphere or ball)");
}

void AttackConfig::validate() const {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw DomainError("attack epsilon must be positive and finite");
  if (!(step_size > 0.0)) throw DomainError("attack step size must be positive");
  if (steps < 0) throw DomainError("attack steps must be non-negative");
  if (noise_batch < 1) throw DomainError("attack noise batch must be at least 1");
  if (!(sigma >= 0.0)) throw DomainError("attack sigma must be non-negative");
}

void ShadowConfig::validate() const {
  if (!(step_size > 0.0)) throw DomainError("shadow step size must be positive");
  if (steps < 0) throw DomainError("shadow steps must be non-negative");
  if (noise_batch < 1) throw DomainError("shadow noise batch must be at least 1");
  if (!(sigma >= 0.0)) throw DomainError("shadow sigma must be non-negative");
  if (!(lambda_tv >= 0.0) || !(lambda_color_mean >= 0.0) || !(lambda_channel_sim >= 0.0)) {
    throw DomainError("shadow penalty weights must be non-negative");
  }
  if (!(l2_bound > 0.0)) throw DomainError("shadow L2 bound must be positive");
}

double total_variation(const Image& d) {
  const int H = d.height();
  const int W = d.width();
  const int C = d.channels();
  double tv = 0.0;
  for (int r = 0; r < H; ++r) {
    for (int c = 0; c < W; ++c) {
      for (int ch = 0; ch < C; ++ch) {
        const double v = d.at(r, c, ch);
        if (r + 1 < H) tv += std::abs(d.at(r + 1, c, ch) - v);
        if (c + 1 < W) tv += std::abs(d.at(r, c + 1, ch) - v);
      }
    }
  }
  return tv;
}

Image total_variation_gradient(const Image& d) {
  Image g(d.shape());
  const int H = d.height();
  const int W = d.width();
  const int C = d.channels();
  auto sgn = [](double v) { return static_cast<double>((v > 0.0) - (v < 0.0)); };
  for (int r = 0; r < H; ++r) {
    for (int c = 0; c < W; ++c) {
      for (int ch = 0; ch < C; ++ch) {
        const double v = d.at(r, c, ch);
        if (r + 1 < H) {
          const double s = sgn(d.at(r + 1, c, ch) - v);
          g.at(r + 1, c, ch) += s;
          g.at(r, c, ch) -= s;
        }
        if (c + 1 < W) {
          const double s = sgn(d.at(r, c + 1, ch) - v);
          g.at(r, c + 1, ch) += s;
          g.at(r, c, ch) -= s;
        }
      }
    }
  }
  return g;
}

namespace {

std::vector<double> channel_means(const Image& d) {
  const auto C = static_cast<std::size_t>(d.channels());
  std::vector<double> m(C, 0.0);
  const std::size_t P = d.shape().pixels();
  for (std::size_t p = 0; p < P; ++p) {
    for (std::size_t c = 0; c < C; ++c) m[c] += d[p * C + c];
  }
  for (double& v : m) v /= static_cast<double>(P);
  return m;
}

}  // namespace

double color_mean_penalty(const Image& d) {
  double s = 0.0;
  for (double m : channel_means(d)) s += m * m;
  return s;
}

Image color_mean_gradient(const Image& d) {
  const auto m = channel_means(d);
  const auto C = static_cast<std::size_t>(d.channels());
  const std::size_t P = d.shape().pixels();
  Image g(d.shape());
  for (std::size_t p = 0; p < P; ++p) {
    for (std::size_t c = 0; c < C; ++c) g[p * C + c] = 2.0 * m[c] / static_cast<double>(P);
  }
  return g;
}

double channel_similarity_penalty(const Image& d) {
  const auto C = static_cast<std::size_t>(d.channels());
  if (C < 2 || d.empty()) return 0.0;
  const std::size_t P = d.shape().pixels();
  double s = 0.0;
  for (std::size_t p = 0; p < P; ++p) {
    double mean = 0.0;
    for (std::size_t c = 0; c < C; ++c) mean += d[p * C + c];
    mean /= static_cast<double>(C);
    for (std::size_t c = 0; c < C; ++c) s += (d[p * C + c] - mean) * (d[p * C + c] - mean);
  }
  return s / static_cast<double>(d.size());
}

Image channel_similarity_gradient(const Image& d) {
  Image g(d.shape());
  const auto C = static_cast<std::size_t>(d.channels());
  if (C < 2) return g;
  const std::size_t P = d.shape().pixels();
  const double scale = 2.0 / static_cast<double>(d.size());
  for (std::size_t p = 0; p < P; ++p) {
    double mean = 0.0;
    for (std::size_t c = 0; c < C; ++c) mean += d[p * C + c];
    mean /= static_cast<double>(C);
    for (std::size_t c = 0; c < C; ++c) g[p * C + c] = scale * (d[p * C + c] - mean);
  }
  return g;
}

Image project_and_mask(const Image& delta, double epsilon, const Mask& mask, ProjectionMode mode) {
  if (!mask.matches(delta.shape())) {
    throw ShapeError("mask " + std::to_string(mask.height()) + "x" + std::to_string(mask.width()) +
                     " does not match perturbation " + delta.shape().str());
  }
  if (!(epsilon >= 0.0)) throw DomainError("projection radius must be non-negative");
  Image out = delta;
  const double norm = l2_norm(delta);
  if (mode == ProjectionMode::sphere) {
    if (norm == 0.0) return Image(delta.shape());
    out *= epsilon / norm;
  } else if (norm > epsilon) {
    out *= epsilon / norm;
  }
  out = mask.apply(std::move(out));
  // Guard against a last-ulp overshoot from the rescaling.
  const double after = l2_norm(out);
  if (after > epsilon) out *= epsilon / after;
  return out;
}

Image attack_noise(const Shape& shape, double sigma, std::uint64_t seed, int step, int index) {
  return gaussian_noise(shape, sigma, derive_seed(seed, kAttackStream, static_cast<std::uint64_t>(step)),
                        static_cast<std::uint64_t>(index));
}

NoisyLossGradient noise_averaged_gradient(const Classifier& clf, const Image& x, const Image& delta, int label,
                                          double sigma, int count, std::uint64_t seed, int step, Execution exec) {
  require_input_shape(clf, x);
  require_same_shape(x, delta, "noise_averaged_gradient");
  if (count < 1) throw DomainError("noise batch must be at least 1");
  std::vector<Image> grads(static_cast<std::size_t>(count));
  std::vector<double> losses(static_cast<std::size_t>(count), 0.0);
  const Image base = x + delta;
  auto one = [&](int i) {
    Image z = base;
    z += attack_noise(x.shape(), sigma, seed, step, i);
    auto lg = loss_and_input_gradient(clf, z, label);
    losses[static_cast<std::size_t>(i)] = lg.loss;
    grads[static_cast<std::size_t>(i)] = std::move(lg.gradient);
  };
  if (exec == Execution::parallel) {
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < count; ++i) one(i);
  } else {
    for (int i = 0; i < count; ++i) one(i);
  }
  NoisyLossGradient out{0.0, Image(x.shape())};
  for (int i = 0; i < count; ++i) {
    out.gradient += grads[static_cast<std::size_t>(i)];
    out.mean_loss += losses[static_cast<std::size_t>(i)];
  }
  out.mean_loss /= count;
  return out;
}

AttackResult ghostcert_attack(const Classifier& clf, const Image& x, int label, const Mask& mask, const AttackConfig& cfg,
                       Execution exec) {
  cfg.validate();
  require_input_shape(clf, x);
  if (!mask.matches(x.shape())) throw ShapeError("mask does not match the image");
  const auto obj = objective_for(clf, label, cfg.targeted, cfg.target);

  AttackResult r;
  r.kind = "ghostcert";
  r.seed = cfg.seed;
  r.delta = Image(x.shape());
  for (int t = 0; t < cfg.steps; ++t) {
    auto lg = noise_averaged_gradient(clf, x, r.delta, obj.label, cfg.sigma, cfg.noise_batch, cfg.seed, t, exec);
    r.loss_trace.push_back(lg.mean_loss);
    Image g = cfg.mask_inside_forward ? mask.apply(std::move(lg.gradient)) : std::move(lg.gradient);
    const double gn = l2_norm(g);
    if (!(gn > 0.0) || !std::isfinite(gn)) {
      ++r.skipped_steps;
      continue;
    }
    g *= obj.sign * cfg.step_size / gn;
    r.delta += g;
    r.delta = project_and_mask(r.delta, cfg.epsilon, mask, cfg.projection);
  }
  finish(r, x);
  std::ostringstream echo;
  echo << "{\"epsilon\":" << json_number(cfg.epsilon) << ",\"step_size\":" << json_number(cfg.step_size)
       << ",\"steps\":" << cfg.steps << ",\"noise_batch\":" << cfg.noise_batch
       << ",\"sigma\":" << json_number(cfg.sigma) << ",\"targeted\":" << (cfg.targeted ? "true" : "false")
       << ",\"target\":" << cfg.target << ",\"seed\":" << cfg.seed
       << ",\"mask_inside_forward\":" << (cfg.mask_inside_forward ? "true" : "false") << ",\"projection\":\""
       << to_string(cfg.projection) << "\",\"mask_pixels\":" << mask.count() << "}";
  r.config_echo = echo.str();
  return r;
}

namespace {

AttackResult run_shadow(const Classifier& clf, const Image& x, int label, const ShadowConfig& cfg, double bound,
                        const char* kind, Execution exec) {
  cfg.validate();
  require_input_shape(clf, x);
  const auto obj = objective_for(clf, label, cfg.targeted, cfg.target);
  const Mask full(x.height(), x.width(), true);

  AttackResult r;
  r.kind = kind;
  r.seed = cfg.seed;
  r.delta = Image(x.shape());
  for (int t = 0; t < cfg.steps; ++t) {
    auto lg = noise_averaged_gradient(clf, x, r.delta, obj.label, cfg.sigma, cfg.noise_batch, cfg.seed, t, exec);
    const double penalty = cfg.lambda_tv * total_variation(r.delta) +
                           cfg.lambda_color_mean * color_mean_penalty(r.delta) +
                           cfg.lambda_channel_sim * channel_similarity_penalty(r.delta);
    r.loss_trace.push_back(obj.sign * lg.mean_loss - penalty);

    // Ascent direction of sign·(mean loss) − penalties.
    Image g = std::move(lg.gradient);
    g *= obj.sign / cfg.noise_batch;
    if (cfg.lambda_tv > 0.0) {
      Image p = total_variation_gradient(r.delta);
      p *= cfg.lambda_tv;
      g -= p;
    }
    if (cfg.lambda_color_mean > 0.0) {
      Image p = color_mean_gradient(r.delta);
      p *= cfg.lambda_color_mean;
      g -= p;
    }
    if (cfg.lambda_channel_sim > 0.0) {
      Image p = channel_similarity_gradient(r.delta);
      p *= cfg.lambda_channel_sim;
      g -= p;
    }
    const double gn = l2_norm(g);
    if (!(gn > 0.0) || !std::isfinite(gn)) {
      ++r.skipped_steps;
      continue;
    }
    g *= cfg.step_size / gn;
    r.delta += g;
    if (std::isfinite(bound)) r.delta = project_and_mask(r.delta, bound, full, ProjectionMode::ball);
  }
  finish(r, x);
  std::ostringstream echo;
  echo << "{\"step_size\":" << json_number(cfg.step_size) << ",\"steps\":" << cfg.steps
       << ",\"lambda_tv\":" << json_number(cfg.lambda_tv)
       << ",\"lambda_color_mean\":" << json_number(cfg.lambda_color_mean)
       << ",\"lambda_channel_sim\":" << json_number(cfg.lambda_channel_sim) << ",\"l2_bound\":" << json_number(bound)
       << ",\"sigma\":" << json_number(cfg.sigma) << ",\"noise_batch\":" << cfg.noise_batch
       << ",\"targeted\":" << (cfg.targeted ? "true" : "false") << ",\"target\":" << cfg.target
       << ",\"seed\":" << cfg.seed << "}";
  r.config_echo = echo.str();
  return r;
}

}  // namespace

AttackResult shadow_attack(const Classifier& clf, const Image& x, int label, const ShadowConfig& cfg, Execution exec) {
  return run_shadow(clf, x, label, cfg, std::numeric_limits<double>::infinity(), "shadow", exec);
}

AttackResult shadow_attack_bounded(const Classifier& clf, const Image& x, int label, const ShadowConfig& cfg,
                                   Execution exec) {
  return run_shadow(clf, x, label, cfg, cfg.l2_bound, "shadow_bounded", exec);
}

}  // namespace ghostcert
