#include "ghostcert/ensemble.hpp"

#include "ghostcert/error.hpp"

namespace ghostcert {

Ensemble::Ensemble(std::vector<ClassifierPtr> members) : members_(std::move(members)) {
  if (members_.empty()) throw std::invalid_argument("ensemble needs at least one member");
  for (const auto& m : members_) {
    if (!m) throw std::invalid_argument("ensemble member is null");
    if (m->num_classes() != members_.front()->num_classes()) {
      throw ShapeError("ensemble members disagree on num_classes");
    }
    if (m->input_shape() != members_.front()->input_shape()) {
      throw ShapeError("ensemble members disagree on input shape");
    }
  }
}

std::vector<double> Ensemble::logits(const Image& x) const {
  std::vector<double> mean(static_cast<std::size_t>(num_classes()), 0.0);
  for (const auto& m : members_) {
    const auto z = m->logits(x);
    if (z.size() != mean.size()) throw ShapeError("ensemble member returned wrong logit count");
    for (std::size_t i = 0; i < z.size(); ++i) mean[i] += z[i];
  }
  const double k = static_cast<double>(members_.size());
  for (double& v : mean) v /= k;
  return mean;
}

Image Ensemble::input_gradient(const Image& x, std::span<const double> upstream) const {
  std::vector<double> scaled(upstream.begin(), upstream.end());
  for (double& v : scaled) v /= static_cast<double>(members_.size());
  Image g(x.shape());
  for (const auto& m : members_) g += m->input_gradient(x, scaled);
  return g;
}

std::vector<double> ensemble_logits(const Ensemble& ens, const Image& x) { return ens.logits(x); }

}  // namespace ghostcert
