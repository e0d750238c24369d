#pragma once

#include <vector>

#include "ghostcert/classifier.hpp"

namespace ghostcert {

// Soft ensemble: logits are the arithmetic mean of the member logits.
class Ensemble final : public Classifier {
 public:
  explicit Ensemble(std::vector<ClassifierPtr> members);

  Shape input_shape() const override { return members_.front()->input_shape(); }
  int num_classes() const override { return members_.front()->num_classes(); }
  std::vector<double> logits(const Image& x) const override;
  Image input_gradient(const Image& x, std::span<const double> upstream) const override;
  std::string kind() const override { return "ensemble"; }

  const std::vector<ClassifierPtr>& members() const { return members_; }
  std::size_t size() const { return members_.size(); }

 private:
  std::vector<ClassifierPtr> members_;
};

std::vector<double> ensemble_logits(const Ensemble& ens, const Image& x);

}  // namespace ghostcert
