#include "ghostcert/image.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ghostcert/error.hpp"

namespace ghostcert {

std::string Shape::str() const {
  return std::to_string(height) + "x" + std::to_string(width) + "x" + std::to_string(channels);
}

Image::Image(Shape shape, double fill) : shape_(shape), data_(shape.size(), fill) {
  if (!shape.valid()) throw ShapeError("image shape must be positive, got " + shape.str());
}

Image::Image(Shape shape, std::vector<double> values) : shape_(shape), data_(std::move(values)) {
  if (!shape.valid()) throw ShapeError("image shape must be positive, got " + shape.str());
  if (data_.size() != shape.size()) {
    throw ShapeError("image of shape " + shape.str() + " needs " + std::to_string(shape.size()) +
                     " values, got " + std::to_string(data_.size()));
  }
}

void require_same_shape(const Image& a, const Image& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": shape mismatch " + a.shape().str() + " vs " +
                     b.shape().str());
  }
}

Image& Image::operator+=(const Image& other) {
  require_same_shape(*this, other, "image +=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Image& Image::operator-=(const Image& other) {
  require_same_shape(*this, other, "image -=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

Image& Image::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

Image operator+(Image a, const Image& b) { return a += b; }
Image operator-(Image a, const Image& b) { return a -= b; }
Image operator*(Image a, double s) { return a *= s; }

double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

double l2_norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }
double l2_norm(const Image& img) { return l2_norm(img.values()); }

double linf_norm(const Image& img) {
  double m = 0.0;
  for (double v : img.values()) m = std::max(m, std::abs(v));
  return m;
}

Image clip01(Image img) {
  for (double& v : img.values()) v = std::clamp(v, 0.0, 1.0);
  return img;
}

Mask::Mask(int height, int width, bool fill)
    : height_(height), width_(width),
      bits_(static_cast<std::size_t>(height) * width, fill ? 1 : 0) {
  if (height <= 0 || width <= 0) throw ShapeError("mask dimensions must be positive");
}

Mask::Mask(int height, int width, std::vector<std::uint8_t> bits)
    : height_(height), width_(width), bits_(std::move(bits)) {
  if (height <= 0 || width <= 0) throw ShapeError("mask dimensions must be positive");
  if (bits_.size() != static_cast<std::size_t>(height) * width) {
    throw ShapeError("mask bit count does not match " + std::to_string(height) + "x" +
                     std::to_string(width));
  }
  for (auto& b : bits_) b = b ? 1 : 0;
}

std::size_t Mask::count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

Mask& Mask::operator|=(const Mask& other) {
  if (other.height_ != height_ || other.width_ != width_) throw ShapeError("mask union: shape mismatch");
  for (std::size_t i = 0; i < bits_.size(); ++i) bits_[i] = bits_[i] | other.bits_[i];
  return *this;
}

Mask Mask::complement() const {
  Mask out = *this;
  for (auto& b : out.bits_) b = b ? 0 : 1;
  return out;
}

Image Mask::apply(Image img) const {
  if (!matches(img.shape())) {
    throw ShapeError("mask " + std::to_string(height_) + "x" + std::to_string(width_) +
                     " does not match image " + img.shape().str());
  }
  const int c = img.channels();
  auto v = img.values();
  for (std::size_t p = 0; p < bits_.size(); ++p) {
    if (!bits_[p]) {
      for (int ch = 0; ch < c; ++ch) v[p * c + ch] = 0.0;
    }
  }
  return img;
}

}  // namespace ghostcert
