#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace ghostcert {

struct Shape {
  int height = 0;
  int width = 0;
  int channels = 0;

  std::size_t pixels() const { return static_cast<std::size_t>(height) * width; }
  std::size_t size() const { return pixels() * channels; }
  bool valid() const { return height > 0 && width > 0 && channels > 0; }
  std::string str() const;

  friend bool operator==(const Shape&, const Shape&) = default;
};

// H×W×C array of reals, row-major with interleaved channels (HWC).
// Pixel-space values live in [0,1]; perturbations and gradients reuse the type unclamped.
class Image {
 public:
  Image() = default;
  explicit Image(Shape shape, double fill = 0.0);
  Image(Shape shape, std::vector<double> values);

  const Shape& shape() const { return shape_; }
  int height() const { return shape_.height; }
  int width() const { return shape_.width; }
  int channels() const { return shape_.channels; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& at(int row, int col, int ch) { return data_[index(row, col, ch)]; }
  double at(int row, int col, int ch) const { return data_[index(row, col, ch)]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  const std::vector<double>& storage() const { return data_; }

  std::size_t index(int row, int col, int ch) const {
    return (static_cast<std::size_t>(row) * shape_.width + col) * shape_.channels + ch;
  }

  Image& operator+=(const Image& other);
  Image& operator-=(const Image& other);
  Image& operator*=(double s);

  friend bool operator==(const Image&, const Image&) = default;

 private:
  Shape shape_{};
  std::vector<double> data_;
};

Image operator+(Image a, const Image& b);
Image operator-(Image a, const Image& b);
Image operator*(Image a, double s);

void require_same_shape(const Image& a, const Image& b, const char* what);

double l2_norm(std::span<const double> v);
double l2_norm(const Image& img);
double linf_norm(const Image& img);
double dot(std::span<const double> a, std::span<const double> b);

Image clip01(Image img);

// Binary H×W support mask; every value is exactly 0 or 1.
class Mask {
 public:
  Mask() = default;
  Mask(int height, int width, bool fill = false);
  Mask(int height, int width, std::vector<std::uint8_t> bits);

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t pixels() const { return bits_.size(); }

  bool operator()(int row, int col) const { return bits_[static_cast<std::size_t>(row) * width_ + col] != 0; }
  bool test(std::size_t i) const { return bits_[i] != 0; }
  void set(std::size_t i, bool on = true) { bits_[i] = on ? 1 : 0; }
  void set(int row, int col, bool on = true) { set(static_cast<std::size_t>(row) * width_ + col, on); }

  std::size_t count() const;
  bool any() const { return count() > 0; }
  const std::vector<std::uint8_t>& bits() const { return bits_; }

  Mask& operator|=(const Mask& other);
  Mask complement() const;

  // Broadcasts the mask across channels: img[p, c] *= m[p].
  Image apply(Image img) const;
  bool matches(const Shape& shape) const { return height_ == shape.height && width_ == shape.width; }

  friend bool operator==(const Mask&, const Mask&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<std::uint8_t> bits_;
};

}  // namespace ghostcert
