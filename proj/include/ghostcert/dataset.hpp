#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ghostcert/image.hpp"

namespace ghostcert {

struct Dataset {
  Shape shape;
  int num_classes = 0;
  std::vector<Image> images;
  std::vector<int> labels;

  std::size_t size() const { return images.size(); }
  bool empty() const { return images.empty(); }
  // Throws on shape/label inconsistencies.
  void validate() const;
  Dataset slice(std::size_t begin, std::size_t end) const;
  // FNV-1a over 8-bit pixel codes and labels; stable across runs.
  std::uint64_t content_hash() const;
};

// Rounds every pixel to the nearest multiple of 1/255, the resolution every
// stored dataset uses.
Image quantize8(Image img);

// 28×28×1 seven-segment glyph digits with per-segment intensity, jitter and shear.
Dataset make_glyph_digits(std::size_t count, std::uint64_t seed);

// 32×32×3 colored geometric shapes (10 classes) over two-tone backgrounds.
Dataset make_color_shapes(std::size_t count, std::uint64_t seed);

enum class DatasetFormat { idx, cifar_binary, image_directory, synthetic_glyphs, synthetic_shapes };

DatasetFormat parse_dataset_format(const std::string& name);
std::string to_string(DatasetFormat f);

// IDX image/label file pair (MNIST layout).
Dataset read_idx(const std::filesystem::path& images, const std::filesystem::path& labels);
void write_idx(const Dataset& ds, const std::filesystem::path& images, const std::filesystem::path& labels);

// CIFAR-10 binary batch: records of 1 label byte + 3072 CHW pixel bytes.
Dataset read_cifar_binary(const std::filesystem::path& path);

// root/<integer label>/<file>.pgm|.ppm, traversed in sorted order.
Dataset read_image_directory(const std::filesystem::path& root);

// Compact store used by the CLI: "GCDS" header, int32 labels, 8-bit pixel codes.
void save_dataset(const Dataset& ds, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

struct DatasetSplits {
  Dataset train;
  Dataset test;
};

// First (1 − test_fraction) of the records train, the rest test.
DatasetSplits split_dataset(const Dataset& ds, double test_fraction);

}  // namespace ghostcert
