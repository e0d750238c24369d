#include "ghostcert/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iterator>
#include <map>
#include <random>

#include "ghostcert/error.hpp"
#include "ghostcert/netpbm.hpp"
#include "ghostcert/random.hpp"

namespace ghostcert {

namespace fs = std::filesystem;

void Dataset::validate() const {
  if (!shape.valid()) throw FormatError("dataset shape is invalid: " + shape.str());
  if (num_classes < 1) throw FormatError("dataset needs at least one class");
  if (images.size() != labels.size()) throw FormatError("dataset has mismatched image/label counts");
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i].shape() != shape) throw ShapeError("dataset image " + std::to_string(i) + " has shape " + images[i].shape().str());
    if (labels[i] < 0 || labels[i] >= num_classes) {
      throw FormatError("dataset label " + std::to_string(labels[i]) + " at record " + std::to_string(i) +
                        " outside [0, " + std::to_string(num_classes) + ")");
    }
  }
}

Dataset Dataset::slice(std::size_t begin, std::size_t end) const {
  end = std::min(end, size());
  begin = std::min(begin, end);
  Dataset out{shape, num_classes, {}, {}};
  out.images.assign(images.begin() + static_cast<std::ptrdiff_t>(begin), images.begin() + static_cast<std::ptrdiff_t>(end));
  out.labels.assign(labels.begin() + static_cast<std::ptrdiff_t>(begin), labels.begin() + static_cast<std::ptrdiff_t>(end));
  return out;
}

namespace {

unsigned char to_code(double v) { return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

}  // namespace

std::uint64_t Dataset::content_hash() const {
  std::uint64_t h = stable_hash(shape.str());
  h = stable_hash(std::to_string(num_classes), h);
  for (std::size_t i = 0; i < images.size(); ++i) {
    const std::string lbl = std::to_string(labels[i]) + ";";
    h = stable_hash(lbl, h);
    for (double v : images[i].values()) {
      const char c = static_cast<char>(to_code(v));
      h = stable_hash(std::string_view(&c, 1), h);
    }
  }
  return h;
}

Image quantize8(Image img) {
  for (double& v : img.values()) v = static_cast<double>(to_code(v)) / 255.0;
  return img;
}

namespace {

double segment_distance(double px, double py, double ax, double ay, double bx, double by) {
  const double vx = bx - ax;
  const double vy = by - ay;
  const double len2 = vx * vx + vy * vy;
  double t = len2 > 0.0 ? ((px - ax) * vx + (py - ay) * vy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double dx = px - (ax + t * vx);
  const double dy = py - (ay + t * vy);
  return std::sqrt(dx * dx + dy * dy);
}

struct Segment {
  double u0, v0, u1, v1;
};

// a b c d e f g
constexpr std::array<Segment, 7> kSegments{{{0, 0, 1, 0},
                                            {1, 0, 1, 1},
                                            {1, 1, 1, 2},
                                            {0, 2, 1, 2},
                                            {0, 1, 0, 2},
                                            {0, 0, 0, 1},
                                            {0, 1, 1, 1}}};

constexpr std::array<const char*, 10> kDigitSegments{"abcdef", "bc",      "abged", "abgcd", "fgbc",
                                                     "afgcd",  "afgedc", "abc",   "abcdefg", "abcdfg"};

Image render_glyph(int digit, Xoshiro256& gen) {
  auto uni = [&](double lo, double hi) { return lo + (hi - lo) * gen.uniform(); };
  std::normal_distribution<double> noise(0.0, 0.02);

  const double sx = uni(8.0, 11.0);
  const double sy = uni(8.0, 10.0);
  const double cx = 13.5 + uni(-2.0, 2.0);
  const double cy = 13.5 + uni(-2.0, 2.0);
  const double shear = uni(-0.25, 0.25);
  const double thick = uni(2.0, 3.0);
  const double background = uni(0.0, 0.1);

  std::array<double, 7> intensity{};
  for (double& v : intensity) v = uni(0.55, 1.0);

  auto to_px = [&](double u, double v) {
    return std::pair{cx + (u - 0.5) * sx - shear * (v - 1.0) * sy, cy + (v - 1.0) * sy};
  };

  Image img(Shape{28, 28, 1});
  for (int y = 0; y < 28; ++y) {
    for (int x = 0; x < 28; ++x) {
      double value = background;
      for (const char* s = kDigitSegments[static_cast<std::size_t>(digit)]; *s; ++s) {
        const auto idx = static_cast<std::size_t>(*s - 'a');
        const auto& seg = kSegments[idx];
        const auto [ax, ay] = to_px(seg.u0, seg.v0);
        const auto [bx, by] = to_px(seg.u1, seg.v1);
        const double d = segment_distance(x, y, ax, ay, bx, by);
        const double cover = std::clamp(0.5 * thick + 0.5 - d, 0.0, 1.0);
        value = std::max(value, background + cover * (intensity[idx] - background));
      }
      img.at(y, x, 0) = value + noise(gen);
    }
  }
  return quantize8(std::move(img));
}

bool inside_shape(int cls, double dx, double dy) {
  const double d = std::sqrt(dx * dx + dy * dy);
  switch (cls) {
    case 0: return d <= 1.0;
    case 1: return std::max(std::abs(dx), std::abs(dy)) <= 0.8;
    case 2: return dy <= 0.8 && dy >= -0.9 && std::abs(dx) <= (dy + 0.9) * 0.56;
    case 3: return std::abs(dx) + std::abs(dy) <= 1.0;
    case 4: return (std::abs(dx) <= 0.3 && std::abs(dy) <= 1.0) || (std::abs(dy) <= 0.3 && std::abs(dx) <= 1.0);
    case 5: return d >= 0.55 && d <= 1.0;
    case 6: return std::abs(dy) <= 0.35 && std::abs(dx) <= 1.0;
    case 7: return std::abs(dx) <= 0.35 && std::abs(dy) <= 1.0;
    case 8: return std::max(std::abs(dx), std::abs(dy)) <= 0.9 &&
                   (std::abs(dx - dy) <= 0.4 || std::abs(dx + dy) <= 0.4);
    default: return d <= 1.0 && dy >= 0.0;
  }
}

double color_distance(const std::array<double, 3>& a, const std::array<double, 3>& b) {
  double s = 0.0;
  for (int i = 0; i < 3; ++i) s += (a[static_cast<std::size_t>(i)] - b[static_cast<std::size_t>(i)]) * (a[static_cast<std::size_t>(i)] - b[static_cast<std::size_t>(i)]);
  return std::sqrt(s);
}

Image render_shape(int cls, Xoshiro256& gen) {
  auto uni = [&](double lo, double hi) { return lo + (hi - lo) * gen.uniform(); };
  std::normal_distribution<double> noise(0.0, 0.015);
  auto color = [&] { return std::array<double, 3>{uni(0, 1), uni(0, 1), uni(0, 1)}; };

  const auto bg1 = color();
  auto bg2 = color();
  auto fg = color();
  for (int tries = 0; tries < 64 && (color_distance(fg, bg1) < 0.45 || color_distance(fg, bg2) < 0.45); ++tries) fg = color();
  const double angle = uni(0.0, 2.0 * 3.14159265358979323846);
  const double split = uni(-6.0, 6.0);
  const double cx = 15.5 + uni(-4.0, 4.0);
  const double cy = 15.5 + uni(-4.0, 4.0);
  const double r = uni(7.0, 11.0);

  Image img(Shape{32, 32, 3});
  for (int y = 0; y < 32; ++y) {
    for (int x = 0; x < 32; ++x) {
      const bool side = std::cos(angle) * (x - 15.5) + std::sin(angle) * (y - 15.5) > split;
      const auto& bg = side ? bg1 : bg2;
      // 2×2 supersampled coverage of the object.
      int hits = 0;
      for (int sy = 0; sy < 2; ++sy)
        for (int sx = 0; sx < 2; ++sx)
          hits += inside_shape(cls, (x - 0.25 + 0.5 * sx - cx) / r, (y - 0.25 + 0.5 * sy - cy) / r) ? 1 : 0;
      const double cover = hits / 4.0;
      for (int c = 0; c < 3; ++c) {
        const auto ci = static_cast<std::size_t>(c);
        img.at(y, x, c) = bg[ci] + cover * (fg[ci] - bg[ci]) + noise(gen);
      }
    }
  }
  return quantize8(std::move(img));
}

}  // namespace

Dataset make_glyph_digits(std::size_t count, std::uint64_t seed) {
  Dataset ds{Shape{28, 28, 1}, 10, {}, {}};
  ds.images.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Xoshiro256 gen(derive_seed(seed, 0x676C797068ull, i));
    const int digit = static_cast<int>(gen() % 10);
    ds.labels.push_back(digit);
    ds.images.push_back(render_glyph(digit, gen));
  }
  return ds;
}

Dataset make_color_shapes(std::size_t count, std::uint64_t seed) {
  Dataset ds{Shape{32, 32, 3}, 10, {}, {}};
  ds.images.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Xoshiro256 gen(derive_seed(seed, 0x7368617065ull, i));
    const int cls = static_cast<int>(gen() % 10);
    ds.labels.push_back(cls);
    ds.images.push_back(render_shape(cls, gen));
  }
  return ds;
}

DatasetFormat parse_dataset_format(const std::string& name) {
  if (name == "idx") return DatasetFormat::idx;
  if (name == "cifar-binary") return DatasetFormat::cifar_binary;
  if (name == "image-directory") return DatasetFormat::image_directory;
  if (name == "synthetic-glyphs") return DatasetFormat::synthetic_glyphs;
  if (name == "synthetic-shapes") return DatasetFormat::synthetic_shapes;
  throw ConfigError("unknown dataset format '" + name + "'", "format");
}

std::string to_string(DatasetFormat f) {
  switch (f) {
    case DatasetFormat::idx: return "idx";
    case DatasetFormat::cifar_binary: return "cifar-binary";
    case DatasetFormat::image_directory: return "image-directory";
    case DatasetFormat::synthetic_glyphs: return "synthetic-glyphs";
    case DatasetFormat::synthetic_shapes: return "synthetic-shapes";
  }
  return "unknown";
}

namespace {

std::vector<unsigned char> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<unsigned char>& b, std::size_t pos, const fs::path& path) {
  if (b.size() < pos + 4) {
    throw FormatError(path.string() + ": truncated header, expected " + std::to_string(pos + 4) +
                          " bytes, file has " + std::to_string(b.size()),
                      b.size());
  }
  return (std::uint32_t{b[pos]} << 24) | (std::uint32_t{b[pos + 1]} << 16) | (std::uint32_t{b[pos + 2]} << 8) |
         std::uint32_t{b[pos + 3]};
}

void require_length(const std::vector<unsigned char>& b, std::size_t expected, const fs::path& path) {
  if (b.size() != expected) {
    throw FormatError(path.string() + ": expected " + std::to_string(expected) + " bytes, file has " +
                          std::to_string(b.size()),
                      std::min<std::size_t>(b.size(), expected));
  }
}

void put_be32(std::ofstream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace

Dataset read_idx(const fs::path& images_path, const fs::path& labels_path) {
  const auto img = read_bytes(images_path);
  const auto lbl = read_bytes(labels_path);
  const auto img_magic = read_be32(img, 0, images_path);
  if (img_magic != 0x00000803u && img_magic != 0x00000804u) {
    throw FormatError(images_path.string() + ": not an unsigned-byte idx image file (magic " + std::to_string(img_magic) + ")", 0);
  }
  const bool has_channels = img_magic == 0x00000804u;
  const auto count = read_be32(img, 4, images_path);
  const auto rows = read_be32(img, 8, images_path);
  const auto cols = read_be32(img, 12, images_path);
  const auto chans = has_channels ? read_be32(img, 16, images_path) : 1u;
  const std::size_t header = has_channels ? 20 : 16;
  const Shape shape{static_cast<int>(rows), static_cast<int>(cols), static_cast<int>(chans)};
  if (!shape.valid()) throw FormatError(images_path.string() + ": invalid image dimensions", 8);
  require_length(img, header + static_cast<std::size_t>(count) * shape.size(), images_path);

  if (read_be32(lbl, 0, labels_path) != 0x00000801u) throw FormatError(labels_path.string() + ": not an idx label file", 0);
  const auto label_count = read_be32(lbl, 4, labels_path);
  if (label_count != count) {
    throw FormatError("idx pair disagrees on record count: " + std::to_string(count) + " images vs " +
                          std::to_string(label_count) + " labels",
                      4);
  }
  require_length(lbl, 8 + static_cast<std::size_t>(count), labels_path);

  Dataset ds{shape, 0, {}, {}};
  ds.images.reserve(count);
  int max_label = 0;
  for (std::size_t i = 0; i < count; ++i) {
    Image im(shape);
    const std::size_t base = header + i * shape.size();
    for (std::size_t j = 0; j < shape.size(); ++j) im[j] = img[base + j] / 255.0;
    ds.images.push_back(std::move(im));
    ds.labels.push_back(lbl[8 + i]);
    max_label = std::max(max_label, static_cast<int>(lbl[8 + i]));
  }
  ds.num_classes = std::max(2, max_label + 1);
  ds.validate();
  return ds;
}

void write_idx(const Dataset& ds, const fs::path& images_path, const fs::path& labels_path) {
  std::ofstream img(images_path, std::ios::binary);
  std::ofstream lbl(labels_path, std::ios::binary);
  if (!img || !lbl) throw FormatError("cannot write idx files");
  const bool has_channels = ds.shape.channels != 1;
  put_be32(img, has_channels ? 0x00000804u : 0x00000803u);
  put_be32(img, static_cast<std::uint32_t>(ds.size()));
  put_be32(img, static_cast<std::uint32_t>(ds.shape.height));
  put_be32(img, static_cast<std::uint32_t>(ds.shape.width));
  if (has_channels) put_be32(img, static_cast<std::uint32_t>(ds.shape.channels));
  put_be32(lbl, 0x00000801u);
  put_be32(lbl, static_cast<std::uint32_t>(ds.size()));
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (double v : ds.images[i].values()) img.put(static_cast<char>(to_code(v)));
    lbl.put(static_cast<char>(ds.labels[i]));
  }
}

Dataset read_cifar_binary(const fs::path& path) {
  const auto b = read_bytes(path);
  constexpr std::size_t record = 1 + 3072;
  if (b.empty()) throw FormatError(path.string() + ": empty file", 0);
  if (b.size() % record != 0) {
    const std::size_t whole = b.size() / record;
    throw FormatError(path.string() + ": truncated record " + std::to_string(whole) + ", expected " +
                          std::to_string((whole + 1) * record) + " bytes, file has " + std::to_string(b.size()),
                      whole * record);
  }
  Dataset ds{Shape{32, 32, 3}, 10, {}, {}};
  for (std::size_t r = 0; r < b.size() / record; ++r) {
    const std::size_t base = r * record;
    if (b[base] > 9) throw FormatError(path.string() + ": label byte " + std::to_string(b[base]) + " out of range", base);
    ds.labels.push_back(b[base]);
    Image im(ds.shape);
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x)
          im.at(y, x, c) = b[base + 1 + static_cast<std::size_t>(c) * 1024 + static_cast<std::size_t>(y) * 32 + static_cast<std::size_t>(x)] / 255.0;
    ds.images.push_back(std::move(im));
  }
  return ds;
}

Dataset read_image_directory(const fs::path& root) {
  if (!fs::is_directory(root)) throw FormatError(root.string() + " is not a directory");
  std::map<int, fs::path> class_dirs;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (!entry.is_directory()) continue;
    const auto name = entry.path().filename().string();
    std::size_t used = 0;
    int label = -1;
    try {
      label = std::stoi(name, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != name.size() || label < 0) throw FormatError("class directory '" + name + "' is not a non-negative integer");
    class_dirs[label] = entry.path();
  }
  if (class_dirs.empty()) throw FormatError(root.string() + " contains no class directories");
  Dataset ds;
  for (const auto& [label, dir] : class_dirs) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
      const auto ext = entry.path().extension().string();
      if (entry.is_regular_file() && (ext == ".pgm" || ext == ".ppm")) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      Image im = read_netpbm(f);
      if (ds.images.empty()) ds.shape = im.shape();
      if (im.shape() != ds.shape) throw ShapeError(f.string() + " has shape " + im.shape().str() + ", expected " + ds.shape.str());
      ds.images.push_back(std::move(im));
      ds.labels.push_back(label);
    }
  }
  if (ds.images.empty()) throw FormatError(root.string() + " contains no .pgm/.ppm images");
  ds.num_classes = std::max(2, class_dirs.rbegin()->first + 1);
  ds.validate();
  return ds;
}

namespace {
constexpr char kDatasetMagic[4] = {'G', 'C', 'D', 'S'};
constexpr std::uint32_t kDatasetVersion = 1;

void put_u32(std::ofstream& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(const std::vector<unsigned char>& b, std::size_t& pos, const fs::path& path) {
  if (b.size() < pos + 4) throw FormatError(path.string() + ": truncated dataset header", b.size());
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t{b[pos + static_cast<std::size_t>(i)]} << (8 * i);
  pos += 4;
  return v;
}
}  // namespace

void save_dataset(const Dataset& ds, const fs::path& path) {
  ds.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out.write(kDatasetMagic, 4);
  put_u32(out, kDatasetVersion);
  put_u32(out, static_cast<std::uint32_t>(ds.shape.height));
  put_u32(out, static_cast<std::uint32_t>(ds.shape.width));
  put_u32(out, static_cast<std::uint32_t>(ds.shape.channels));
  put_u32(out, static_cast<std::uint32_t>(ds.num_classes));
  put_u32(out, static_cast<std::uint32_t>(ds.size()));
  for (int l : ds.labels) put_u32(out, static_cast<std::uint32_t>(l));
  for (const auto& im : ds.images)
    for (double v : im.values()) out.put(static_cast<char>(to_code(v)));
}

Dataset load_dataset(const fs::path& path) {
  const auto b = read_bytes(path);
  if (b.size() < 4 || !std::equal(kDatasetMagic, kDatasetMagic + 4, b.begin())) {
    throw FormatError(path.string() + ": not a ghostcert dataset file", 0);
  }
  std::size_t pos = 4;
  const auto version = get_u32(b, pos, path);
  if (version != kDatasetVersion) throw FormatError(path.string() + ": unsupported dataset version " + std::to_string(version), 4);
  Dataset ds;
  ds.shape.height = static_cast<int>(get_u32(b, pos, path));
  ds.shape.width = static_cast<int>(get_u32(b, pos, path));
  ds.shape.channels = static_cast<int>(get_u32(b, pos, path));
  ds.num_classes = static_cast<int>(get_u32(b, pos, path));
  const auto count = get_u32(b, pos, path);
  const std::size_t expected = pos + 4ull * count + static_cast<std::size_t>(count) * ds.shape.size();
  require_length(b, expected, path);
  for (std::uint32_t i = 0; i < count; ++i) ds.labels.push_back(static_cast<int>(get_u32(b, pos, path)));
  for (std::uint32_t i = 0; i < count; ++i) {
    Image im(ds.shape);
    for (std::size_t j = 0; j < ds.shape.size(); ++j) im[j] = b[pos++] / 255.0;
    ds.images.push_back(std::move(im));
  }
  ds.validate();
  return ds;
}

DatasetSplits split_dataset(const Dataset& ds, double test_fraction) {
  if (!(test_fraction >= 0.0 && test_fraction <= 1.0)) throw ConfigError("test_fraction must lie in [0,1]", "test_fraction");
  const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(ds.size())));
  const std::size_t n_train = ds.size() - n_test;
  return {ds.slice(0, n_train), ds.slice(n_train, ds.size())};
}

}  // namespace ghostcert
