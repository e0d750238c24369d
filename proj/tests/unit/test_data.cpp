#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include "doctest.h"
#include "ghostcert/dataset.hpp"
#include "ghostcert/error.hpp"
#include "ghostcert/netpbm.hpp"

using namespace ghostcert;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("ghostcert_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

void write_cifar_record(std::ofstream& out, int label, int seed) {
  out.put(static_cast<char>(label));
  for (int i = 0; i < 3072; ++i) out.put(static_cast<char>((i * 7 + seed) % 256));
}

}  // namespace

TEST_SUITE("data") {
  TEST_CASE("synthetic glyph digits are valid, balanced-ish and reproducible") {
    const auto a = make_glyph_digits(200, 5);
    const auto b = make_glyph_digits(200, 5);
    CHECK_NOTHROW(a.validate());
    CHECK(a.shape == Shape{28, 28, 1});
    CHECK(a.num_classes == 10);
    CHECK(a.content_hash() == b.content_hash());
    CHECK(a.content_hash() != make_glyph_digits(200, 6).content_hash());
    CHECK(std::set<int>(a.labels.begin(), a.labels.end()).size() == 10);
    for (const auto& img : a.images) {
      for (double v : img.values()) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
      }
    }
  }

  TEST_CASE("synthetic colour shapes are valid") {
    const auto ds = make_color_shapes(50, 1);
    CHECK_NOTHROW(ds.validate());
    CHECK(ds.shape == Shape{32, 32, 3});
    CHECK(ds.images.size() == 50);
  }

  TEST_CASE("idx round trip keeps every record") {
    TempDir dir("idx");
    const auto ds = make_glyph_digits(37, 2);
    write_idx(ds, dir.path / "img.idx", dir.path / "lbl.idx");
    const auto back = read_idx(dir.path / "img.idx", dir.path / "lbl.idx");
    CHECK(back.size() == 37);
    CHECK(back.labels == ds.labels);
    CHECK(back.content_hash() == ds.content_hash());
    // Re-ingestion is idempotent.
    CHECK(read_idx(dir.path / "img.idx", dir.path / "lbl.idx").content_hash() == back.content_hash());
  }

  TEST_CASE("truncated idx file names the expected and actual length") {
    TempDir dir("idx_trunc");
    const auto ds = make_glyph_digits(10, 2);
    write_idx(ds, dir.path / "img.idx", dir.path / "lbl.idx");
    const auto full = fs::file_size(dir.path / "img.idx");
    fs::resize_file(dir.path / "img.idx", full - 100);
    try {
      (void)read_idx(dir.path / "img.idx", dir.path / "lbl.idx");
      FAIL("expected a format error");
    } catch (const FormatError& e) {
      const std::string msg = e.what();
      // Lengths are whole-file byte counts: 16-byte header plus pixel data.
      CHECK(msg.find(std::to_string(full)) != std::string::npos);
      CHECK(msg.find(std::to_string(full - 100)) != std::string::npos);
    }
  }

  TEST_CASE("idx label/image count mismatch is rejected") {
    TempDir dir("idx_mismatch");
    write_idx(make_glyph_digits(10, 2), dir.path / "img.idx", dir.path / "lbl.idx");
    write_idx(make_glyph_digits(9, 2), dir.path / "img9.idx", dir.path / "lbl9.idx");
    CHECK_THROWS_AS(read_idx(dir.path / "img.idx", dir.path / "lbl9.idx"), FormatError);
  }

  TEST_CASE("CIFAR binary batches are decoded in CHW order") {
    TempDir dir("cifar");
    {
      std::ofstream out(dir.path / "batch.bin", std::ios::binary);
      write_cifar_record(out, 3, 0);
      write_cifar_record(out, 7, 1);
    }
    const auto ds = read_cifar_binary(dir.path / "batch.bin");
    REQUIRE(ds.size() == 2);
    CHECK(ds.labels == std::vector<int>{3, 7});
    CHECK(ds.shape == Shape{32, 32, 3});
    // Byte i of the record is channel i / 1024, pixel i % 1024.
    CHECK(ds.images[0].at(0, 1, 0) == doctest::Approx(7.0 / 255));
    CHECK(ds.images[0].at(0, 0, 1) == doctest::Approx((1024 * 7 % 256) / 255.0));
    {
      std::ofstream out(dir.path / "bad.bin", std::ios::binary);
      write_cifar_record(out, 3, 0);
      out.put(1);
    }
    CHECK_THROWS_AS(read_cifar_binary(dir.path / "bad.bin"), FormatError);
  }

  TEST_CASE("netpbm round trip and image directories") {
    TempDir dir("netpbm");
    const auto ds = make_color_shapes(6, 3);
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const auto sub = dir.path / std::to_string(ds.labels[i]);
      fs::create_directories(sub);
      write_netpbm(sub / ("img" + std::to_string(i) + ".ppm"), ds.images[i]);
      CHECK(read_netpbm(sub / ("img" + std::to_string(i) + ".ppm")) == quantize8(ds.images[i]));
    }
    const auto loaded = read_image_directory(dir.path);
    CHECK(loaded.size() == 6);
    CHECK(loaded.shape == Shape{32, 32, 3});
    std::multiset<int> a(loaded.labels.begin(), loaded.labels.end());
    std::multiset<int> b(ds.labels.begin(), ds.labels.end());
    CHECK(a == b);
  }

  TEST_CASE("dataset store round trip") {
    TempDir dir("gcds");
    const auto ds = make_glyph_digits(25, 8);
    save_dataset(ds, dir.path / "d.gcds");
    const auto back = load_dataset(dir.path / "d.gcds");
    CHECK(back.content_hash() == ds.content_hash());
    CHECK(back.labels == ds.labels);
    for (std::size_t i = 0; i < ds.size(); ++i) CHECK(back.images[i] == quantize8(ds.images[i]));
  }

  TEST_CASE("splits partition the records in order") {
    const auto ds = make_glyph_digits(40, 1);
    const auto s = split_dataset(ds, 0.25);
    CHECK(s.train.size() == 30);
    CHECK(s.test.size() == 10);
    CHECK(s.test.labels.front() == ds.labels[30]);
    CHECK_THROWS(split_dataset(ds, 1.5));
  }

  TEST_CASE("dataset formats parse by name") {
    CHECK(parse_dataset_format("idx") == DatasetFormat::idx);
    CHECK(parse_dataset_format("cifar-binary") == DatasetFormat::cifar_binary);
    CHECK(parse_dataset_format("image-directory") == DatasetFormat::image_directory);
    CHECK_THROWS(parse_dataset_format("jpeg"));
    for (auto f : {DatasetFormat::idx, DatasetFormat::cifar_binary, DatasetFormat::image_directory,
                   DatasetFormat::synthetic_glyphs, DatasetFormat::synthetic_shapes}) {
      CHECK(parse_dataset_format(to_string(f)) == f);
    }
  }
}
