#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cli.hpp"
#include "config.hpp"
#include "doctest.h"
#include "ghostcert/checkpoint.hpp"
#include "ghostcert/classifier.hpp"
#include "ghostcert/dataset.hpp"
#include "ghostcert/error.hpp"
#include "ghostcert/evaluation.hpp"

using namespace ghostcert;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("ghostcert_cli_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  for (std::string f; std::getline(in, f, ',');) out.push_back(f);
  return out;
}

struct Invocation {
  int code = 0;
  std::string out;
  std::string err;
};

Invocation invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "ghostcert");
  std::ostringstream out, err;
  Invocation r;
  r.code = cli::run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

void write_json(const fs::path& p, const json& j) { std::ofstream(p) << j.dump(); }

// Four 5×5 grey images and a linear model that predicts class 0 for every input.
void constant_fixture(const fs::path& dir) {
  Dataset ds;
  ds.shape = Shape{5, 5, 1};
  ds.num_classes = 2;
  for (int i = 0; i < 4; ++i) {
    ds.images.push_back(quantize8(Image(ds.shape, 0.2 * i)));
    ds.labels.push_back(0);
  }
  save_dataset(ds, dir / "test.gcds");
  const LinearClassifier constant(ds.shape, 2, std::vector<double>(2 * 25, 0.0), {1.0, 0.0});
  save_classifier(dir / "constant.gckp", constant);
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("certify on one image with a constant classifier emits one row") {
    TempDir dir("certify");
    constant_fixture(dir.path);
    write_json(dir.path / "cfg.json", {{"profile", "fast"},
                                       {"data_root", dir.path.string()},
                                       {"model", "constant.gckp"},
                                       {"run", {{"indices", {2}}, {"sigma", 0.5}}}});
    const auto r = invoke({"certify", "--config", (dir.path / "cfg.json").string(), "--out", (dir.path / "o").string()});
    REQUIRE(r.code == 0);
    const auto rows = lines(slurp(dir.path / "o" / "certifications.csv"));
    REQUIRE(rows.size() == 2);
    const auto f = split(rows[1]);
    CHECK(f[0] == "img000002");
    CHECK(f[3] == "0");  // decision
    CHECK(f[7] == "200");  // every estimation sample votes for class 0
    // All n samples agree: the one-sided lower bound is alpha^(1/n) and the radius σ·Φ⁻¹ of it.
    const double pa = std::pow(0.001, 1.0 / 200.0);
    CHECK(std::stod(f[6]) == doctest::Approx(pa).epsilon(1e-6));
    const double z = std::sqrt(2.0) * [](double p) {
      // Φ⁻¹(p) = √2 · erf⁻¹(2p − 1); invert erf by bisection.
      double lo = 0.0, hi = 6.0, target = 2.0 * p - 1.0;
      for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (std::erf(mid) < target ? lo : hi) = mid;
      }
      return 0.5 * (lo + hi);
    }(pa);
    CHECK(std::stod(f[5]) == doctest::Approx(0.5 * z).epsilon(1e-5));
  }

  TEST_CASE("attack with zero steps emits a zero perturbation") {
    TempDir dir("attack");
    constant_fixture(dir.path);
    write_json(dir.path / "cfg.json", {{"profile", "fast"},
                                       {"data_root", dir.path.string()},
                                       {"model", "constant.gckp"},
                                       {"attack", {{"steps", 0}}},
                                       {"run", {{"indices", {1}}, {"mask_strategy", "random_pixel"}}}});
    const auto r = invoke({"attack", "--config", (dir.path / "cfg.json").string(), "--out", (dir.path / "o").string()});
    REQUIRE(r.code == 0);
    const auto rows = lines(slurp(dir.path / "o" / "attacks.csv"));
    REQUIRE(rows.size() == 2);
    const auto f = split(rows[1]);
    CHECK(std::stod(f[6]) == 0.0);  // l2
    CHECK(std::stod(f[7]) == 0.0);  // linf
    RecordStore store(dir.path / "o" / "records.ndjson");
    const auto records = store.load();
    REQUIRE(records.size() == 1);
    CHECK(records[0].l2 == 0.0);
    CHECK(records[0].adversarial == Dataset(load_dataset(dir.path / "test.gcds")).images[1]);
  }

  TEST_CASE("schema violations exit with the config code and a JSON report") {
    TempDir dir("schema");
    write_json(dir.path / "unknown.json", {{"grid", {{"sigmaz", {0.25}}}}});
    auto r = invoke({"evaluate", "--config", (dir.path / "unknown.json").string(), "--out", (dir.path / "o").string()});
    CHECK(r.code == cli::kExitConfigError);
    auto report = json::parse(r.err);
    CHECK(report["kind"] == "config");
    CHECK(report["key"] == "grid.sigmaz");

    write_json(dir.path / "type.json", {{"certification", {{"n", "many"}}}});
    r = invoke({"certify", "--config", (dir.path / "type.json").string(), "--out", (dir.path / "o").string()});
    CHECK(r.code == cli::kExitConfigError);
    CHECK(json::parse(r.err)["key"] == "certification.n");

    write_json(dir.path / "enum.json", {{"grid", {{"attacks", {"ghostcert", "carlini"}}}}});
    r = invoke({"evaluate", "--config", (dir.path / "enum.json").string(), "--out", (dir.path / "o").string()});
    CHECK(r.code == cli::kExitConfigError);

    write_json(dir.path / "range.json", {{"grid", {{"sigmas", {-1.0}}}}});
    r = invoke({"evaluate", "--config", (dir.path / "range.json").string(), "--out", (dir.path / "o").string()});
    CHECK(r.code == cli::kExitConfigError);

    r = invoke({"evaluate", "--out", (dir.path / "o").string(), "--profile", "medium"});
    CHECK(r.code == cli::kExitConfigError);
    r = invoke({"evaluate"});  // --out is required
    CHECK(r.code == cli::kExitConfigError);
  }

  TEST_CASE("runtime failures exit with a distinct code") {
    TempDir dir("runtime");
    fs::create_directories(dir.path / "good");
    fs::create_directories(dir.path / "bad");
    constant_fixture(dir.path / "good");
    std::ofstream(dir.path / "bad" / "test.gcds") << "GCDS garbage";
    write_json(dir.path / "cfg.json",
               {{"data_root", (dir.path / "bad").string()}, {"model", (dir.path / "good" / "constant.gckp").string()}});
    const auto r = invoke({"certify", "--config", (dir.path / "cfg.json").string(), "--out", (dir.path / "o").string()});
    CHECK(r.code == cli::kExitRuntimeError);
    CHECK(json::parse(r.err)["kind"] == "runtime");
    const auto prov = json::parse(slurp(dir.path / "o" / "provenance.json"));
    CHECK(prov["status"] == "error");
  }

  TEST_CASE("configuration documents round trip through the resolved form") {
    const auto base = cli::profile_defaults(cli::Profile::fast);
    const json doc = {{"seed", 99},
                      {"grid", {{"epsilons", {3, 9}}, {"mask_strategies", {"random_region"}}}},
                      {"attack", {{"steps", 7}, {"projection", "sphere"}}},
                      {"run", {{"indices", {4, 5}}}}};
    const auto cfg = cli::apply_config(base, doc);
    CHECK(cfg.seed == 99);
    CHECK(cfg.grid.base.steps == 7);
    CHECK(cfg.grid.base.projection == ProjectionMode::sphere);
    const auto again = cli::apply_config(cli::profile_defaults(cli::Profile::full), cli::to_json(cfg));
    CHECK(cli::to_json(again) == cli::to_json(cfg));

    // Every key of the resolved form is described by the published schema.
    const auto schema = cli::config_schema();
    CHECK(schema["additionalProperties"] == false);
    for (const auto& [key, value] : cli::to_json(cfg).items()) {
      REQUIRE(schema["properties"].contains(key));
      if (value.is_object()) {
        for (const auto& [sub, v] : value.items()) CHECK(schema["properties"][key]["properties"].contains(sub));
      }
    }
  }

  TEST_CASE("profiles carry the documented hyper-parameters") {
    const auto full = cli::profile_defaults(cli::Profile::full);
    CHECK(full.grid.sigmas == std::vector<double>{0.25, 0.5, 1.0});
    CHECK(full.grid.epsilons == std::vector<double>{2, 4, 6, 8, 10});
    CHECK(full.grid.certification.n == 1000);
    CHECK(full.grid.certification.n0 == 10);
    CHECK(full.grid.certification.alpha == 0.001);
    CHECK(full.grid.base.k == 5);
    CHECK(full.grid.images == 100);
    const auto fast = cli::profile_defaults(cli::Profile::fast);
    CHECK(fast.grid.certification.n == 200);
    CHECK(fast.grid.images == 20);
    CHECK(fast.grid.epsilons.size() == 2);
  }

  TEST_CASE("ingest writes splits and an idempotent manifest") {
    TempDir dir("ingest");
    write_json(dir.path / "cfg.json", {{"seed", 5}, {"ingest", {{"count", 50}, {"test_fraction", 0.2}}}});
    auto r = invoke({"ingest", "--config", (dir.path / "cfg.json").string(), "--out", (dir.path / "a").string()});
    REQUIRE(r.code == 0);
    r = invoke({"ingest", "--config", (dir.path / "cfg.json").string(), "--out", (dir.path / "b").string()});
    REQUIRE(r.code == 0);
    const auto ma = json::parse(slurp(dir.path / "a" / "manifest.json"));
    const auto mb = json::parse(slurp(dir.path / "b" / "manifest.json"));
    CHECK(ma["manifest_hash"] == mb["manifest_hash"]);
    CHECK(ma["train"]["count"] == 40);
    CHECK(ma["test"]["count"] == 10);
    CHECK(load_dataset(dir.path / "a" / "test.gcds").size() == 10);

    // The provenance block names the resolved configuration and its hash.
    const auto pa = json::parse(slurp(dir.path / "a" / "provenance.json"));
    const auto pb = json::parse(slurp(dir.path / "b" / "provenance.json"));
    CHECK(pa["status"] == "ok");
    CHECK(pa["config_hash"] == pb["config_hash"]);
    CHECK(pa["seed"] == 5);
    CHECK(pa["versions"].contains("record_schema"));
  }

  TEST_CASE("ingest reports truncated idx files") {
    TempDir dir("ingest_idx");
    const auto ds = make_glyph_digits(8, 1);
    write_idx(ds, dir.path / "img.idx", dir.path / "lbl.idx");
    fs::resize_file(dir.path / "img.idx", fs::file_size(dir.path / "img.idx") - 100);
    write_json(dir.path / "cfg.json",
               {{"data_root", dir.path.string()},
                {"ingest", {{"format", "idx"}, {"images", "img.idx"}, {"labels", "lbl.idx"}}}});
    const auto r = invoke({"ingest", "--config", (dir.path / "cfg.json").string(), "--out", (dir.path / "o").string()});
    CHECK(r.code == cli::kExitRuntimeError);
    const auto msg = json::parse(r.err)["message"].get<std::string>();
    CHECK(msg.find("expected") != std::string::npos);
  }

  TEST_CASE("report on the record fixture reproduces the golden plots") {
    TempDir dir("report");
    const fs::path fixture = fs::path(GHOSTCERT_FIXTURE_DIR) / "report";
    write_json(dir.path / "cfg.json", {{"records", (fixture / "records.ndjson").string()},
                                       {"eval_dataset", (dir.path / "absent.gcds").string()}});
    const auto r = invoke({"report", "--config", (dir.path / "cfg.json").string(), "--out", (dir.path / "o").string()});
    REQUIRE(r.code == 0);
    std::size_t compared = 0;
    for (const auto& entry : fs::recursive_directory_iterator(fixture / "golden")) {
      if (!entry.is_regular_file()) continue;
      const auto rel = fs::relative(entry.path(), fixture / "golden");
      CHECK_MESSAGE(slurp(entry.path()) == slurp(dir.path / "o" / rel), rel.string());
      ++compared;
    }
    CHECK(compared == 3);
  }
}
