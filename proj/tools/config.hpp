#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ghostcert/dataset.hpp"
#include "ghostcert/evaluation.hpp"
#include "ghostcert/report.hpp"

namespace ghostcert::cli {

enum class Profile { full, fast };
std::string to_string(Profile p);
Profile parse_profile(const std::string& s);

struct IngestSettings {
  DatasetFormat format = DatasetFormat::synthetic_glyphs;
  std::filesystem::path images;  // idx image file, CIFAR batch or directory root
  std::filesystem::path labels;  // idx label file
  std::size_t count = 3000;      // synthetic formats only
  double test_fraction = 0.2;
};

struct TrainSettings {
  int epochs = 4;
  int batch_size = 64;
  double learning_rate = 2e-3;
  int ensemble_members = 3;
  int denoiser_epochs = 3;
  int denoiser_hidden_channels = 16;
};

// Settings of the single-shot certify and attack commands.
struct RunSettings {
  std::vector<std::size_t> indices{0};
  DefenseKind defense = DefenseKind::single;
  double sigma = 0.25;
  double epsilon = 10.0;
  AttackKind attack = AttackKind::ghostcert;
  bool targeted = false;
  MaskStrategy mask_strategy = MaskStrategy::saliency;
  int k = 5;
};

struct RunConfig {
  Profile profile = Profile::full;
  std::uint64_t seed = 0;
  std::filesystem::path data_root;
  std::filesystem::path dataset = "train.gcds";
  std::filesystem::path eval_dataset = "test.gcds";
  std::filesystem::path models_dir = "models";
  // Explicit checkpoint for certify/attack; otherwise models_dir/<defense>_sigma<σ>.gckp.
  std::optional<std::filesystem::path> model;
  std::optional<std::filesystem::path> records;  // report input
  IngestSettings ingest;
  TrainSettings training;
  GridSpec grid;
  RunSettings run;
  AblationKind ablation = AblationKind::mask_strategy;
  ReportOptions report;

  // Resolves a dataset/model path against data_root (absolute paths pass through).
  std::filesystem::path resolve(const std::filesystem::path& p) const;
};

// Defaults of a profile. full mirrors the reference hyper-parameter table; fast is the
// CI profile (N = 200, 20 images, two budgets, one σ).
RunConfig profile_defaults(Profile p);

// Checks doc against the schema (unknown keys and wrong types are ConfigErrors naming
// the dotted key) and applies it on top of base.
RunConfig apply_config(RunConfig base, const nlohmann::json& doc);

// Document that apply_config maps back to an identical configuration.
nlohmann::json to_json(const RunConfig& cfg);

// JSON Schema (draft 2020-12) describing the accepted configuration documents.
nlohmann::json config_schema();

// Throws ConfigError on semantic violations (empty grids, σ ≤ 0, ...).
void validate(const RunConfig& cfg);

std::string sigma_slug(double sigma);
std::filesystem::path model_filename(DefenseKind kind, double sigma);

}  // namespace ghostcert::cli
