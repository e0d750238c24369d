#include "config.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>

#include "ghostcert/error.hpp"
#include "ghostcert/training.hpp"

namespace ghostcert::cli {

using nlohmann::json;

namespace {

enum class Kind { integer, unsigned_integer, number, boolean, string, choice, integers, numbers, booleans, choices };

struct Field {
  std::string key;  // "section.name" or "name"
  Kind kind;
  std::vector<std::string> values;  // allowed strings for choice/choices
  std::string description;
  std::function<void(RunConfig&, const json&)> set;
  std::function<json(const RunConfig&)> get;
};

template <typename E>
std::vector<std::string> names(std::initializer_list<E> values) {
  std::vector<std::string> out;
  for (auto v : values) out.push_back(to_string(v));
  return out;
}

std::vector<std::string> dataset_formats() {
  return names({DatasetFormat::idx, DatasetFormat::cifar_binary, DatasetFormat::image_directory,
                DatasetFormat::synthetic_glyphs, DatasetFormat::synthetic_shapes});
}
std::vector<std::string> defense_kinds() {
  return names({DefenseKind::single, DefenseKind::ensemble, DefenseKind::denoised});
}
std::vector<std::string> attack_kinds() {
  return names({AttackKind::ghostcert, AttackKind::shadow, AttackKind::shadow_bounded});
}
std::vector<std::string> mask_strategies() {
  return names({MaskStrategy::saliency, MaskStrategy::random_pixel, MaskStrategy::random_region,
                MaskStrategy::full_frame});
}

std::optional<std::filesystem::path> optional_path(const json& j) {
  const auto s = j.get<std::string>();
  if (s.empty()) return std::nullopt;
  return std::filesystem::path(s);
}

template <typename E, typename Parse>
std::vector<E> parse_all(const json& j, Parse parse) {
  std::vector<E> out;
  for (const auto& v : j) out.push_back(parse(v.get<std::string>()));
  return out;
}

template <typename E>
json names_json(const std::vector<E>& values) {
  json out = json::array();
  for (auto v : values) out.push_back(to_string(v));
  return out;
}

// The single description of every accepted key: type, allowed values, and how it maps
// onto RunConfig in both directions.
const std::vector<Field>& schema() {
  static const std::vector<Field> fields = [] {
    std::vector<Field> f;
    auto add = [&](std::string key, Kind kind, std::vector<std::string> values, std::string description,
                   std::function<void(RunConfig&, const json&)> set, std::function<json(const RunConfig&)> get) {
      f.push_back({std::move(key), kind, std::move(values), std::move(description), std::move(set), std::move(get)});
    };
    // top level
    add("profile", Kind::choice, {"full", "fast"}, "base profile the document is applied on",
        [](RunConfig& c, const json& j) { c.profile = parse_profile(j.get<std::string>()); },
        [](const RunConfig& c) { return json(to_string(c.profile)); });
    add("seed", Kind::unsigned_integer, {}, "master seed of every random draw",
        [](RunConfig& c, const json& j) { c.seed = j.get<std::uint64_t>(); },
        [](const RunConfig& c) { return json(c.seed); });
    add("data_root", Kind::string, {}, "directory relative dataset/model paths resolve against",
        [](RunConfig& c, const json& j) { c.data_root = j.get<std::string>(); },
        [](const RunConfig& c) { return json(c.data_root.string()); });
    add("dataset", Kind::string, {}, "training dataset (.gcds)",
        [](RunConfig& c, const json& j) { c.dataset = j.get<std::string>(); },
        [](const RunConfig& c) { return json(c.dataset.string()); });
    add("eval_dataset", Kind::string, {}, "evaluation dataset (.gcds)",
        [](RunConfig& c, const json& j) { c.eval_dataset = j.get<std::string>(); },
        [](const RunConfig& c) { return json(c.eval_dataset.string()); });
    add("models_dir", Kind::string, {}, "directory of <defense>_sigma<σ>.gckp checkpoints",
        [](RunConfig& c, const json& j) { c.models_dir = j.get<std::string>(); },
        [](const RunConfig& c) { return json(c.models_dir.string()); });
    add("model", Kind::string, {}, "explicit checkpoint for certify/attack (empty: from models_dir)",
        [](RunConfig& c, const json& j) { c.model = optional_path(j); },
        [](const RunConfig& c) { return json(c.model ? c.model->string() : ""); });
    add("records", Kind::string, {}, "record store read by report (empty: <out>/records.ndjson)",
        [](RunConfig& c, const json& j) { c.records = optional_path(j); },
        [](const RunConfig& c) { return json(c.records ? c.records->string() : ""); });
    add("ablation", Kind::choice, {"mask_strategy", "k_sensitivity"}, "ablation run by the ablate command",
        [](RunConfig& c, const json& j) { c.ablation = parse_ablation_kind(j.get<std::string>()); },
        [](const RunConfig& c) { return json(to_string(c.ablation)); });

    // ingest
    add("ingest.format", Kind::choice, dataset_formats(), "source format",
        [](RunConfig& c, const json& j) { c.ingest.format = parse_dataset_format(j.get<std::string>()); },
        [](const RunConfig& c) { return json(to_string(c.ingest.format)); });
    add("ingest.images", Kind::string, {}, "idx image file, CIFAR batch or image directory",
        [](RunConfig& c, const json& j) { c.ingest.images = j.get<std::string>(); },
        [](const RunConfig& c) { return json(c.ingest.images.string()); });
    add("ingest.labels", Kind::string, {}, "idx label file",
        [](RunConfig& c, const json& j) { c.ingest.labels = j.get<std::string>(); },
        [](const RunConfig& c) { return json(c.ingest.labels.string()); });
    add("ingest.count", Kind::unsigned_integer, {}, "number of generated records (synthetic formats)",
        [](RunConfig& c, const json& j) { c.ingest.count = j.get<std::size_t>(); },
        [](const RunConfig& c) { return json(c.ingest.count); });
    add("ingest.test_fraction", Kind::number, {}, "trailing fraction written to the test split",
        [](RunConfig& c, const json& j) { c.ingest.test_fraction = j.get<double>(); },
        [](const RunConfig& c) { return json(c.ingest.test_fraction); });

    // training
    add("training.epochs", Kind::integer, {}, "epochs of noise-augmented training",
        [](RunConfig& c, const json& j) { c.training.epochs = j.get<int>(); },
        [](const RunConfig& c) { return json(c.training.epochs); });
    add("training.batch_size", Kind::integer, {}, "mini-batch size",
        [](RunConfig& c, const json& j) { c.training.batch_size = j.get<int>(); },
        [](const RunConfig& c) { return json(c.training.batch_size); });
    add("training.learning_rate", Kind::number, {}, "Adam step size",
        [](RunConfig& c, const json& j) { c.training.learning_rate = j.get<double>(); },
        [](const RunConfig& c) { return json(c.training.learning_rate); });
    add("training.ensemble_members", Kind::integer, {}, "members of the ensemble defense",
        [](RunConfig& c, const json& j) { c.training.ensemble_members = j.get<int>(); },
        [](const RunConfig& c) { return json(c.training.ensemble_members); });
    add("training.denoiser_epochs", Kind::integer, {}, "epochs of denoiser training",
        [](RunConfig& c, const json& j) { c.training.denoiser_epochs = j.get<int>(); },
        [](const RunConfig& c) { return json(c.training.denoiser_epochs); });
    add("training.denoiser_hidden_channels", Kind::integer, {}, "width of the denoiser",
        [](RunConfig& c, const json& j) { c.training.denoiser_hidden_channels = j.get<int>(); },
        [](const RunConfig& c) { return json(c.training.denoiser_hidden_channels); });

    // grid
    add("grid.defenses", Kind::choices, defense_kinds(), "defenses evaluated",
        [](RunConfig& c, const json& j) { c.grid.defenses = parse_all<DefenseKind>(j, parse_defense_kind); },
        [](const RunConfig& c) { return names_json(c.grid.defenses); });
    add("grid.sigmas", Kind::numbers, {}, "noise levels σ",
        [](RunConfig& c, const json& j) { c.grid.sigmas = j.get<std::vector<double>>(); },
        [](const RunConfig& c) { return json(c.grid.sigmas); });
    add("grid.epsilons", Kind::numbers, {}, "nominal L2 budgets (quoted at 224×224)",
        [](RunConfig& c, const json& j) { c.grid.epsilons = j.get<std::vector<double>>(); },
        [](const RunConfig& c) { return json(c.grid.epsilons); });
    add("grid.attacks", Kind::choices, attack_kinds(), "attacks evaluated",
        [](RunConfig& c, const json& j) { c.grid.attacks = parse_all<AttackKind>(j, parse_attack_kind); },
        [](const RunConfig& c) { return names_json(c.grid.attacks); });
    add("grid.targeted", Kind::booleans, {}, "untargeted (false) and/or targeted (true)",
        [](RunConfig& c, const json& j) { c.grid.targeted = j.get<std::vector<bool>>(); },
        [](const RunConfig& c) { return json(c.grid.targeted); });
    add("grid.mask_strategies", Kind::choices, mask_strategies(), "GhostCert mask strategies",
        [](RunConfig& c, const json& j) { c.grid.strategies = parse_all<MaskStrategy>(j, parse_mask_strategy); },
        [](const RunConfig& c) { return names_json(c.grid.strategies); });
    add("grid.ks", Kind::integers, {}, "number of regions in the mask",
        [](RunConfig& c, const json& j) { c.grid.ks = j.get<std::vector<int>>(); },
        [](const RunConfig& c) { return json(c.grid.ks); });
    add("grid.images", Kind::unsigned_integer, {}, "eligible images per (defense, σ)",
        [](RunConfig& c, const json& j) { c.grid.images = j.get<std::size_t>(); },
        [](const RunConfig& c) { return json(c.grid.images); });

    // certification
    add("certification.n0", Kind::integer, {}, "selection samples",
        [](RunConfig& c, const json& j) { c.grid.certification.n0 = j.get<int>(); },
        [](const RunConfig& c) { return json(c.grid.certification.n0); });
    add("certification.n", Kind::integer, {}, "estimation samples",
        [](RunConfig& c, const json& j) { c.grid.certification.n = j.get<int>(); },
        [](const RunConfig& c) { return json(c.grid.certification.n); });
    add("certification.alpha", Kind::number, {}, "failure probability",
        [](RunConfig& c, const json& j) { c.grid.certification.alpha = j.get<double>(); },
        [](const RunConfig& c) { return json(c.grid.certification.alpha); });
    add("certification.mu", Kind::number, {}, "margin: certify iff pa_lower > 0.5 + mu/2",
        [](RunConfig& c, const json& j) { c.grid.certification.mu = j.get<double>(); },
        [](const RunConfig& c) { return json(c.grid.certification.mu); });

    // attack (template for every cell)
    add("attack.steps", Kind::integer, {}, "PGD steps T",
        [](RunConfig& c, const json& j) { c.grid.base.steps = j.get<int>(); },
        [](const RunConfig& c) { return json(c.grid.base.steps); });
    add("attack.noise_batch", Kind::integer, {}, "noise samples averaged per step",
        [](RunConfig& c, const json& j) { c.grid.base.noise_batch = j.get<int>(); },
        [](const RunConfig& c) { return json(c.grid.base.noise_batch); });
    add("attack.step_rule", Kind::choice, {"relative", "absolute"}, "relative: λ = relative_step·ε/T",
        [](RunConfig& c, const json& j) { c.grid.base.step_rule = parse_step_rule(j.get<std::string>()); },
        [](const RunConfig& c) { return json(to_string(c.grid.base.step_rule)); });
    add("attack.relative_step", Kind::number, {}, "multiplier of the relative step rule",
        [](RunConfig& c, const json& j) { c.grid.base.relative_step = j.get<double>(); },
        [](const RunConfig& c) { return json(c.grid.base.relative_step); });
    add("attack.step_size", Kind::number, {}, "λ of the absolute step rule",
        [](RunConfig& c, const json& j) { c.grid.base.step_size = j.get<double>(); },
        [](const RunConfig& c) { return json(c.grid.base.step_size); });
    add("attack.projection", Kind::choice, {"ball", "sphere"}, "projection onto the ε set",
        [](RunConfig& c, const json& j) { c.grid.base.projection = parse_projection_mode(j.get<std::string>()); },
        [](const RunConfig& c) { return json(to_string(c.grid.base.projection)); });
    add("attack.mask_inside_forward", Kind::boolean, {}, "mask the gradient before normalisation",
        [](RunConfig& c, const json& j) { c.grid.base.mask_inside_forward = j.get<bool>(); },
        [](const RunConfig& c) { return json(c.grid.base.mask_inside_forward); });
    add("attack.saliency_at_target", Kind::boolean, {}, "explain the target label in targeted attacks",
        [](RunConfig& c, const json& j) { c.grid.base.saliency_at_target = j.get<bool>(); },
        [](const RunConfig& c) { return json(c.grid.base.saliency_at_target); });
    add("attack.epsilon_scaling", Kind::choice, {"scaled", "raw"}, "scale ε by sqrt(HW/224²)",
        [](RunConfig& c, const json& j) { c.grid.base.epsilon_scaling = parse_epsilon_scaling(j.get<std::string>()); },
        [](const RunConfig& c) { return json(to_string(c.grid.base.epsilon_scaling)); });
    add("attack.pixel_probability", Kind::number, {}, "keep probability of the random-pixel mask",
        [](RunConfig& c, const json& j) { c.grid.base.pixel_probability = j.get<double>(); },
        [](const RunConfig& c) { return json(c.grid.base.pixel_probability); });
    add("attack.lambda_tv", Kind::number, {}, "Shadow total-variation weight",
        [](RunConfig& c, const json& j) { c.grid.base.lambda_tv = j.get<double>(); },
        [](const RunConfig& c) { return json(c.grid.base.lambda_tv); });
    add("attack.lambda_color_mean", Kind::number, {}, "Shadow colour-mean weight",
        [](RunConfig& c, const json& j) { c.grid.base.lambda_color_mean = j.get<double>(); },
        [](const RunConfig& c) { return json(c.grid.base.lambda_color_mean); });
    add("attack.lambda_channel_sim", Kind::number, {}, "Shadow channel-similarity weight",
        [](RunConfig& c, const json& j) { c.grid.base.lambda_channel_sim = j.get<double>(); },
        [](const RunConfig& c) { return json(c.grid.base.lambda_channel_sim); });

    // run (certify / attack)
    add("run.indices", Kind::integers, {}, "evaluation-set indices certified or attacked",
        [](RunConfig& c, const json& j) {
          c.run.indices.clear();
          for (const auto& v : j) {
            if (v.get<long long>() < 0) throw ConfigError("indices must be >= 0", "run.indices");
            c.run.indices.push_back(v.get<std::size_t>());
          }
        },
        [](const RunConfig& c) { return json(c.run.indices); });
    add("run.defense", Kind::choice, defense_kinds(), "defense whose checkpoint is loaded",
        [](RunConfig& c, const json& j) { c.run.defense = parse_defense_kind(j.get<std::string>()); },
        [](const RunConfig& c) { return json(to_string(c.run.defense)); });
    add("run.sigma", Kind::number, {}, "noise level σ",
        [](RunConfig& c, const json& j) { c.run.sigma = j.get<double>(); },
        [](const RunConfig& c) { return json(c.run.sigma); });
    add("run.epsilon", Kind::number, {}, "nominal L2 budget",
        [](RunConfig& c, const json& j) { c.run.epsilon = j.get<double>(); },
        [](const RunConfig& c) { return json(c.run.epsilon); });
    add("run.attack", Kind::choice, attack_kinds(), "attack",
        [](RunConfig& c, const json& j) { c.run.attack = parse_attack_kind(j.get<std::string>()); },
        [](const RunConfig& c) { return json(to_string(c.run.attack)); });
    add("run.targeted", Kind::boolean, {}, "targeted attack",
        [](RunConfig& c, const json& j) { c.run.targeted = j.get<bool>(); },
        [](const RunConfig& c) { return json(c.run.targeted); });
    add("run.mask_strategy", Kind::choice, mask_strategies(), "GhostCert mask strategy",
        [](RunConfig& c, const json& j) { c.run.mask_strategy = parse_mask_strategy(j.get<std::string>()); },
        [](const RunConfig& c) { return json(to_string(c.run.mask_strategy)); });
    add("run.k", Kind::integer, {}, "number of regions in the mask",
        [](RunConfig& c, const json& j) { c.run.k = j.get<int>(); },
        [](const RunConfig& c) { return json(c.run.k); });

    // report
    add("report.amplification", Kind::number, {}, "perturbation panel amplification",
        [](RunConfig& c, const json& j) { c.report.amplification = j.get<double>(); },
        [](const RunConfig& c) { return json(c.report.amplification); });
    add("report.max_panels", Kind::unsigned_integer, {}, "image panels written",
        [](RunConfig& c, const json& j) { c.report.max_panels = j.get<std::size_t>(); },
        [](const RunConfig& c) { return json(c.report.max_panels); });
    return f;
  }();
  return fields;
}

bool is_section(const std::string& name) {
  for (const auto& f : schema()) {
    if (f.key.rfind(name + ".", 0) == 0) return true;
  }
  return false;
}

const Field* find_field(const std::string& key) {
  for (const auto& f : schema()) {
    if (f.key == key) return &f;
  }
  return nullptr;
}

std::string describe(Kind k) {
  switch (k) {
    case Kind::integer: return "an integer";
    case Kind::unsigned_integer: return "a non-negative integer";
    case Kind::number: return "a number";
    case Kind::boolean: return "a boolean";
    case Kind::string: return "a string";
    case Kind::choice: return "one of the allowed strings";
    case Kind::integers: return "an array of integers";
    case Kind::numbers: return "an array of numbers";
    case Kind::booleans: return "an array of booleans";
    case Kind::choices: return "an array of allowed strings";
  }
  return "?";
}

bool element_ok(Kind k, const json& v, const std::vector<std::string>& values) {
  switch (k) {
    case Kind::integer:
    case Kind::integers: return v.is_number_integer();
    case Kind::unsigned_integer: return v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0);
    case Kind::number:
    case Kind::numbers: return v.is_number();
    case Kind::boolean:
    case Kind::booleans: return v.is_boolean();
    case Kind::string: return v.is_string();
    case Kind::choice:
    case Kind::choices:
      return v.is_string() && std::find(values.begin(), values.end(), v.get<std::string>()) != values.end();
  }
  return false;
}

void check_value(const Field& f, const json& v) {
  const bool array_kind = f.kind == Kind::integers || f.kind == Kind::numbers || f.kind == Kind::booleans ||
                          f.kind == Kind::choices;
  bool ok = true;
  if (array_kind) {
    ok = v.is_array();
    if (ok) {
      for (const auto& e : v) ok = ok && element_ok(f.kind, e, f.values);
    }
  } else {
    ok = element_ok(f.kind, v, f.values);
  }
  if (!ok) {
    std::string msg = "'" + f.key + "' must be " + describe(f.kind);
    if (!f.values.empty()) {
      msg += " (";
      for (std::size_t i = 0; i < f.values.size(); ++i) msg += (i ? ", " : "") + f.values[i];
      msg += ")";
    }
    throw ConfigError(msg + ", got " + v.dump(), f.key);
  }
}

json element_schema(Kind k, const std::vector<std::string>& values) {
  switch (k) {
    case Kind::integer:
    case Kind::integers: return {{"type", "integer"}};
    case Kind::unsigned_integer: return {{"type", "integer"}, {"minimum", 0}};
    case Kind::number:
    case Kind::numbers: return {{"type", "number"}};
    case Kind::boolean:
    case Kind::booleans: return {{"type", "boolean"}};
    case Kind::string: return {{"type", "string"}};
    case Kind::choice:
    case Kind::choices: return {{"enum", values}};
  }
  return json::object();
}

}  // namespace

std::string to_string(Profile p) { return p == Profile::full ? "full" : "fast"; }

Profile parse_profile(const std::string& s) {
  if (s == "full") return Profile::full;
  if (s == "fast") return Profile::fast;
  throw ConfigError("unknown profile '" + s + "' (expected full or fast)", "profile");
}

std::filesystem::path RunConfig::resolve(const std::filesystem::path& p) const {
  if (p.empty() || p.is_absolute() || data_root.empty()) return p;
  return data_root / p;
}

RunConfig profile_defaults(Profile p) {
  RunConfig c;
  c.profile = p;
  c.grid.defenses = {DefenseKind::single};
  c.grid.certification.n0 = 10;
  c.grid.certification.alpha = 0.001;
  c.grid.base.k = 5;
  if (p == Profile::full) {
    c.grid.sigmas = {0.25, 0.5, 1.0};
    c.grid.epsilons = {2, 4, 6, 8, 10};
    c.grid.certification.n = 1000;
    c.grid.images = 100;
  } else {
    c.grid.sigmas = {0.25};
    c.grid.epsilons = {2, 10};
    c.grid.certification.n = 200;
    c.grid.images = 20;
  }
  if (const char* root = std::getenv("GHOSTCERT_DATA_ROOT"); root != nullptr && *root != '\0') {
    c.data_root = root;
  }
  return c;
}

RunConfig apply_config(RunConfig base, const json& doc) {
  if (!doc.is_object()) throw ConfigError("configuration document must be a JSON object");
  for (const auto& [key, value] : doc.items()) {
    if (is_section(key)) {
      if (!value.is_object()) throw ConfigError("'" + key + "' must be an object", key);
      for (const auto& [sub, v] : value.items()) {
        const std::string full = key + "." + sub;
        const Field* f = find_field(full);
        if (f == nullptr) throw ConfigError("unknown configuration key '" + full + "'", full);
        check_value(*f, v);
        f->set(base, v);
      }
      continue;
    }
    const Field* f = find_field(key);
    if (f == nullptr) throw ConfigError("unknown configuration key '" + key + "'", key);
    check_value(*f, value);
    f->set(base, value);
  }
  return base;
}

json to_json(const RunConfig& cfg) {
  json out = json::object();
  for (const auto& f : schema()) {
    const auto dot = f.key.find('.');
    if (dot == std::string::npos) {
      out[f.key] = f.get(cfg);
    } else {
      out[f.key.substr(0, dot)][f.key.substr(dot + 1)] = f.get(cfg);
    }
  }
  return out;
}

json config_schema() {
  json root = {{"$schema", "https://json-schema.org/draft/2020-12/schema"},
               {"title", "ghostcert run configuration"},
               {"type", "object"},
               {"additionalProperties", false},
               {"properties", json::object()}};
  for (const auto& f : schema()) {
    json s = element_schema(f.kind, f.values);
    if (f.kind == Kind::integers || f.kind == Kind::numbers || f.kind == Kind::booleans ||
        f.kind == Kind::choices) {
      s = {{"type", "array"}, {"items", s}};
    }
    s["description"] = f.description;
    const auto dot = f.key.find('.');
    if (dot == std::string::npos) {
      root["properties"][f.key] = s;
    } else {
      auto& section = root["properties"][f.key.substr(0, dot)];
      if (section.is_null()) {
        section = {{"type", "object"}, {"additionalProperties", false}, {"properties", json::object()}};
      }
      section["properties"][f.key.substr(dot + 1)] = s;
    }
  }
  return root;
}

void validate(const RunConfig& cfg) {
  auto require = [](bool ok, const std::string& key, const std::string& what) {
    if (!ok) throw ConfigError("'" + key + "' " + what, key);
  };
  require(cfg.ingest.test_fraction > 0.0 && cfg.ingest.test_fraction < 1.0, "ingest.test_fraction",
          "must lie in (0, 1)");
  require(cfg.training.ensemble_members >= 1, "training.ensemble_members", "must be >= 1");
  require(cfg.training.denoiser_epochs >= 0, "training.denoiser_epochs", "must be >= 0");
  require(cfg.training.denoiser_hidden_channels >= 1, "training.denoiser_hidden_channels", "must be >= 1");
  require(cfg.run.sigma > 0.0, "run.sigma", "must be > 0");
  require(cfg.run.epsilon >= 0.0, "run.epsilon", "must be >= 0");
  require(cfg.run.k >= 0, "run.k", "must be >= 0");
  require(!cfg.run.indices.empty(), "run.indices", "must not be empty");
  require(cfg.report.amplification > 0.0, "report.amplification", "must be > 0");
  TrainingConfig tc;
  tc.epochs = cfg.training.epochs;
  tc.batch_size = cfg.training.batch_size;
  tc.learning_rate = cfg.training.learning_rate;
  try {
    tc.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("training: ") + e.what(), "training." + e.key());
  }
  cfg.grid.validate();
}

std::string sigma_slug(double sigma) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", sigma);
  std::string s = buf;
  for (auto& ch : s) {
    if (ch == '.') ch = 'p';
  }
  return s;
}

std::filesystem::path model_filename(DefenseKind kind, double sigma) {
  return to_string(kind) + "_sigma" + sigma_slug(sigma) + ".gckp";
}

}  // namespace ghostcert::cli
