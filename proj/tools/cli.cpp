#include "cli.hpp"

#include <omp.h>

#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "config.hpp"
#include "ghostcert/checkpoint.hpp"
#include "ghostcert/denoiser.hpp"
#include "ghostcert/error.hpp"
#include "ghostcert/netpbm.hpp"
#include "ghostcert/random.hpp"
#include "ghostcert/training.hpp"
#include "ghostcert/version.hpp"

namespace ghostcert::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string hex16(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

struct Options {
  std::string command;
  std::string config_path;
  std::string profile;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool resume = false;
};

// State shared by one command invocation.
struct Run {
  Options opts;
  RunConfig cfg;
  fs::path out;
  std::ostream& log;
  json provenance;
  std::vector<std::string> warnings;
  std::vector<std::string> outputs;

  void warn(const std::string& w) {
    log << "warning: " << w << "\n";
    warnings.push_back(w);
  }
  fs::path output(const std::string& name) {
    outputs.push_back(name);
    return out / name;
  }
  void write_provenance(const std::string& status) {
    provenance["status"] = status;
    provenance["warnings"] = warnings;
    provenance["outputs"] = outputs;
    std::ofstream f(out / "provenance.json", std::ios::trunc);
    f << provenance.dump(2) << "\n";
  }
};

json versions() {
  return {{"ghostcert", kVersion},
          {"record_schema", kRecordSchemaVersion},
          {"checkpoint_format", kCheckpointVersion},
          {"report_renderer", kReportRendererVersion},
          {"compiler", __VERSION__},
          {"openmp", _OPENMP},
          {"cplusplus", __cplusplus}};
}

RunConfig load_config(const Options& o) {
  json doc = json::object();
  if (!o.config_path.empty()) {
    std::ifstream in(o.config_path);
    if (!in) throw ConfigError("cannot open configuration file " + o.config_path, "--config");
    try {
      doc = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ConfigError("configuration file " + o.config_path + " is not valid JSON: " + e.what(), "--config");
    }
  }
  // Precedence: profile defaults < configuration document < command-line flags.
  Profile profile = Profile::full;
  if (!o.profile.empty()) {
    profile = parse_profile(o.profile);
  } else if (doc.is_object() && doc.contains("profile") && doc["profile"].is_string()) {
    profile = parse_profile(doc["profile"].get<std::string>());
  }
  RunConfig cfg = apply_config(profile_defaults(profile), doc);
  cfg.profile = profile;
  if (o.seed) cfg.seed = *o.seed;
  cfg.grid.seed = cfg.seed;
  validate(cfg);
  return cfg;
}

Dataset load_dataset_file(const Run& r, const fs::path& p) {
  const auto path = r.cfg.resolve(p);
  if (!fs::exists(path)) throw ConfigError("dataset file " + path.string() + " does not exist", "dataset");
  return load_dataset(path);
}

ClassifierPtr load_model(const Run& r, DefenseKind kind, double sigma, const Shape& shape) {
  const fs::path path = r.cfg.model && r.opts.command != "evaluate" && r.opts.command != "ablate"
                            ? r.cfg.resolve(*r.cfg.model)
                            : r.cfg.resolve(r.cfg.models_dir) / model_filename(kind, sigma);
  if (!fs::exists(path)) {
    throw ConfigError("model checkpoint " + path.string() + " does not exist (run train first)", "models_dir");
  }
  auto model = load_classifier(path);
  if (model->input_shape() != shape) {
    throw ConfigError("model " + path.string() + " expects " + model->input_shape().str() + " inputs, dataset has " +
                          shape.str(),
                      "model");
  }
  if (const auto* d = dynamic_cast<const DenoisedClassifier*>(model.get())) d->require_sigma(sigma);
  return model;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

// ---------------------------------------------------------------------------- commands

void cmd_ingest(Run& r) {
  const auto& in = r.cfg.ingest;
  Dataset ds;
  json sources = json::array();
  switch (in.format) {
    case DatasetFormat::synthetic_glyphs: ds = make_glyph_digits(in.count, r.cfg.seed); break;
    case DatasetFormat::synthetic_shapes: ds = make_color_shapes(in.count, r.cfg.seed); break;
    case DatasetFormat::idx:
      ds = read_idx(r.cfg.resolve(in.images), r.cfg.resolve(in.labels));
      sources = {r.cfg.resolve(in.images).string(), r.cfg.resolve(in.labels).string()};
      break;
    case DatasetFormat::cifar_binary:
      ds = read_cifar_binary(r.cfg.resolve(in.images));
      sources = {r.cfg.resolve(in.images).string()};
      break;
    case DatasetFormat::image_directory:
      ds = read_image_directory(r.cfg.resolve(in.images));
      sources = {r.cfg.resolve(in.images).string()};
      break;
  }
  ds.validate();
  const auto split = split_dataset(ds, in.test_fraction);
  save_dataset(split.train, r.output("train.gcds"));
  save_dataset(split.test, r.output("test.gcds"));

  auto part = [](const Dataset& d, const std::string& file) {
    return json{{"file", file}, {"count", d.size()}, {"content_hash", hex16(d.content_hash())}};
  };
  json manifest = {{"format", to_string(in.format)},
                   {"sources", sources},
                   {"count", ds.size()},
                   {"shape", {ds.shape.height, ds.shape.width, ds.shape.channels}},
                   {"num_classes", ds.num_classes},
                   {"content_hash", hex16(ds.content_hash())},
                   {"test_fraction", in.test_fraction},
                   {"train", part(split.train, "train.gcds")},
                   {"test", part(split.test, "test.gcds")}};
  if (in.format == DatasetFormat::synthetic_glyphs || in.format == DatasetFormat::synthetic_shapes) {
    manifest["seed"] = r.cfg.seed;
  }
  manifest["manifest_hash"] = hex16(stable_hash(manifest.dump()));
  std::ofstream(r.output("manifest.json")) << manifest.dump(2) << "\n";
  r.log << "ingested " << ds.size() << " images " << ds.shape.str() << ", " << ds.num_classes << " classes: "
        << split.train.size() << " train / " << split.test.size() << " test, manifest "
        << manifest["manifest_hash"].get<std::string>() << "\n";
}

void cmd_train(Run& r) {
  const Dataset train = load_dataset_file(r, r.cfg.dataset);
  std::optional<Dataset> heldout;
  if (fs::exists(r.cfg.resolve(r.cfg.eval_dataset))) heldout = load_dataset_file(r, r.cfg.eval_dataset);
  const Dataset* eval = heldout ? &*heldout : nullptr;
  const auto arch = default_architecture(train);
  json report = json::array();
  for (auto kind : r.cfg.grid.defenses) {
    for (double sigma : r.cfg.grid.sigmas) {
      const auto file = model_filename(kind, sigma).string();
      TrainingConfig tc;
      tc.epochs = r.cfg.training.epochs;
      tc.batch_size = r.cfg.training.batch_size;
      tc.learning_rate = r.cfg.training.learning_rate;
      tc.noise_sigma = sigma;
      tc.seed = derive_seed(r.cfg.seed, stable_hash("train"), stable_hash(file));
      json entry = {{"file", file}, {"defense", to_string(kind)}, {"sigma", sigma}, {"seed", tc.seed}};
      ClassifierPtr model;
      if (kind == DefenseKind::single) {
        auto t = train_noise_augmented(train, arch, tc, eval);
        entry["epoch_loss"] = t.report.epoch_loss;
        model = t.model;
      } else if (kind == DefenseKind::ensemble) {
        model = train_ensemble(train, arch, tc, r.cfg.training.ensemble_members);
      } else {
        // Denoised smoothing: a base model trained on clean inputs behind a denoiser
        // trained for σ.
        TrainingConfig base_cfg = tc;
        base_cfg.noise_sigma = 0.0;
        auto base = train_noise_augmented(train, arch, base_cfg, eval);
        TrainingConfig dcfg = tc;
        dcfg.epochs = r.cfg.training.denoiser_epochs;
        DenoiserArchitecture darch;
        darch.input = train.shape;
        darch.hidden_channels = r.cfg.training.denoiser_hidden_channels;
        auto den = train_denoiser(train, darch, dcfg, eval);
        entry["denoiser_mse"] = den.report.denoiser_mse;
        entry["identity_mse"] = den.report.identity_mse;
        model = compose_denoised(base.model, den.model);
      }
      const Dataset& acc_set = eval ? *eval : train;
      entry["clean_accuracy"] = accuracy(*model, acc_set, 0.0, tc.seed);
      entry["noisy_accuracy"] = accuracy(*model, acc_set, sigma, tc.seed);
      save_classifier(r.output(file), *model);
      r.log << "trained " << file << ": clean accuracy " << fmt(entry["clean_accuracy"].get<double>())
            << ", noisy accuracy " << fmt(entry["noisy_accuracy"].get<double>()) << "\n";
      report.push_back(entry);
    }
  }
  std::ofstream(r.output("train_report.json")) << report.dump(2) << "\n";
}

void cmd_certify(Run& r) {
  const Dataset eval = load_dataset_file(r, r.cfg.eval_dataset);
  const auto model = load_model(r, r.cfg.run.defense, r.cfg.run.sigma, eval.shape);
  SmoothingConfig sc = r.cfg.grid.certification;
  sc.sigma = r.cfg.run.sigma;
  std::ostringstream csv;
  csv << "image_id,index,label,decision,correct,radius,pa_lower,count_top,n0,n,alpha,sigma,seed\n";
  for (auto index : r.cfg.run.indices) {
    if (index >= eval.size()) {
      throw ConfigError("index " + std::to_string(index) + " is outside the evaluation set", "run.indices");
    }
    const std::uint64_t seed = derive_seed(r.cfg.seed, stable_hash("certify"), index);
    const auto o = certify(*model, eval.images[index], sc, seed);
    const int label = eval.labels[index];
    csv << image_id(index) << "," << index << "," << label << "," << o.decision << ","
        << (o.decision == label ? 1 : 0) << "," << fmt(o.radius) << "," << fmt(o.pa_lower) << ","
        << o.counts.count(o.decision) << "," << sc.n0 << "," << sc.n << "," << sc.alpha << "," << sc.sigma << ","
        << seed << "\n";
  }
  std::ofstream(r.output("certifications.csv")) << csv.str();
  r.log << csv.str();
}

void cmd_attack(Run& r) {
  const Dataset eval = load_dataset_file(r, r.cfg.eval_dataset);
  const auto& run = r.cfg.run;
  const auto model = load_model(r, run.defense, run.sigma, eval.shape);
  CellSettings cell = r.cfg.grid.base;
  cell.defense = run.defense;
  cell.sigma = run.sigma;
  cell.epsilon = run.epsilon;
  cell.attack = run.attack;
  cell.targeted = run.targeted;
  cell.mask_strategy = run.attack == AttackKind::ghostcert ? run.mask_strategy : MaskStrategy::full_frame;
  cell.k = run.k;

  TrialContext ctx;
  ctx.defense = model.get();
  ctx.dataset = &eval;
  ctx.certification = r.cfg.grid.certification;
  ctx.certification.sigma = run.sigma;

  const auto records_path = r.output("records.ndjson");
  fs::remove(records_path);
  RecordStore store(records_path);
  fs::create_directories(r.out / "adversarial");
  std::ostringstream csv;
  csv << "trial_id,source_label,target_label,source_decision,post_decision,post_radius,l2,linf,tv,mask_pixels,"
         "skipped_steps,ok\n";
  std::size_t failed = 0;
  for (auto index : run.indices) {
    if (index >= eval.size()) {
      throw ConfigError("index " + std::to_string(index) + " is outside the evaluation set", "run.indices");
    }
    EligibleImage im;
    im.index = index;
    im.id = image_id(index);
    im.label = eval.labels[index];
    im.source = certify(*model, eval.images[index], ctx.certification,
                        derive_seed(r.cfg.seed, stable_hash("select"), index));
    if (im.source.decision != im.label) {
      r.warn(im.id + " is not certified with its true label (decision " + std::to_string(im.source.decision) + ")");
    }
    const auto rec = run_trial(ctx, cell, im, r.cfg.seed);
    store.append(rec);
    if (!rec.ok) {
      ++failed;
      r.warn("trial " + rec.trial_id + " failed: " + rec.error);
    } else {
      const auto ext = rec.adversarial.channels() == 1 ? ".pgm" : ".ppm";
      write_netpbm(r.out / "adversarial" / (im.id + ext), rec.adversarial);
    }
    csv << rec.trial_id << "," << rec.source_label << "," << rec.target_label << "," << rec.source.decision << ","
        << rec.post.decision << "," << fmt(rec.post.radius) << "," << fmt(rec.l2) << "," << fmt(rec.linf) << ","
        << fmt(rec.tv) << "," << rec.mask_pixels << "," << rec.skipped_steps << "," << (rec.ok ? 1 : 0) << "\n";
  }
  r.outputs.push_back("adversarial/");
  std::ofstream(r.output("attacks.csv")) << csv.str();
  r.log << csv.str();
  if (failed > 0) throw std::runtime_error(std::to_string(failed) + " attack trial(s) failed");
}

std::vector<Defense> load_defenses(const Run& r, const Shape& shape) {
  std::vector<Defense> out;
  for (auto kind : r.cfg.grid.defenses) {
    for (double sigma : r.cfg.grid.sigmas) out.push_back({kind, sigma, load_model(r, kind, sigma, shape)});
  }
  return out;
}

void run_grid_command(Run& r, bool ablation) {
  const Dataset eval = load_dataset_file(r, r.cfg.eval_dataset);
  const auto defenses = load_defenses(r, eval.shape);
  const auto records_path = r.out / "records.ndjson";
  if (fs::exists(records_path) && !r.opts.resume) {
    throw ConfigError(records_path.string() + " already exists; pass --resume to continue it", "--resume");
  }
  r.outputs.push_back("records.ndjson");
  RecordStore store(records_path);
  auto progress = [&](std::size_t done, std::size_t total, const TrialRecord& rec) {
    r.log << "[" << done << "/" << total << "] " << rec.trial_id << " -> "
          << (rec.ok ? to_string(rec.outcome()) : "failed") << "\n";
  };
  const auto result = ablation ? run_ablation(r.cfg.ablation, r.cfg.grid, eval, defenses, &store,
                                              Execution::parallel, progress)
                               : run_grid(r.cfg.grid, eval, defenses, &store, Execution::parallel, progress);
  for (const auto& w : result.warnings) r.warn(w);
  write_summaries_csv(r.output("summary.csv"), result.summaries);
  const auto files = render_report(result.records, r.out / "report", &eval, r.cfg.report);
  for (const auto& w : files.warnings) r.warn(w);
  for (const auto& f : files.written) r.outputs.push_back(fs::relative(f, r.out).string());
  r.provenance["trials"] = {{"executed", result.executed}, {"reused", result.reused}};
  r.log << "executed " << result.executed << " trials, reused " << result.reused << "\n"
        << summaries_csv(result.summaries);
}

void cmd_report(Run& r) {
  const fs::path path = r.cfg.records ? r.cfg.resolve(*r.cfg.records) : r.out / "records.ndjson";
  if (!fs::exists(path)) throw ConfigError("record store " + path.string() + " does not exist", "records");
  RecordStore store(path);
  std::vector<std::string> warnings;
  const auto records = store.load(&warnings);
  for (const auto& w : warnings) r.warn(w);
  std::optional<Dataset> eval;
  if (fs::exists(r.cfg.resolve(r.cfg.eval_dataset))) eval = load_dataset_file(r, r.cfg.eval_dataset);
  const auto files = render_report(records, r.out, eval ? &*eval : nullptr, r.cfg.report);
  for (const auto& w : files.warnings) r.warn(w);
  for (const auto& f : files.written) r.outputs.push_back(fs::relative(f, r.out).string());
  r.provenance["inputs"]["records"] = path.string();
  r.log << "rendered " << files.written.size() << " files from " << records.size() << " records\n";
}

int report_error(std::ostream& err, Run* r, const std::string& command, int code, const std::string& kind,
                 const std::string& message, const std::string& key = {}) {
  json e = {{"status", "error"}, {"exit_code", code}, {"kind", kind}, {"command", command}, {"message", message}};
  if (!key.empty()) e["key"] = key;
  err << e.dump() << "\n";
  if (r != nullptr) {
    try {
      r->provenance["error"] = e;
      r->write_provenance("error");
      std::ofstream(r->out / "error.json") << e.dump(2) << "\n";
    } catch (...) {
    }
  }
  return code;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Randomized-smoothing certification and certificate-spoofing workbench"};
  app.require_subcommand(1);
  Options o;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "JSON configuration document");
    sub->add_option("--profile", o.profile, "base profile: full or fast")->check(CLI::IsMember({"full", "fast"}));
    sub->add_option("--seed", o.seed, "master seed (overrides the configuration)");
    sub->add_option("--out", o.out, "output directory owned by this run")->required();
    sub->add_flag("--resume", o.resume, "continue an interrupted record store");
  };
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"ingest", "read a dataset and write train/test splits with a manifest"},
      {"train", "train one noise-augmented defense per (defense, sigma)"},
      {"certify", "certify evaluation images with the smoothed classifier"},
      {"attack", "attack evaluation images and re-certify the results"},
      {"evaluate", "run the evaluation grid and render the report"},
      {"ablate", "run the mask-strategy or k-sensitivity ablation"},
      {"report", "render tables, plots and panels from a record store"}};
  for (const auto& [name, help] : commands) add_common(app.add_subcommand(name, help));
  app.add_subcommand("schema", "print the JSON Schema of configuration documents");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    return report_error(err, nullptr, "", kExitConfigError, "usage", e.what());
  }
  o.command = app.get_subcommands().front()->get_name();
  if (o.command == "schema") {
    out << config_schema().dump(2) << "\n";
    return kExitOk;
  }

  RunConfig cfg;
  try {
    cfg = load_config(o);
  } catch (const ConfigError& e) {
    return report_error(err, nullptr, o.command, kExitConfigError, "config", e.what(), e.key());
  }

  Run r{o, cfg, fs::path(o.out), out, {}, {}, {}};
  try {
    fs::create_directories(r.out);
  } catch (const std::exception& e) {
    return report_error(err, nullptr, o.command, kExitRuntimeError, "runtime", e.what());
  }
  const json resolved = to_json(cfg);
  r.provenance = {{"command", o.command},
                  {"argv", args},
                  {"config", resolved},
                  {"config_hash", hex16(stable_hash(resolved.dump()))},
                  {"seed", cfg.seed},
                  {"profile", to_string(cfg.profile)},
                  {"resume", o.resume},
                  {"threads", omp_get_max_threads()},
                  {"versions", versions()}};
  if (cfg.profile == Profile::fast) {
    r.warn("fast profile: N = " + std::to_string(cfg.grid.certification.n) + ", " +
           std::to_string(cfg.grid.images) + " images per defense");
  }
  try {
    r.write_provenance("running");
    if (o.command == "ingest") cmd_ingest(r);
    else if (o.command == "train") cmd_train(r);
    else if (o.command == "certify") cmd_certify(r);
    else if (o.command == "attack") cmd_attack(r);
    else if (o.command == "evaluate") run_grid_command(r, false);
    else if (o.command == "ablate") run_grid_command(r, true);
    else if (o.command == "report") cmd_report(r);
    r.write_provenance("ok");
  } catch (const ConfigError& e) {
    return report_error(err, &r, o.command, kExitConfigError, "config", e.what(), e.key());
  } catch (const std::exception& e) {
    return report_error(err, &r, o.command, kExitRuntimeError, "runtime", e.what());
  }
  return kExitOk;
}

}  // namespace ghostcert::cli
