#include "ghostcert/evaluation.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"

#include "ghostcert/error.hpp"
#include "ghostcert/random.hpp"
#include "ghostcert/regions.hpp"
#include "ghostcert/saliency.hpp"

namespace ghostcert {

using nlohmann::json;

namespace {

constexpr std::uint64_t kSelectStream = 0x73656C656374ull;  // "select"
constexpr std::uint64_t kTrialStream = 0x747269616Cull;     // "trial"
constexpr std::uint64_t kAttackSeed = 0x61;
constexpr std::uint64_t kCertSeed = 0x63;
constexpr std::uint64_t kMaskSeed = 0x6D;

template <class E>
E parse_enum(const std::string& s, std::initializer_list<E> values, const char* what) {
  std::string known;
  for (E v : values) {
    if (to_string(v) == s) return v;
    known += (known.empty() ? "" : ", ") + to_string(v);
  }
  throw ConfigError(std::string("unknown ") + what + " '" + s + "' (expected one of: " + known + ")");
}

std::string num(double v) { return json(v).dump(); }

std::string hex8(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%08llx", static_cast<unsigned long long>(v & 0xFFFFFFFFull));
  return buf;
}

// Attack settings that are not grid axes, in canonical form.
std::string settings_signature(const CellSettings& c) {
  std::ostringstream s;
  s << to_string(c.epsilon_scaling) << '|' << to_string(c.step_rule) << '|' << num(c.relative_step) << '|'
    << num(c.step_size) << '|' << c.steps << '|' << c.noise_batch << '|' << to_string(c.projection) << '|'
    << c.mask_inside_forward << '|' << c.saliency_at_target << '|' << num(c.lambda_tv) << '|'
    << num(c.lambda_color_mean) << '|' << num(c.lambda_channel_sim);
  return s.str();
}

std::vector<const TrialRecord*> ok_records(std::span<const TrialRecord> records) {
  std::vector<const TrialRecord*> out;
  for (const auto& r : records) {
    if (r.ok) out.push_back(&r);
  }
  if (out.empty()) throw DomainError("metrics need at least one completed trial");
  return out;
}

template <class Pred>
double fraction(std::span<const TrialRecord> records, Pred pred) {
  const auto ok = ok_records(records);
  std::size_t hits = 0;
  for (const auto* r : ok) hits += pred(*r) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(ok.size());
}

json counts_to_json(const ClassCounts& c) {
  json j = json::object();
  for (const auto& [label, n] : c.counts) j[std::to_string(label)] = n;
  return j;
}

ClassCounts counts_from_json(const json& j) {
  ClassCounts c;
  for (const auto& [key, value] : j.items()) c.add(std::stoi(key), value.get<std::int64_t>());
  return c;
}

json outcome_to_json(const CertificationOutcome& o) {
  return json{{"decision", o.decision},        {"radius", o.radius},
              {"pa_lower", o.pa_lower},        {"seed", o.seed},
              {"selection", counts_to_json(o.selection)}, {"counts", counts_to_json(o.counts)}};
}

CertificationOutcome outcome_from_json(const json& j) {
  CertificationOutcome o;
  o.decision = j.at("decision").get<int>();
  o.radius = j.at("radius").get<double>();
  o.pa_lower = j.at("pa_lower").get<double>();
  o.seed = j.at("seed").get<std::uint64_t>();
  o.selection = counts_from_json(j.at("selection"));
  o.counts = counts_from_json(j.at("counts"));
  return o;
}

}  // namespace

std::string to_string(DefenseKind v) {
  switch (v) {
    case DefenseKind::single: return "single";
    case DefenseKind::ensemble: return "ensemble";
    case DefenseKind::denoised: return "denoised";
  }
  return "?";
}

std::string to_string(AttackKind v) {
  switch (v) {
    case AttackKind::ghostcert: return "ghostcert";
    case AttackKind::shadow: return "shadow";
    case AttackKind::shadow_bounded: return "shadow_bounded";
  }
  return "?";
}

std::string to_string(MaskStrategy v) {
  switch (v) {
    case MaskStrategy::saliency: return "saliency";
    case MaskStrategy::random_pixel: return "random_pixel";
    case MaskStrategy::random_region: return "random_region";
    case MaskStrategy::full_frame: return "full_frame";
  }
  return "?";
}

std::string to_string(EpsilonScaling v) { return v == EpsilonScaling::scaled ? "scaled" : "raw"; }
std::string to_string(StepRule v) { return v == StepRule::relative ? "relative" : "absolute"; }

std::string to_string(Outcome v) {
  switch (v) {
    case Outcome::source: return "source";
    case Outcome::target: return "target";
    case Outcome::other: return "other";
    case Outcome::abstain: return "abstain";
  }
  return "?";
}

std::string to_string(AblationKind v) { return v == AblationKind::mask_strategy ? "mask_strategy" : "k_sensitivity"; }

DefenseKind parse_defense_kind(const std::string& s) {
  return parse_enum(s, {DefenseKind::single, DefenseKind::ensemble, DefenseKind::denoised}, "defense");
}
AttackKind parse_attack_kind(const std::string& s) {
  return parse_enum(s, {AttackKind::ghostcert, AttackKind::shadow, AttackKind::shadow_bounded}, "attack");
}
MaskStrategy parse_mask_strategy(const std::string& s) {
  return parse_enum(s,
                    {MaskStrategy::saliency, MaskStrategy::random_pixel, MaskStrategy::random_region,
                     MaskStrategy::full_frame},
                    "mask strategy");
}
EpsilonScaling parse_epsilon_scaling(const std::string& s) {
  return parse_enum(s, {EpsilonScaling::scaled, EpsilonScaling::raw}, "epsilon scaling");
}
StepRule parse_step_rule(const std::string& s) {
  return parse_enum(s, {StepRule::relative, StepRule::absolute}, "step rule");
}
AblationKind parse_ablation_kind(const std::string& s) {
  return parse_enum(s, {AblationKind::mask_strategy, AblationKind::k_sensitivity}, "ablation");
}

double scale_epsilon(double nominal, int height, int width, EpsilonScaling mode) {
  if (mode == EpsilonScaling::raw) return nominal;
  const double ref = static_cast<double>(kReferenceResolution) * kReferenceResolution;
  return nominal * std::sqrt(static_cast<double>(height) * width / ref);
}

std::string image_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "img%06zu", index);
  return buf;
}

Selection select_eligible_images(const Dataset& ds, const Classifier& defense, const SmoothingConfig& cfg,
                                 std::size_t count, std::uint64_t seed, Execution exec) {
  if (count < 1) throw DomainError("eligible image count must be at least 1");
  cfg.validate();
  Selection out;
  std::size_t abstained = 0;
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < ds.size() && out.images.size() < count; ++i) {
    auto outcome = certify(defense, ds.images[i], cfg, derive_seed(seed, kSelectStream, i), exec);
    if (outcome.decision == ds.labels[i]) {
      out.images.push_back({i, image_id(i), ds.labels[i], std::move(outcome)});
    } else if (outcome.abstained()) {
      ++abstained;
    } else {
      ++wrong;
    }
  }
  if (out.images.size() < count) {
    out.warnings.push_back("only " + std::to_string(out.images.size()) + " of " + std::to_string(count) +
                           " requested images are certified correctly (" + std::to_string(abstained) +
                           " abstained, " + std::to_string(wrong) + " certified a wrong label, " +
                           std::to_string(ds.size()) + " scanned)");
  }
  return out;
}

int pick_target_label(std::span<const int> labels, std::size_t source_index) {
  if (source_index >= labels.size()) throw DomainError("source index outside the dataset");
  const int source = labels[source_index];
  for (std::size_t step = 1; step < labels.size(); ++step) {
    const int l = labels[(source_index + step) % labels.size()];
    if (l != source) return l;
  }
  throw DomainError("cannot pick a target label: every image has label " + std::to_string(source));
}

std::string CellSettings::cell_id() const {
  std::string id = to_string(defense) + "/s" + num(sigma) + "/e" + num(epsilon) + "/" + to_string(attack) + "/" +
                   (targeted ? "targeted" : "untargeted") + "/" + to_string(mask_strategy);
  if (mask_strategy == MaskStrategy::saliency || mask_strategy == MaskStrategy::random_region) {
    id += "/k" + std::to_string(k);
  }
  if (mask_strategy == MaskStrategy::random_pixel) id += "/p" + num(pixel_probability);
  return id + "/" + hex8(stable_hash(settings_signature(*this)));
}

std::string CellSettings::seed_key() const {
  return to_string(defense) + "/s" + num(sigma) + "/e" + num(epsilon) + "/" + to_string(attack) + "/" +
         (targeted ? "targeted" : "untargeted") + "/" + settings_signature(*this);
}

Outcome TrialRecord::outcome() const {
  if (post.decision == kAbstain) return Outcome::abstain;
  if (post.decision == source_label) return Outcome::source;
  if (targeted && post.decision == target_label) return Outcome::target;
  return Outcome::other;
}

bool same_trial(const TrialRecord& a, const TrialRecord& b) {
  TrialRecord x = a;
  x.wall_time_s = b.wall_time_s;
  return record_to_json(x) == record_to_json(b);
}

double asr_untargeted(std::span<const TrialRecord> records) {
  return fraction(records, [](const TrialRecord& r) { return r.post.decision != r.source_label; });
}

double asr_strict(std::span<const TrialRecord> records) {
  return fraction(records,
                  [](const TrialRecord& r) { return r.post.decision != r.source_label && r.post.decision != kAbstain; });
}

double asr_targeted(std::span<const TrialRecord> records) {
  return fraction(records, [](const TrialRecord& r) {
    if (!r.targeted) throw DomainError("asr_targeted needs targeted records");
    return r.post.decision == r.target_label;
  });
}

double dos_rate(std::span<const TrialRecord> records) {
  return fraction(records, [](const TrialRecord& r) { return r.post.decision == kAbstain; });
}

OutcomeCounts count_outcomes(std::span<const TrialRecord> records) {
  OutcomeCounts c;
  for (const auto& r : records) {
    if (!r.ok) continue;
    switch (r.outcome()) {
      case Outcome::source: ++c.source; break;
      case Outcome::target: ++c.target; break;
      case Outcome::other: ++c.other; break;
      case Outcome::abstain: ++c.abstain; break;
    }
  }
  return c;
}

std::optional<double> mean_spoofing_radius(std::span<const TrialRecord> records) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& r : records) {
    if (!r.ok || r.post.decision == kAbstain || r.post.decision == r.source_label) continue;
    if (r.targeted && r.post.decision != r.target_label) continue;
    sum += r.post.radius;
    ++n;
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

Imperceptibility imperceptibility_metrics(const Image& x, const Image& x_adv) {
  require_same_shape(x, x_adv, "imperceptibility_metrics");
  const Image d = x_adv - x;
  return {l2_norm(d), linf_norm(d), total_variation(d)};
}

MetricsSummary summarize(const CellSettings& cell, std::span<const TrialRecord> records) {
  MetricsSummary s;
  s.cell_id = cell.cell_id();
  s.defense = cell.defense;
  s.sigma = cell.sigma;
  s.epsilon = cell.epsilon;
  s.attack = cell.attack;
  s.targeted = cell.targeted;
  s.mask_strategy = cell.mask_strategy;
  s.k = cell.k;
  for (const auto& r : records) {
    if (r.ok) {
      ++s.trials;
      s.epsilon_applied = r.epsilon_applied;
    } else {
      ++s.failed;
    }
  }
  if (s.trials == 0) return s;
  const auto c = count_outcomes(records);
  const double n = static_cast<double>(s.trials);
  s.source_fraction = static_cast<double>(c.source) / n;
  s.target_fraction = static_cast<double>(c.target) / n;
  s.other_fraction = static_cast<double>(c.other) / n;
  s.dos = static_cast<double>(c.abstain) / n;
  s.asr_untargeted = asr_untargeted(records);
  s.asr_strict = asr_strict(records);
  s.asr = cell.targeted ? s.target_fraction : s.asr_untargeted;
  s.mean_spoofing_radius = mean_spoofing_radius(records);
  for (const auto& r : records) {
    if (!r.ok) continue;
    s.mean_source_radius += r.source.radius / n;
    s.mean_l2 += r.l2 / n;
    s.mean_linf += r.linf / n;
    s.mean_tv += r.tv / n;
  }
  return s;
}

std::vector<MetricsSummary> summarize_by_cell(std::span<const TrialRecord> records) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<TrialRecord>> groups;
  for (const auto& r : records) {
    auto& g = groups[r.cell_id];
    if (g.empty()) order.push_back(r.cell_id);
    g.push_back(r);
  }
  std::vector<MetricsSummary> out;
  for (const auto& id : order) {
    const auto& g = groups.at(id);
    CellSettings c;
    c.defense = g.front().defense;
    c.sigma = g.front().sigma;
    c.epsilon = g.front().epsilon;
    c.attack = g.front().attack;
    c.targeted = g.front().targeted;
    c.mask_strategy = g.front().mask_strategy;
    c.k = g.front().k;
    auto s = summarize(c, g);
    s.cell_id = id;
    out.push_back(std::move(s));
  }
  return out;
}

std::uint64_t trial_seed(std::uint64_t master, const std::string& image_id, const CellSettings& cell) {
  return derive_seed(master, kTrialStream, stable_hash(image_id + "#" + cell.seed_key()));
}

std::uint64_t trial_mask_seed(std::uint64_t trial_seed) { return derive_seed(trial_seed, kMaskSeed); }
std::uint64_t trial_attack_seed(std::uint64_t trial_seed) { return derive_seed(trial_seed, kAttackSeed); }

SalientRegionMask build_trial_mask(const Classifier& defense, const Image& x, const CellSettings& cell,
                                   int explain_label, const RegionProposalSet* proposals, std::uint64_t mask_seed) {
  RegionProposalSet local;
  auto regions = [&]() -> const RegionProposalSet& {
    if (proposals != nullptr) return *proposals;
    local = propose_regions(x, default_min_area(x.height(), x.width()));
    return local;
  };
  switch (cell.mask_strategy) {
    case MaskStrategy::saliency:
      return select_salient_region_mask(regions(), saliency_for(defense, x, explain_label), cell.k);
    case MaskStrategy::random_pixel:
      return random_pixel_mask(x.height(), x.width(), cell.pixel_probability, mask_seed);
    case MaskStrategy::random_region:
      return random_region_mask(regions(), cell.k, mask_seed);
    case MaskStrategy::full_frame:
      break;
  }
  SalientRegionMask full;
  full.mask = Mask(x.height(), x.width(), true);
  return full;
}

double trial_step_size(const CellSettings& cell, double epsilon_applied) {
  return cell.step_rule == StepRule::relative ? cell.relative_step * epsilon_applied / std::max(cell.steps, 1)
                                              : cell.step_size;
}

AttackConfig trial_attack_config(const CellSettings& cell, double epsilon_applied, double step_size, int target,
                                 std::uint64_t attack_seed) {
  AttackConfig ac;
  ac.epsilon = epsilon_applied;
  ac.step_size = step_size;
  ac.steps = cell.steps;
  ac.noise_batch = cell.noise_batch;
  ac.sigma = cell.sigma;
  ac.targeted = cell.targeted;
  ac.target = target;
  ac.seed = attack_seed;
  ac.mask_inside_forward = cell.mask_inside_forward;
  ac.projection = cell.projection;
  return ac;
}

TrialRecord run_trial(const TrialContext& ctx, const CellSettings& cell, const EligibleImage& image,
                      std::uint64_t master_seed) {
  const auto start = std::chrono::steady_clock::now();
  TrialRecord r;
  r.cell_id = cell.cell_id();
  r.image_id = image.id;
  r.trial_id = r.cell_id + "#" + image.id;
  r.image_index = image.index;
  r.source_label = image.label;
  r.defense = cell.defense;
  r.sigma = cell.sigma;
  r.epsilon = cell.epsilon;
  r.attack = cell.attack;
  r.targeted = cell.targeted;
  r.mask_strategy = cell.mask_strategy;
  r.k = cell.k;
  r.source = image.source;
  r.certification = ctx.certification;
  r.certification.sigma = cell.sigma;
  r.trial_seed = trial_seed(master_seed, image.id, cell);
  r.attack_seed = trial_attack_seed(r.trial_seed);
  const std::uint64_t cert_seed = derive_seed(r.trial_seed, kCertSeed);
  const std::uint64_t mask_seed = trial_mask_seed(r.trial_seed);

  try {
    if (ctx.defense == nullptr || ctx.dataset == nullptr) throw DomainError("trial context is incomplete");
    const Classifier& clf = *ctx.defense;
    const Image& x = ctx.dataset->images.at(image.index);
    r.epsilon_applied = scale_epsilon(cell.epsilon, x.height(), x.width(), cell.epsilon_scaling);
    if (cell.targeted) r.target_label = pick_target_label(ctx.dataset->labels, image.index);
    r.step_size = trial_step_size(cell, r.epsilon_applied);

    AttackResult ar;
    if (cell.attack == AttackKind::ghostcert) {
      const int explain = cell.targeted && cell.saliency_at_target ? r.target_label : r.source_label;
      const auto mask = build_trial_mask(clf, x, cell, explain, ctx.proposals, mask_seed);
      r.mask_pixels = mask.mask.count();
      const auto ac = trial_attack_config(cell, r.epsilon_applied, r.step_size, r.target_label, r.attack_seed);
      ar = ghostcert_attack(clf, x, r.source_label, mask.mask, ac, ctx.exec);
    } else {
      ShadowConfig sc;
      sc.step_size = r.step_size;
      sc.steps = cell.steps;
      sc.lambda_tv = cell.lambda_tv;
      sc.lambda_color_mean = cell.lambda_color_mean;
      sc.lambda_channel_sim = cell.lambda_channel_sim;
      sc.l2_bound = r.epsilon_applied;
      sc.sigma = cell.sigma;
      sc.noise_batch = cell.noise_batch;
      sc.targeted = cell.targeted;
      sc.target = r.target_label;
      sc.seed = r.attack_seed;
      r.mask_pixels = x.shape().pixels();
      ar = cell.attack == AttackKind::shadow ? shadow_attack(clf, x, r.source_label, sc, ctx.exec)
                                              : shadow_attack_bounded(clf, x, r.source_label, sc, ctx.exec);
    }
    r.l2 = ar.l2_norm;
    r.linf = ar.linf_norm;
    r.tv = ar.total_variation;
    r.skipped_steps = ar.skipped_steps;
    r.adversarial = std::move(ar.adversarial);
    r.post = certify(clf, r.adversarial, r.certification, cert_seed, ctx.exec);
  } catch (const std::exception& e) {
    r.ok = false;
    r.error = e.what();
  }
  r.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

CertificationOutcome recertify(const Classifier& defense, const TrialRecord& record, Execution exec) {
  return certify(defense, record.adversarial, record.certification, record.post.seed, exec);
}

std::string record_to_json(const TrialRecord& r) {
  json j;
  j["schema"] = r.schema;
  j["trial_id"] = r.trial_id;
  j["cell_id"] = r.cell_id;
  j["image_id"] = r.image_id;
  j["image_index"] = r.image_index;
  j["source_label"] = r.source_label;
  j["target_label"] = r.targeted ? json(r.target_label) : json(nullptr);
  j["defense"] = to_string(r.defense);
  j["sigma"] = r.sigma;
  j["epsilon"] = r.epsilon;
  j["epsilon_applied"] = r.epsilon_applied;
  j["step_size"] = r.step_size;
  j["attack"] = to_string(r.attack);
  j["targeted"] = r.targeted;
  j["mask_strategy"] = to_string(r.mask_strategy);
  j["k"] = r.k;
  j["mask_pixels"] = r.mask_pixels;
  j["source"] = outcome_to_json(r.source);
  j["post"] = outcome_to_json(r.post);
  j["outcome"] = r.ok ? to_string(r.outcome()) : "failed";
  j["certification"] = {{"sigma", r.certification.sigma},
                        {"n0", r.certification.n0},
                        {"n", r.certification.n},
                        {"alpha", r.certification.alpha},
                        {"mu", r.certification.mu}};
  j["trial_seed"] = r.trial_seed;
  j["attack_seed"] = r.attack_seed;
  j["l2"] = r.l2;
  j["linf"] = r.linf;
  j["tv"] = r.tv;
  j["skipped_steps"] = r.skipped_steps;
  j["status"] = r.ok ? "ok" : "failed";
  j["error"] = r.error;
  j["wall_time_s"] = r.wall_time_s;
  const auto& s = r.adversarial.shape();
  j["adversarial"] = {{"shape", {s.height, s.width, s.channels}},
                      {"values", std::vector<double>(r.adversarial.values().begin(), r.adversarial.values().end())}};
  return j.dump();
}

TrialRecord record_from_json(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("malformed trial record: ") + e.what());
  }
  try {
    TrialRecord r;
    r.schema = j.at("schema").get<int>();
    if (r.schema != kRecordSchemaVersion) {
      throw FormatError("unsupported trial record schema " + std::to_string(r.schema) + " (expected " +
                        std::to_string(kRecordSchemaVersion) + ")");
    }
    r.trial_id = j.at("trial_id").get<std::string>();
    r.cell_id = j.at("cell_id").get<std::string>();
    r.image_id = j.at("image_id").get<std::string>();
    r.image_index = j.at("image_index").get<std::size_t>();
    r.source_label = j.at("source_label").get<int>();
    r.targeted = j.at("targeted").get<bool>();
    r.target_label = j.at("target_label").is_null() ? -1 : j.at("target_label").get<int>();
    r.defense = parse_defense_kind(j.at("defense").get<std::string>());
    r.sigma = j.at("sigma").get<double>();
    r.epsilon = j.at("epsilon").get<double>();
    r.epsilon_applied = j.at("epsilon_applied").get<double>();
    r.step_size = j.at("step_size").get<double>();
    r.attack = parse_attack_kind(j.at("attack").get<std::string>());
    r.mask_strategy = parse_mask_strategy(j.at("mask_strategy").get<std::string>());
    r.k = j.at("k").get<int>();
    r.mask_pixels = j.at("mask_pixels").get<std::size_t>();
    r.source = outcome_from_json(j.at("source"));
    r.post = outcome_from_json(j.at("post"));
    const auto& c = j.at("certification");
    r.certification.sigma = c.at("sigma").get<double>();
    r.certification.n0 = c.at("n0").get<int>();
    r.certification.n = c.at("n").get<int>();
    r.certification.alpha = c.at("alpha").get<double>();
    r.certification.mu = c.at("mu").get<double>();
    r.trial_seed = j.at("trial_seed").get<std::uint64_t>();
    r.attack_seed = j.at("attack_seed").get<std::uint64_t>();
    r.l2 = j.at("l2").get<double>();
    r.linf = j.at("linf").get<double>();
    r.tv = j.at("tv").get<double>();
    r.skipped_steps = j.at("skipped_steps").get<int>();
    r.ok = j.at("status").get<std::string>() == "ok";
    r.error = j.at("error").get<std::string>();
    r.wall_time_s = j.at("wall_time_s").get<double>();
    const auto& adv = j.at("adversarial");
    const auto shape = adv.at("shape").get<std::vector<int>>();
    if (shape.size() != 3) throw FormatError("adversarial shape must have three entries");
    const Shape s{shape[0], shape[1], shape[2]};
    auto values = adv.at("values").get<std::vector<double>>();
    if (values.size() != s.size()) throw FormatError("adversarial values do not match the shape");
    r.adversarial = s.size() == 0 ? Image() : Image(s, std::move(values));
    return r;
  } catch (const json::exception& e) {
    throw FormatError(std::string("invalid trial record: ") + e.what());
  }
}

RecordStore::RecordStore(std::filesystem::path path) : path_(std::move(path)) {}

std::vector<TrialRecord> RecordStore::load(std::vector<std::string>* warnings) const {
  std::vector<TrialRecord> out;
  if (!std::filesystem::exists(path_)) return out;
  std::ifstream in(path_, std::ios::binary);
  if (!in) throw FormatError("cannot read record store " + path_.string());
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  std::size_t pos = 0;
  std::size_t lineno = 0;
  while (pos < text.size()) {
    ++lineno;
    const std::size_t end = text.find('\n', pos);
    const bool complete = end != std::string::npos;
    const std::string line = text.substr(pos, complete ? end - pos : std::string::npos);
    pos = complete ? end + 1 : text.size();
    if (line.empty()) continue;
    try {
      out.push_back(record_from_json(line));
    } catch (const FormatError& e) {
      if (!complete) {
        if (warnings) warnings->push_back(path_.string() + ":" + std::to_string(lineno) + ": skipped truncated record");
        break;
      }
      throw FormatError(path_.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void RecordStore::append(const TrialRecord& record) {
  const std::string line = record_to_json(record) + "\n";
  std::lock_guard<std::mutex> lock(mutex_);
  const int fd = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
  if (fd < 0) throw FormatError("cannot open record store " + path_.string() + ": " + std::strerror(errno));
  std::size_t written = 0;
  while (written < line.size()) {
    const auto n = ::write(fd, line.data() + written, line.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      const std::string why = std::strerror(errno);
      ::close(fd);
      throw FormatError("cannot append to record store " + path_.string() + ": " + why);
    }
    written += static_cast<std::size_t>(n);
  }
  ::close(fd);
}

std::uintmax_t RecordStore::truncate_torn_tail() {
  std::lock_guard<std::mutex> lock(mutex_);
  if (!std::filesystem::exists(path_)) return 0;
  const auto size = std::filesystem::file_size(path_);
  if (size == 0) return 0;
  std::ifstream in(path_, std::ios::binary);
  std::uintmax_t keep = size;
  char c = 0;
  while (keep > 0) {
    in.seekg(static_cast<std::streamoff>(keep - 1));
    in.get(c);
    if (c == '\n') break;
    --keep;
  }
  in.close();
  if (keep != size) std::filesystem::resize_file(path_, keep);
  return size - keep;
}

std::vector<CellSettings> GridSpec::cells() const {
  std::vector<CellSettings> out;
  for (auto d : defenses) {
    for (double s : sigmas) {
      for (double e : epsilons) {
        for (auto a : attacks) {
          for (bool t : targeted) {
            CellSettings c = base;
            c.defense = d;
            c.sigma = s;
            c.epsilon = e;
            c.attack = a;
            c.targeted = t;
            if (a != AttackKind::ghostcert) {
              c.mask_strategy = MaskStrategy::full_frame;
              c.k = 0;
              out.push_back(c);
              continue;
            }
            for (auto m : strategies) {
              c.mask_strategy = m;
              if (m == MaskStrategy::random_pixel || m == MaskStrategy::full_frame) {
                c.k = 0;
                out.push_back(c);
                continue;
              }
              for (int k : ks) {
                c.k = k;
                out.push_back(c);
              }
            }
          }
        }
      }
    }
  }
  // Drop duplicates (e.g. random_pixel listed with several k) keeping first occurrence.
  std::set<std::string> seen;
  std::vector<CellSettings> unique;
  for (auto& c : out) {
    if (seen.insert(c.cell_id()).second) unique.push_back(std::move(c));
  }
  return unique;
}

void GridSpec::validate() const {
  if (defenses.empty() || sigmas.empty() || epsilons.empty() || attacks.empty() || targeted.empty() ||
      strategies.empty() || ks.empty()) {
    throw ConfigError("every grid axis needs at least one value");
  }
  for (double s : sigmas) {
    if (!(s > 0.0)) throw ConfigError("grid sigma values must be positive");
  }
  for (double e : epsilons) {
    if (!(e > 0.0) || !std::isfinite(e)) throw ConfigError("grid epsilon values must be positive and finite");
  }
  for (int k : ks) {
    if (k < 1) throw ConfigError("grid k values must be at least 1");
  }
  if (images < 1) throw ConfigError("grid needs at least one image per defense");
  if (base.steps < 0 || base.noise_batch < 1) throw ConfigError("attack steps must be >= 0 and noise batch >= 1");
  if (!(base.relative_step > 0.0) || !(base.step_size > 0.0)) throw ConfigError("step sizes must be positive");
  if (!(base.pixel_probability >= 0.0 && base.pixel_probability <= 1.0)) {
    throw ConfigError("pixel probability must lie in [0,1]");
  }
  if (base.lambda_tv < 0.0 || base.lambda_color_mean < 0.0 || base.lambda_channel_sim < 0.0) {
    throw ConfigError("Shadow penalty weights must be non-negative");
  }
  SmoothingConfig c = certification;
  try {
    c.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("certification: ") + e.what());
  }
}

GridResult run_grid(const GridSpec& spec, const Dataset& eval, std::span<const Defense> defenses, RecordStore* store,
                    Execution exec, const ProgressFn& progress) {
  spec.validate();
  const auto cells = spec.cells();
  GridResult result;

  std::map<std::string, TrialRecord> done;
  if (store != nullptr) {
    if (const auto cut = store->truncate_torn_tail(); cut > 0) {
      result.warnings.push_back("removed " + std::to_string(cut) + " bytes of an interrupted record from " +
                                store->path().string());
    }
    for (auto& r : store->load(&result.warnings)) {
      if (r.ok) done[r.trial_id] = std::move(r);
    }
  }

  struct Population {
    const Classifier* model = nullptr;
    Selection selection;
  };
  std::map<std::pair<DefenseKind, double>, Population> populations;
  for (const auto& c : cells) {
    const auto key = std::make_pair(c.defense, c.sigma);
    if (populations.count(key)) continue;
    const auto it = std::find_if(defenses.begin(), defenses.end(), [&](const Defense& d) {
      return d.kind == c.defense && d.sigma == c.sigma && d.model != nullptr;
    });
    if (it == defenses.end()) {
      throw ConfigError("no " + to_string(c.defense) + " model for sigma " + num(c.sigma));
    }
    SmoothingConfig cert = spec.certification;
    cert.sigma = c.sigma;
    Population p;
    p.model = it->model.get();
    p.selection = select_eligible_images(eval, *p.model, cert, spec.images, spec.seed, exec);
    for (const auto& w : p.selection.warnings) {
      result.warnings.push_back(to_string(c.defense) + " sigma " + num(c.sigma) + ": " + w);
    }
    populations.emplace(key, std::move(p));
  }

  // Region proposals depend only on the image; compute each once.
  std::map<std::size_t, RegionProposalSet> proposals;
  const bool need_regions = std::any_of(cells.begin(), cells.end(), [](const CellSettings& c) {
    return c.attack == AttackKind::ghostcert &&
           (c.mask_strategy == MaskStrategy::saliency || c.mask_strategy == MaskStrategy::random_region);
  });
  if (need_regions) {
    std::vector<std::size_t> idx;
    for (const auto& [key, p] : populations) {
      for (const auto& im : p.selection.images) {
        if (!proposals.count(im.index)) {
          proposals[im.index];
          idx.push_back(im.index);
        }
      }
    }
    std::vector<RegionProposalSet> sets(idx.size());
    const auto n = static_cast<std::int64_t>(idx.size());
#pragma omp parallel for schedule(dynamic) if (exec == Execution::parallel)
    for (std::int64_t i = 0; i < n; ++i) {
      const Image& x = eval.images[idx[static_cast<std::size_t>(i)]];
      sets[static_cast<std::size_t>(i)] = propose_regions(x, default_min_area(x.height(), x.width()));
    }
    for (std::size_t i = 0; i < idx.size(); ++i) proposals[idx[i]] = std::move(sets[i]);
  }

  std::size_t total = 0;
  for (const auto& c : cells) total += populations.at({c.defense, c.sigma}).selection.images.size();

  for (const auto& c : cells) {
    const auto& pop = populations.at({c.defense, c.sigma});
    std::vector<TrialRecord> cell_records;
    for (const auto& im : pop.selection.images) {
      const std::string id = c.cell_id() + "#" + im.id;
      TrialRecord r;
      if (const auto it = done.find(id); it != done.end()) {
        r = it->second;
        ++result.reused;
      } else {
        TrialContext ctx;
        ctx.defense = pop.model;
        ctx.dataset = &eval;
        ctx.certification = spec.certification;
        ctx.exec = exec;
        const auto pit = proposals.find(im.index);
        ctx.proposals = pit == proposals.end() ? nullptr : &pit->second;
        r = run_trial(ctx, c, im, spec.seed);
        ++result.executed;
        if (!r.ok) result.warnings.push_back("trial " + r.trial_id + " failed: " + r.error);
        if (store != nullptr) store->append(r);
      }
      if (progress) progress(result.reused + result.executed, total, r);
      cell_records.push_back(r);
    }
    result.summaries.push_back(summarize(c, cell_records));
    for (auto& r : cell_records) result.records.push_back(std::move(r));
  }
  return result;
}

GridResult run_ablation(AblationKind kind, GridSpec spec, const Dataset& eval, std::span<const Defense> defenses,
                        RecordStore* store, Execution exec, const ProgressFn& progress) {
  spec.attacks = {AttackKind::ghostcert};
  if (kind == AblationKind::mask_strategy) {
    spec.strategies = {MaskStrategy::saliency, MaskStrategy::random_pixel, MaskStrategy::random_region};
  } else {
    spec.strategies = {MaskStrategy::saliency};
    spec.ks = {3, 5, 7};
  }
  return run_grid(spec, eval, defenses, store, exec, progress);
}

std::string summaries_csv(std::span<const MetricsSummary> summaries) {
  std::ostringstream out;
  out << "cell_id,defense,sigma,epsilon,epsilon_applied,attack,targeted,mask_strategy,k,trials,failed,asr,"
         "asr_untargeted,asr_strict,dos,source_fraction,target_fraction,other_fraction,mean_spoofing_radius,"
         "mean_source_radius,mean_l2,mean_linf,mean_tv\n";
  auto f = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return std::string(buf);
  };
  for (const auto& s : summaries) {
    out << s.cell_id << ',' << to_string(s.defense) << ',' << f(s.sigma) << ',' << f(s.epsilon) << ','
        << f(s.epsilon_applied) << ',' << to_string(s.attack) << ',' << (s.targeted ? "true" : "false") << ','
        << to_string(s.mask_strategy) << ',' << s.k << ',' << s.trials << ',' << s.failed << ',' << f(s.asr) << ','
        << f(s.asr_untargeted) << ',' << f(s.asr_strict) << ',' << f(s.dos) << ',' << f(s.source_fraction) << ','
        << f(s.target_fraction) << ',' << f(s.other_fraction) << ','
        << (s.mean_spoofing_radius ? f(*s.mean_spoofing_radius) : std::string()) << ',' << f(s.mean_source_radius)
        << ',' << f(s.mean_l2) << ',' << f(s.mean_linf) << ',' << f(s.mean_tv) << '\n';
  }
  return out.str();
}

void write_summaries_csv(const std::filesystem::path& path, std::span<const MetricsSummary> summaries) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out << summaries_csv(summaries);
}

}  // namespace ghostcert
