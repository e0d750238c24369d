#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ghostcert/attacks.hpp"
#include "ghostcert/classifier.hpp"
#include "ghostcert/dataset.hpp"
#include "ghostcert/parallel.hpp"
#include "ghostcert/smoothing.hpp"

namespace ghostcert {

enum class DefenseKind { single, ensemble, denoised };
enum class AttackKind { ghostcert, shadow, shadow_bounded };
// full_frame is the (implicit) support of the Shadow baselines.
enum class MaskStrategy { saliency, random_pixel, random_region, full_frame };
enum class EpsilonScaling { scaled, raw };
enum class StepRule { relative, absolute };
enum class Outcome { source, target, other, abstain };

std::string to_string(DefenseKind v);
std::string to_string(AttackKind v);
std::string to_string(MaskStrategy v);
std::string to_string(EpsilonScaling v);
std::string to_string(StepRule v);
std::string to_string(Outcome v);
DefenseKind parse_defense_kind(const std::string& s);
AttackKind parse_attack_kind(const std::string& s);
MaskStrategy parse_mask_strategy(const std::string& s);
EpsilonScaling parse_epsilon_scaling(const std::string& s);
StepRule parse_step_rule(const std::string& s);

inline constexpr int kRecordSchemaVersion = 1;
inline constexpr int kReferenceResolution = 224;

// Budgets are quoted at 224×224; scaled mode multiplies by sqrt(H·W / 224²) so the
// per-pixel distortion matches.
double scale_epsilon(double nominal, int height, int width, EpsilonScaling mode);

// A certified model the grid attacks, trained for one noise level.
struct Defense {
  DefenseKind kind = DefenseKind::single;
  double sigma = 0.25;
  ClassifierPtr model;
};

struct EligibleImage {
  std::size_t index = 0;
  std::string id;
  int label = 0;
  CertificationOutcome source;
};

struct Selection {
  std::vector<EligibleImage> images;
  std::vector<std::string> warnings;
};

std::string image_id(std::size_t index);

// Scans ds in index order and keeps images the smoothed defense certifies with their
// true label, stopping at count. Each image is certified with a seed derived from
// (seed, index), so the selection is a pure function of the inputs.
Selection select_eligible_images(const Dataset& ds, const Classifier& defense, const SmoothingConfig& cfg,
                                 std::size_t count, std::uint64_t seed, Execution exec = Execution::parallel);

// Label of the first image after source_index (wrapping) whose label differs.
int pick_target_label(std::span<const int> labels, std::size_t source_index);

// Everything that defines one grid cell.
struct CellSettings {
  DefenseKind defense = DefenseKind::single;
  double sigma = 0.25;
  double epsilon = 2.0;  // nominal, at 224×224
  AttackKind attack = AttackKind::ghostcert;
  bool targeted = false;
  MaskStrategy mask_strategy = MaskStrategy::saliency;
  int k = 5;
  double pixel_probability = 0.5;

  EpsilonScaling epsilon_scaling = EpsilonScaling::scaled;
  // relative: λ = relative_step · ε_applied / T; absolute: λ = step_size.
  StepRule step_rule = StepRule::relative;
  double relative_step = 2.5;
  double step_size = 1e-4;
  int steps = 20;
  int noise_batch = 32;
  ProjectionMode projection = ProjectionMode::ball;
  bool mask_inside_forward = true;
  // Explain the target label instead of the source label for targeted attacks.
  bool saliency_at_target = false;
  double lambda_tv = 0.3;
  double lambda_color_mean = 1.0;
  double lambda_channel_sim = 0.5;

  // Human-readable identifier covering every field that changes results.
  std::string cell_id() const;
  // Key that drives per-trial seeds. Mask strategy and k are excluded so ablation
  // variants of one cell attack with identical seeds.
  std::string seed_key() const;
};

struct TrialRecord {
  int schema = kRecordSchemaVersion;
  std::string trial_id;
  std::string cell_id;
  std::string image_id;
  std::size_t image_index = 0;
  int source_label = 0;
  int target_label = -1;
  DefenseKind defense = DefenseKind::single;
  double sigma = 0.0;
  double epsilon = 0.0;
  double epsilon_applied = 0.0;
  double step_size = 0.0;
  AttackKind attack = AttackKind::ghostcert;
  bool targeted = false;
  MaskStrategy mask_strategy = MaskStrategy::saliency;
  int k = 0;
  std::size_t mask_pixels = 0;
  CertificationOutcome source;
  CertificationOutcome post;
  SmoothingConfig certification;
  std::uint64_t trial_seed = 0;
  std::uint64_t attack_seed = 0;
  double l2 = 0.0;
  double linf = 0.0;
  double tv = 0.0;
  int skipped_steps = 0;
  bool ok = true;
  std::string error;
  double wall_time_s = 0.0;
  Image adversarial;

  Outcome outcome() const;
};

// Field-by-field equality ignoring wall time.
bool same_trial(const TrialRecord& a, const TrialRecord& b);

// Fractions over successful (ok) records; every one throws DomainError when empty.
// Untargeted success: decision ≠ source label, ABSTAIN included.
double asr_untargeted(std::span<const TrialRecord> records);
// Decision is a label other than the source (ABSTAIN excluded).
double asr_strict(std::span<const TrialRecord> records);
// Decision == target label.
double asr_targeted(std::span<const TrialRecord> records);
double dos_rate(std::span<const TrialRecord> records);

struct OutcomeCounts {
  std::size_t source = 0;
  std::size_t target = 0;
  std::size_t other = 0;
  std::size_t abstain = 0;
  std::size_t total() const { return source + target + other + abstain; }
};
OutcomeCounts count_outcomes(std::span<const TrialRecord> records);

// Mean post-attack radius over successful trials (targeted: decision == target;
// untargeted: decision is another label). Absent when nothing succeeded.
std::optional<double> mean_spoofing_radius(std::span<const TrialRecord> records);

struct Imperceptibility {
  double l2 = 0.0;
  double linf = 0.0;
  double tv = 0.0;
};
Imperceptibility imperceptibility_metrics(const Image& x, const Image& x_adv);

struct MetricsSummary {
  std::string cell_id;
  DefenseKind defense = DefenseKind::single;
  double sigma = 0.0;
  double epsilon = 0.0;
  double epsilon_applied = 0.0;
  AttackKind attack = AttackKind::ghostcert;
  bool targeted = false;
  MaskStrategy mask_strategy = MaskStrategy::saliency;
  int k = 0;
  std::size_t trials = 0;
  std::size_t failed = 0;
  double asr = 0.0;  // targeted cells: asr_targeted, otherwise asr_untargeted
  double asr_untargeted = 0.0;
  double asr_strict = 0.0;
  double dos = 0.0;
  double source_fraction = 0.0;
  double target_fraction = 0.0;
  double other_fraction = 0.0;
  std::optional<double> mean_spoofing_radius;
  double mean_source_radius = 0.0;
  double mean_l2 = 0.0;
  double mean_linf = 0.0;
  double mean_tv = 0.0;
};

// Summary of the records of one cell (failed records are counted, not scored).
MetricsSummary summarize(const CellSettings& cell, std::span<const TrialRecord> records);

// Groups records by cell id (in order of first appearance) and summarises each group,
// taking the cell descriptors from the records themselves.
std::vector<MetricsSummary> summarize_by_cell(std::span<const TrialRecord> records);

// Seeds of one trial: derived from the master seed and (image id, seed key).
std::uint64_t trial_seed(std::uint64_t master, const std::string& image_id, const CellSettings& cell);

struct TrialContext {
  const Classifier* defense = nullptr;
  const Dataset* dataset = nullptr;
  SmoothingConfig certification;
  // Optional precomputed proposals for the image (computed on demand when null).
  const RegionProposalSet* proposals = nullptr;
  Execution exec = Execution::parallel;
};

// Support mask of a GhostCert trial for the given strategy. proposals may be null
// (computed from x on demand); explain_label is the label the saliency map explains.
SalientRegionMask build_trial_mask(const Classifier& defense, const Image& x, const CellSettings& cell,
                                   int explain_label, const RegionProposalSet* proposals, std::uint64_t mask_seed);

// λ of a trial: relative_step · ε_applied / T, or the absolute step size.
double trial_step_size(const CellSettings& cell, double epsilon_applied);

// Attack configuration a GhostCert trial uses (budget and step already resolved).
AttackConfig trial_attack_config(const CellSettings& cell, double epsilon_applied, double step_size, int target,
                                 std::uint64_t attack_seed);

// Seeds of the mask draw and of the attack noise of a trial, derived from its trial seed.
std::uint64_t trial_mask_seed(std::uint64_t trial_seed);
std::uint64_t trial_attack_seed(std::uint64_t trial_seed);

// Builds the mask, attacks the defense model, re-certifies x + δ with a fresh seed.
// Errors are caught and returned as a failed record.
TrialRecord run_trial(const TrialContext& ctx, const CellSettings& cell, const EligibleImage& image,
                      std::uint64_t master_seed);

// Re-certifies the stored adversarial image with the stored seed and configuration.
CertificationOutcome recertify(const Classifier& defense, const TrialRecord& record,
                               Execution exec = Execution::parallel);

// Newline-delimited JSON, one record per line, appended atomically per trial.
class RecordStore {
 public:
  explicit RecordStore(std::filesystem::path path);
  const std::filesystem::path& path() const { return path_; }

  // Records already on disk. A truncated final line (interrupted write) is skipped
  // and reported through warnings; any other malformed line is a FormatError.
  std::vector<TrialRecord> load(std::vector<std::string>* warnings = nullptr) const;
  void append(const TrialRecord& record);
  // Cuts an unterminated final line left by an interrupted append, so later appends
  // start on a fresh line. Returns the number of bytes removed.
  std::uintmax_t truncate_torn_tail();

 private:
  std::filesystem::path path_;
  std::mutex mutex_;
};

std::string record_to_json(const TrialRecord& record);
TrialRecord record_from_json(const std::string& line);

struct GridSpec {
  std::vector<DefenseKind> defenses{DefenseKind::single};
  std::vector<double> sigmas{0.25};
  std::vector<double> epsilons{2, 4, 6, 8, 10};
  std::vector<AttackKind> attacks{AttackKind::ghostcert, AttackKind::shadow_bounded};
  std::vector<bool> targeted{false, true};
  std::vector<MaskStrategy> strategies{MaskStrategy::saliency};
  std::vector<int> ks{5};
  std::size_t images = 100;
  SmoothingConfig certification;  // sigma is overridden per cell
  CellSettings base;              // template for the per-cell attack settings
  std::uint64_t seed = 0;

  // Every cell in deterministic order: defense, σ, ε, attack, targeted, strategy, k.
  std::vector<CellSettings> cells() const;
  void validate() const;
};

struct GridResult {
  std::vector<TrialRecord> records;
  std::vector<MetricsSummary> summaries;
  std::vector<std::string> warnings;
  std::size_t reused = 0;
  std::size_t executed = 0;
};

using ProgressFn = std::function<void(std::size_t done, std::size_t total, const TrialRecord&)>;

// Runs every cell over the eligible images of its (defense, σ). With a store, trials
// already recorded as ok are reused and new ones appended as they finish.
GridResult run_grid(const GridSpec& spec, const Dataset& eval, std::span<const Defense> defenses,
                    RecordStore* store = nullptr, Execution exec = Execution::parallel,
                    const ProgressFn& progress = {});

enum class AblationKind { mask_strategy, k_sensitivity };
std::string to_string(AblationKind v);
AblationKind parse_ablation_kind(const std::string& s);

// mask_strategy: {saliency, random_pixel, random_region} on the GhostCert cells;
// k_sensitivity: k ∈ {3, 5, 7}. Other grid axes are taken from spec.
GridResult run_ablation(AblationKind kind, GridSpec spec, const Dataset& eval, std::span<const Defense> defenses,
                        RecordStore* store = nullptr, Execution exec = Execution::parallel,
                        const ProgressFn& progress = {});

// Comma-separated summary table, one row per cell.
void write_summaries_csv(const std::filesystem::path& path, std::span<const MetricsSummary> summaries);
std::string summaries_csv(std::span<const MetricsSummary> summaries);

}  // namespace ghostcert
