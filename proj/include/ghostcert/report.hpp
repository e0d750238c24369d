#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ghostcert/dataset.hpp"
#include "ghostcert/evaluation.hpp"

namespace ghostcert {

// Bumped whenever the rendered bytes change; golden files are tied to it.
inline constexpr const char* kReportRendererVersion = "1";

struct ReportOptions {
  // Perturbation panels show 0.5 + amplification · (x_adv − x).
  double amplification = 5.0;
  std::size_t max_panels = 6;
};

struct ReportFiles {
  std::vector<std::filesystem::path> written;
  std::vector<std::string> warnings;
};

// Line plot of ASR against nominal ε, one series per attack configuration.
std::string render_asr_plot(std::span<const MetricsSummary> summaries, const std::string& title);

// Mean spoofing radius against nominal ε with the mean source radius as a dashed line.
std::string render_radius_plot(std::span<const MetricsSummary> summaries, const std::string& title);

// source | adversarial | amplified perturbation, side by side with 2-pixel gutters,
// always rendered as RGB.
Image render_panel(const Image& source, const Image& adversarial, double amplification);

// Writes summary.csv, one ASR and one radius plot per (defense, σ) under plots/, and
// panels of the first successful trials under panels/ (only when the source dataset
// is supplied, since records carry the adversarial image alone).
ReportFiles render_report(std::span<const TrialRecord> records, const std::filesystem::path& out_dir,
                          const Dataset* source = nullptr, const ReportOptions& options = {});

}  // namespace ghostcert
