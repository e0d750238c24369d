#pragma once

#include <filesystem>
#include <iosfwd>

#include "ghostcert/classifier.hpp"
#include "ghostcert/denoiser.hpp"

namespace ghostcert {

// Checkpoint container: "GCKP", u32 format version, then one record per model.
// A record is a u32-length JSON descriptor followed by a u64 count of raw
// little-endian float64 parameters. Ensembles and denoised classifiers nest
// their components as consecutive records. Parameters round-trip bit-exactly.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_classifier(const std::filesystem::path& path, const Classifier& clf);
ClassifierPtr load_classifier(const std::filesystem::path& path);

void save_denoiser(const std::filesystem::path& path, const Denoiser& denoiser);
DenoiserPtr load_denoiser(const std::filesystem::path& path);

void write_classifier(std::ostream& out, const Classifier& clf);
ClassifierPtr read_classifier(std::istream& in);

}  // namespace ghostcert
