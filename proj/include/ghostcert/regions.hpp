#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "ghostcert/image.hpp"
#include "ghostcert/saliency.hpp"

namespace ghostcert {

struct RegionProposal {
  Mask mask;
  std::size_t area = 0;

  static RegionProposal from_mask(Mask m);
  // Raster index of the first set pixel (pixels() when empty).
  std::size_t first_pixel() const;
};

struct RegionProposalSet {
  int height = 0;
  int width = 0;
  std::vector<RegionProposal> proposals;

  std::size_t size() const { return proposals.size(); }
  bool empty() const { return proposals.empty(); }
};

// Binary support mask for the attack plus how it was built. Candidate indices refer
// to the proposal list; index == proposals.size() denotes the unmask candidate U.
struct SalientRegionMask {
  Mask mask;
  std::vector<std::size_t> selected;
  std::vector<double> scores;  // score of every candidate, U last (saliency strategy only)
  int k = 0;
  bool includes_unmask = false;
};

// ceil(0.006 · H · W): the ">300 pixels at 224²" filter rescaled to the image.
std::size_t default_min_area(int height, int width);

// Felzenszwalb–Huttenlocher threshold constant in [0,1] intensity units.
inline constexpr double kDefaultSegmentationScale = 0.5;

// Graph-based greedy merging on colour distance (8-connected grid). Components below
// min_area are merged into their cheapest neighbour, survivors below min_area dropped.
// Output proposals are disjoint and ordered by first pixel.
RegionProposalSet propose_regions(const Image& x, std::size_t min_area,
                                  double scale = kDefaultSegmentationScale);

// Text header "GCRP 1 / shape H W / count N" followed by one run-length-encoded
// line per region: "region <area> <first bit> <run lengths...>".
void save_region_proposals(const std::filesystem::path& path, const RegionProposalSet& set);

// Masks smaller than min_area are skipped; overlapping masks are allowed.
RegionProposalSet load_region_proposals(const std::filesystem::path& path, int height, int width,
                                        std::size_t min_area = 1);

// Pixels covered by no proposal.
RegionProposal unmask_candidate(const RegionProposalSet& set);

// Σ M·S / (Σ M + Σ S); 0 when the denominator vanishes.
double overlap_score(const Mask& region, const SaliencyMap& saliency);

// Top-k of proposals ∪ {U} by overlap score (ties: larger area, earlier first pixel,
// lower index), unioned into a binary mask. Empty candidates are never selected.
SalientRegionMask select_salient_region_mask(const RegionProposalSet& set, const SaliencyMap& saliency, int k);

// Each pixel on independently with probability p.
SalientRegionMask random_pixel_mask(int height, int width, double p, std::uint64_t seed);

// Union of k distinct proposals drawn uniformly (all of them when fewer exist).
SalientRegionMask random_region_mask(const RegionProposalSet& set, int k, std::uint64_t seed);

}  // namespace ghostcert
