#include "ghostcert/regions.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>

#include "ghostcert/error.hpp"
#include "ghostcert/random.hpp"

namespace ghostcert {

RegionProposal RegionProposal::from_mask(Mask m) {
  RegionProposal r;
  r.area = m.count();
  r.mask = std::move(m);
  return r;
}

std::size_t RegionProposal::first_pixel() const {
  const auto& b = mask.bits();
  const auto it = std::find(b.begin(), b.end(), std::uint8_t{1});
  return static_cast<std::size_t>(it - b.begin());
}

std::size_t default_min_area(int height, int width) {
  return static_cast<std::size_t>(std::ceil(0.006 * static_cast<double>(height) * width));
}

namespace {

struct Edge {
  std::uint32_t a;
  std::uint32_t b;
  double w;
};

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n), size_(n, 1), internal_(n, 0.0) {
    std::iota(parent_.begin(), parent_.end(), 0u);
  }

  std::uint32_t find(std::uint32_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  // Joins two roots; the merged component's internal difference becomes w, which is
  // the largest MST edge because edges arrive in non-decreasing order.
  std::uint32_t join(std::uint32_t a, std::uint32_t b, double w) {
    if (size_[a] < size_[b]) std::swap(a, b);
    parent_[b] = a;
    size_[a] += size_[b];
    internal_[a] = w;
    return a;
  }

  std::size_t size(std::uint32_t root) const { return size_[root]; }
  double internal(std::uint32_t root) const { return internal_[root]; }

 private:
  std::vector<std::uint32_t> parent_;
  std::vector<std::size_t> size_;
  std::vector<double> internal_;
};

}  // namespace

RegionProposalSet propose_regions(const Image& x, std::size_t min_area, double scale) {
  if (!(scale > 0.0)) throw DomainError("segmentation scale must be positive");
  const int H = x.height();
  const int W = x.width();
  const int C = x.channels();
  const std::size_t n = x.shape().pixels();
  RegionProposalSet out{H, W, {}};
  if (n == 0) return out;

  auto dist = [&](std::size_t p, std::size_t q) {
    double s = 0.0;
    for (int c = 0; c < C; ++c) {
      const double d = x[p * static_cast<std::size_t>(C) + static_cast<std::size_t>(c)] -
                       x[q * static_cast<std::size_t>(C) + static_cast<std::size_t>(c)];
      s += d * d;
    }
    return std::sqrt(s);
  };

  std::vector<Edge> edges;
  edges.reserve(n * 4);
  for (int r = 0; r < H; ++r) {
    for (int c = 0; c < W; ++c) {
      const auto p = static_cast<std::uint32_t>(r * W + c);
      auto add = [&](int rr, int cc) {
        if (rr < 0 || rr >= H || cc < 0 || cc >= W) return;
        const auto q = static_cast<std::uint32_t>(rr * W + cc);
        edges.push_back({p, q, dist(p, q)});
      };
      add(r, c + 1);
      add(r + 1, c);
      add(r + 1, c + 1);
      add(r + 1, c - 1);
    }
  }
  std::stable_sort(edges.begin(), edges.end(), [](const Edge& e, const Edge& f) { return e.w < f.w; });

  DisjointSets sets(n);
  for (const auto& e : edges) {
    const auto a = sets.find(e.a);
    const auto b = sets.find(e.b);
    if (a == b) continue;
    const double ta = sets.internal(a) + scale / static_cast<double>(sets.size(a));
    const double tb = sets.internal(b) + scale / static_cast<double>(sets.size(b));
    if (e.w <= std::min(ta, tb)) sets.join(a, b, e.w);
  }
  for (const auto& e : edges) {
    const auto a = sets.find(e.a);
    const auto b = sets.find(e.b);
    if (a != b && (sets.size(a) < min_area || sets.size(b) < min_area)) {
      // Preserve the larger internal difference so later merges stay conservative.
      const double w = std::max({sets.internal(a), sets.internal(b), e.w});
      sets.join(a, b, w);
    }
  }

  // Emit components in order of their first pixel.
  std::vector<std::int64_t> slot(n, -1);
  for (std::size_t p = 0; p < n; ++p) {
    const auto root = sets.find(static_cast<std::uint32_t>(p));
    if (sets.size(root) < min_area) continue;
    if (slot[root] < 0) {
      slot[root] = static_cast<std::int64_t>(out.proposals.size());
      out.proposals.push_back(RegionProposal{Mask(H, W), 0});
    }
    auto& prop = out.proposals[static_cast<std::size_t>(slot[root])];
    prop.mask.set(p);
    ++prop.area;
  }
  return out;
}

void save_region_proposals(const std::filesystem::path& path, const RegionProposalSet& set) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out << "GCRP 1\nshape " << set.height << ' ' << set.width << "\ncount " << set.proposals.size() << '\n';
  for (const auto& p : set.proposals) {
    const auto& bits = p.mask.bits();
    out << "region " << p.area << ' ' << (bits.empty() ? 0 : static_cast<int>(bits[0]));
    std::size_t i = 0;
    while (i < bits.size()) {
      std::size_t j = i;
      while (j < bits.size() && bits[j] == bits[i]) ++j;
      out << ' ' << (j - i);
      i = j;
    }
    out << '\n';
  }
}

RegionProposalSet load_region_proposals(const std::filesystem::path& path, int height, int width,
                                        std::size_t min_area) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  std::string line;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& what) -> void {
    throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + what);
  };
  auto next = [&]() -> std::istringstream {
    if (!std::getline(in, line)) {
      ++lineno;
      fail("unexpected end of file");
    }
    ++lineno;
    return std::istringstream(line);
  };

  {
    auto s = next();
    std::string magic;
    int version = 0;
    if (!(s >> magic >> version) || magic != "GCRP") fail("not a region proposal file");
    if (version != 1) fail("unsupported region proposal version " + std::to_string(version));
  }
  int h = 0;
  int w = 0;
  {
    auto s = next();
    std::string key;
    if (!(s >> key >> h >> w) || key != "shape") fail("expected 'shape H W'");
    if (h != height || w != width) {
      fail("proposal shape " + std::to_string(h) + "x" + std::to_string(w) + " does not match image " +
           std::to_string(height) + "x" + std::to_string(width));
    }
  }
  std::size_t count = 0;
  {
    auto s = next();
    std::string key;
    if (!(s >> key >> count) || key != "count") fail("expected 'count N'");
  }
  const std::size_t n = static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
  RegionProposalSet set{h, w, {}};
  for (std::size_t k = 0; k < count; ++k) {
    auto s = next();
    std::string key;
    std::size_t area = 0;
    int bit = 0;
    if (!(s >> key >> area >> bit) || key != "region" || (bit != 0 && bit != 1)) fail("malformed region line");
    std::vector<std::uint8_t> bits;
    bits.reserve(n);
    std::size_t run = 0;
    while (s >> run) {
      if (bits.size() + run > n) fail("run lengths exceed image size");
      bits.insert(bits.end(), run, static_cast<std::uint8_t>(bit));
      bit ^= 1;
    }
    if (!s.eof()) fail("non-numeric run length");
    if (bits.size() != n) fail("run lengths cover " + std::to_string(bits.size()) + " of " + std::to_string(n) + " pixels");
    auto prop = RegionProposal::from_mask(Mask(h, w, std::move(bits)));
    if (prop.area != area) fail("declared area does not match mask");
    if (prop.area >= std::max<std::size_t>(min_area, 1)) set.proposals.push_back(std::move(prop));
  }
  return set;
}

RegionProposal unmask_candidate(const RegionProposalSet& set) {
  Mask covered(set.height, set.width);
  for (const auto& p : set.proposals) covered |= p.mask;
  return RegionProposal::from_mask(covered.complement());
}

double overlap_score(const Mask& region, const SaliencyMap& saliency) {
  if (region.height() != saliency.height || region.width() != saliency.width) {
    throw ShapeError("overlap_score: mask and saliency map differ in size");
  }
  double inter = 0.0;
  double ssum = 0.0;
  for (std::size_t i = 0; i < saliency.values.size(); ++i) {
    ssum += saliency.values[i];
    if (region.test(i)) inter += saliency.values[i];
  }
  const double denom = static_cast<double>(region.count()) + ssum;
  return denom > 0.0 ? inter / denom : 0.0;
}

SalientRegionMask select_salient_region_mask(const RegionProposalSet& set, const SaliencyMap& saliency, int k) {
  if (k < 1) throw DomainError("k must be at least 1");
  if (saliency.height != set.height || saliency.width != set.width) {
    throw ShapeError("saliency map and proposals differ in size");
  }
  std::vector<RegionProposal> candidates(set.proposals);
  candidates.push_back(unmask_candidate(set));

  SalientRegionMask out;
  out.k = k;
  out.mask = Mask(set.height, set.width);
  out.scores.reserve(candidates.size());
  for (const auto& c : candidates) out.scores.push_back(overlap_score(c.mask, saliency));

  // Empty candidates (U when the proposals cover the frame) are never selected.
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (candidates[i].area > 0) order.push_back(i);
  }
  std::vector<std::size_t> first(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) first[i] = candidates[i].first_pixel();
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (out.scores[a] != out.scores[b]) return out.scores[a] > out.scores[b];
    if (candidates[a].area != candidates[b].area) return candidates[a].area > candidates[b].area;
    if (first[a] != first[b]) return first[a] < first[b];
    return a < b;
  });
  const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(k), order.size());
  for (std::size_t i = 0; i < take; ++i) {
    const auto idx = order[i];
    out.selected.push_back(idx);
    out.mask |= candidates[idx].mask;
    if (idx == set.proposals.size()) out.includes_unmask = true;
  }
  return out;
}

SalientRegionMask random_pixel_mask(int height, int width, double p, std::uint64_t seed) {
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("pixel probability must lie in [0,1]");
  Xoshiro256 gen(derive_seed(seed, 0x706978656C));
  SalientRegionMask out;
  out.mask = Mask(height, width);
  for (std::size_t i = 0; i < out.mask.pixels(); ++i) out.mask.set(i, gen.uniform() < p);
  return out;
}

SalientRegionMask random_region_mask(const RegionProposalSet& set, int k, std::uint64_t seed) {
  if (k < 1) throw DomainError("k must be at least 1");
  if (set.empty()) throw DomainError("random region mask needs at least one proposal");
  Xoshiro256 gen(derive_seed(seed, 0x726567696F6E));
  std::vector<std::size_t> idx(set.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(k), idx.size());
  SalientRegionMask out;
  out.k = k;
  out.mask = Mask(set.height, set.width);
  for (std::size_t i = 0; i < take; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(gen() % (idx.size() - i));
    std::swap(idx[i], idx[j]);
    out.selected.push_back(idx[i]);
    out.mask |= set.proposals[idx[i]].mask;
  }
  return out;
}

}  // namespace ghostcert
