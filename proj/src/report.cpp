#include "ghostcert/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <sstream>

#include "ghostcert/error.hpp"
#include "ghostcert/netpbm.hpp"

namespace ghostcert {

namespace {

constexpr double kWidth = 560;
constexpr double kHeight = 340;
constexpr double kLeft = 60;
constexpr double kRight = 190;
constexpr double kTop = 40;
constexpr double kBottom = 50;
constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                    "#9467bd", "#8c564b", "#e377c2", "#17becf"};

std::string fmt(double v, int digits = 2) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string series_label(const MetricsSummary& s) {
  std::string label = to_string(s.attack) + (s.targeted ? " targeted" : " untargeted");
  if (s.attack == AttackKind::ghostcert) {
    label += " " + to_string(s.mask_strategy);
    if (s.k > 0) label += " k=" + std::to_string(s.k);
  }
  return label;
}

struct Series {
  std::string label;
  std::vector<std::pair<double, double>> points;  // (ε, y), sorted by ε
};

std::vector<Series> collect(std::span<const MetricsSummary> summaries,
                            const std::function<std::optional<double>(const MetricsSummary&)>& y) {
  std::vector<Series> out;
  std::map<std::string, std::size_t> index;
  for (const auto& s : summaries) {
    const auto label = series_label(s);
    auto [it, fresh] = index.emplace(label, out.size());
    if (fresh) out.push_back({label, {}});
    if (const auto v = y(s)) out[it->second].points.emplace_back(s.epsilon, *v);
  }
  for (auto& s : out) std::stable_sort(s.points.begin(), s.points.end());
  return out;
}

class Plot {
 public:
  Plot(std::span<const MetricsSummary> summaries, double ymax) : ymax_(ymax) {
    for (const auto& s : summaries) {
      xmin_ = std::min(xmin_, s.epsilon);
      xmax_ = std::max(xmax_, s.epsilon);
      if (std::find(ticks_.begin(), ticks_.end(), s.epsilon) == ticks_.end()) ticks_.push_back(s.epsilon);
    }
    std::sort(ticks_.begin(), ticks_.end());
    if (ticks_.empty()) {
      xmin_ = 0.0;
      xmax_ = 1.0;
    } else if (xmax_ == xmin_) {
      xmin_ -= 1.0;
      xmax_ += 1.0;
    }
  }

  double px(double x) const { return kLeft + (x - xmin_) / (xmax_ - xmin_) * (kWidth - kLeft - kRight); }
  double py(double y) const { return kHeight - kBottom - y / ymax_ * (kHeight - kTop - kBottom); }

  void frame(std::ostringstream& o, const std::string& title, const std::string& ylabel, int ydigits) const {
    const double x0 = kLeft;
    const double x1 = kWidth - kRight;
    const double y0 = kHeight - kBottom;
    const double y1 = kTop;
    o << "<rect x=\"0\" y=\"0\" width=\"" << fmt(kWidth, 0) << "\" height=\"" << fmt(kHeight, 0)
      << "\" fill=\"white\"/>\n";
    o << "<text x=\"" << fmt((x0 + x1) / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">" << escape(title)
      << "</text>\n";
    o << "<line x1=\"" << fmt(x0) << "\" y1=\"" << fmt(y0) << "\" x2=\"" << fmt(x1) << "\" y2=\"" << fmt(y0)
      << "\" stroke=\"black\"/>\n";
    o << "<line x1=\"" << fmt(x0) << "\" y1=\"" << fmt(y0) << "\" x2=\"" << fmt(x0) << "\" y2=\"" << fmt(y1)
      << "\" stroke=\"black\"/>\n";
    for (double t : ticks_) {
      o << "<line x1=\"" << fmt(px(t)) << "\" y1=\"" << fmt(y0) << "\" x2=\"" << fmt(px(t)) << "\" y2=\""
        << fmt(y0 + 5) << "\" stroke=\"black\"/>\n";
      o << "<text x=\"" << fmt(px(t)) << "\" y=\"" << fmt(y0 + 18) << "\" text-anchor=\"middle\" font-size=\"11\">"
        << fmt(t, t == std::floor(t) ? 0 : 2) << "</text>\n";
    }
    for (int i = 0; i <= 4; ++i) {
      const double v = ymax_ * i / 4.0;
      o << "<line x1=\"" << fmt(x0 - 5) << "\" y1=\"" << fmt(py(v)) << "\" x2=\"" << fmt(x1) << "\" y2=\""
        << fmt(py(v)) << "\" stroke=\"" << (i == 0 ? "black" : "#dddddd") << "\"/>\n";
      o << "<text x=\"" << fmt(x0 - 8) << "\" y=\"" << fmt(py(v) + 4) << "\" text-anchor=\"end\" font-size=\"11\">"
        << fmt(v, ydigits) << "</text>\n";
    }
    o << "<text x=\"" << fmt((x0 + x1) / 2) << "\" y=\"" << fmt(kHeight - 10)
      << "\" text-anchor=\"middle\" font-size=\"12\">epsilon (nominal, 224x224 scale)</text>\n";
    o << "<text x=\"16\" y=\"" << fmt((y0 + y1) / 2) << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 "
      << fmt((y0 + y1) / 2) << ")\">" << escape(ylabel) << "</text>\n";
  }

  void series(std::ostringstream& o, const std::vector<Series>& all) const {
    for (std::size_t i = 0; i < all.size(); ++i) {
      const char* colour = kPalette[i % (sizeof kPalette / sizeof kPalette[0])];
      const auto& s = all[i];
      if (s.points.size() > 1) {
        o << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"2\" points=\"";
        for (std::size_t j = 0; j < s.points.size(); ++j) {
          o << (j ? " " : "") << fmt(px(s.points[j].first)) << "," << fmt(py(s.points[j].second));
        }
        o << "\"/>\n";
      }
      for (const auto& [x, y] : s.points) {
        o << "<circle cx=\"" << fmt(px(x)) << "\" cy=\"" << fmt(py(y)) << "\" r=\"3\" fill=\"" << colour << "\"/>\n";
      }
      const double ly = kTop + 14.0 * static_cast<double>(i);
      const double lx = kWidth - kRight + 12;
      o << "<line x1=\"" << fmt(lx) << "\" y1=\"" << fmt(ly) << "\" x2=\"" << fmt(lx + 16) << "\" y2=\"" << fmt(ly)
        << "\" stroke=\"" << colour << "\" stroke-width=\"2\"/>\n";
      o << "<text x=\"" << fmt(lx + 20) << "\" y=\"" << fmt(ly + 4) << "\" font-size=\"10\">" << escape(s.label)
        << "</text>\n";
    }
  }

 private:
  double xmin_ = std::numeric_limits<double>::infinity();
  double xmax_ = -std::numeric_limits<double>::infinity();
  double ymax_;
  std::vector<double> ticks_;
};

std::string svg_open() {
  return "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
         fmt(kWidth, 0) + "\" height=\"" + fmt(kHeight, 0) + "\" viewBox=\"0 0 " + fmt(kWidth, 0) + " " +
         fmt(kHeight, 0) + "\" font-family=\"sans-serif\">\n<!-- renderer " + kReportRendererVersion + " -->\n";
}

double nice_ceiling(double v) {
  if (!(v > 0.0)) return 1.0;
  const double p = std::pow(10.0, std::floor(std::log10(v)));
  for (double m : {1.0, 2.0, 2.5, 5.0, 10.0}) {
    if (m * p >= v) return m * p;
  }
  return 10.0 * p;
}

void write_text(const std::filesystem::path& path, const std::string& text, ReportFiles& files) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out << text;
  files.written.push_back(path);
}

std::string slug(double v) {
  std::string s = fmt(v, 2);
  std::replace(s.begin(), s.end(), '.', 'p');
  return s;
}

Image to_rgb(const Image& x) {
  if (x.channels() == 3) return x;
  Image out(Shape{x.height(), x.width(), 3});
  for (int r = 0; r < x.height(); ++r)
    for (int c = 0; c < x.width(); ++c)
      for (int ch = 0; ch < 3; ++ch) out.at(r, c, ch) = x.at(r, c, std::min(ch, x.channels() - 1));
  return out;
}

}  // namespace

std::string render_asr_plot(std::span<const MetricsSummary> summaries, const std::string& title) {
  const Plot plot(summaries, 1.0);
  std::ostringstream o;
  o << svg_open();
  plot.frame(o, title, "attack success rate", 2);
  plot.series(o, collect(summaries, [](const MetricsSummary& s) -> std::optional<double> {
                if (s.trials == 0) return std::nullopt;
                return s.asr;
              }));
  o << "</svg>\n";
  return o.str();
}

std::string render_radius_plot(std::span<const MetricsSummary> summaries, const std::string& title) {
  double top = 0.0;
  double source = 0.0;
  std::size_t n = 0;
  for (const auto& s : summaries) {
    if (s.mean_spoofing_radius) top = std::max(top, *s.mean_spoofing_radius);
    if (s.trials > 0) {
      source += s.mean_source_radius;
      ++n;
    }
  }
  if (n > 0) source /= static_cast<double>(n);
  top = nice_ceiling(std::max(top, source) * 1.1);
  const Plot plot(summaries, top);
  std::ostringstream o;
  o << svg_open();
  plot.frame(o, title, "mean certified radius", 2);
  if (n > 0) {
    o << "<line x1=\"" << fmt(kLeft) << "\" y1=\"" << fmt(plot.py(source)) << "\" x2=\"" << fmt(kWidth - kRight)
      << "\" y2=\"" << fmt(plot.py(source)) << "\" stroke=\"black\" stroke-dasharray=\"6,4\"/>\n";
    o << "<text x=\"" << fmt(kWidth - kRight - 4) << "\" y=\"" << fmt(plot.py(source) - 5)
      << "\" text-anchor=\"end\" font-size=\"10\">source radius " << fmt(source, 3) << "</text>\n";
  }
  plot.series(o, collect(summaries, [](const MetricsSummary& s) { return s.mean_spoofing_radius; }));
  o << "</svg>\n";
  return o.str();
}

Image render_panel(const Image& source, const Image& adversarial, double amplification) {
  require_same_shape(source, adversarial, "render_panel");
  const int H = source.height();
  const int W = source.width();
  constexpr int kGutter = 2;
  Image panel(Shape{H, 3 * W + 2 * kGutter, 3}, 1.0);
  const Image a = to_rgb(source);
  const Image b = to_rgb(adversarial);
  for (int r = 0; r < H; ++r) {
    for (int c = 0; c < W; ++c) {
      for (int ch = 0; ch < 3; ++ch) {
        panel.at(r, c, ch) = a.at(r, c, ch);
        panel.at(r, W + kGutter + c, ch) = b.at(r, c, ch);
        const double d = 0.5 + amplification * (b.at(r, c, ch) - a.at(r, c, ch));
        panel.at(r, 2 * (W + kGutter) + c, ch) = std::clamp(d, 0.0, 1.0);
      }
    }
  }
  return panel;
}

ReportFiles render_report(std::span<const TrialRecord> records, const std::filesystem::path& out_dir,
                          const Dataset* source, const ReportOptions& options) {
  ReportFiles files;
  std::filesystem::create_directories(out_dir / "plots");
  const auto summaries = summarize_by_cell(records);
  write_text(out_dir / "summary.csv", summaries_csv(summaries), files);

  std::vector<std::pair<DefenseKind, double>> groups;
  for (const auto& s : summaries) {
    const auto key = std::make_pair(s.defense, s.sigma);
    if (std::find(groups.begin(), groups.end(), key) == groups.end()) groups.push_back(key);
  }
  for (const auto& [defense, sigma] : groups) {
    std::vector<MetricsSummary> subset;
    for (const auto& s : summaries) {
      if (s.defense == defense && s.sigma == sigma) subset.push_back(s);
    }
    const std::string name = to_string(defense) + "_sigma" + slug(sigma);
    const std::string title = to_string(defense) + " defense, sigma = " + fmt(sigma, 2);
    write_text(out_dir / "plots" / ("asr_" + name + ".svg"), render_asr_plot(subset, "ASR: " + title), files);
    write_text(out_dir / "plots" / ("radius_" + name + ".svg"), render_radius_plot(subset, "Radius: " + title), files);
  }

  if (source == nullptr) {
    files.warnings.push_back("no source dataset given; image panels skipped");
    return files;
  }
  std::filesystem::create_directories(out_dir / "panels");
  std::ostringstream captions;
  captions << "Each panel: source | adversarial | perturbation amplified x" << fmt(options.amplification, 0)
           << " around mid-grey.\n";
  std::size_t made = 0;
  for (const auto& r : records) {
    if (made >= options.max_panels) break;
    if (!r.ok || r.outcome() == Outcome::source) continue;
    if (r.image_index >= source->size() || source->images[r.image_index].shape() != r.adversarial.shape()) {
      files.warnings.push_back("trial " + r.trial_id + " does not match the supplied dataset; panel skipped");
      continue;
    }
    const auto name = "panel_" + std::to_string(made) + ".ppm";
    const auto path = out_dir / "panels" / name;
    write_netpbm(path, render_panel(source->images[r.image_index], r.adversarial, options.amplification));
    files.written.push_back(path);
    captions << name << ": " << r.trial_id << " outcome=" << to_string(r.outcome()) << " decision=" << r.post.decision
             << " radius=" << fmt(r.post.radius, 3) << " l2=" << fmt(r.l2, 3) << "\n";
    ++made;
  }
  write_text(out_dir / "panels" / "captions.txt", captions.str(), files);
  return files;
}

}  // namespace ghostcert
