#include "sidelobe/plot.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace sidelobe {

namespace {

constexpr double kWidth = 480, kHeight = 360, kMargin = 48;
constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

struct Frame {
  double x0, x1, y0, y1;

  double px(double x) const { return kMargin + (x - x0) / (x1 - x0) * (kWidth - 2 * kMargin); }
  double py(double y) const { return kHeight - kMargin - (y - y0) / (y1 - y0) * (kHeight - 2 * kMargin); }
};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

void open(std::ostringstream& os, const Frame& f, const std::string& title, const std::string& xlabel,
          const std::string& ylabel) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
     << "\" font-family=\"sans-serif\" font-size=\"11\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << kWidth / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"13\">" << escape(title)
     << "</text>\n"
     << "<rect x=\"" << kMargin << "\" y=\"" << kMargin << "\" width=\"" << kWidth - 2 * kMargin << "\" height=\""
     << kHeight - 2 * kMargin << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double x = f.x0 + (f.x1 - f.x0) * i / 4.0, y = f.y0 + (f.y1 - f.y0) * i / 4.0;
    os << "<text x=\"" << f.px(x) << "\" y=\"" << kHeight - kMargin + 14 << "\" text-anchor=\"middle\">" << x
       << "</text>\n"
       << "<text x=\"" << kMargin - 4 << "\" y=\"" << f.py(y) + 4 << "\" text-anchor=\"end\">" << y << "</text>\n";
  }
  os << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 8 << "\" text-anchor=\"middle\">" << escape(xlabel)
     << "</text>\n"
     << "<text x=\"12\" y=\"" << kHeight / 2 << "\" transform=\"rotate(-90 12 " << kHeight / 2
     << ")\" text-anchor=\"middle\">" << escape(ylabel) << "</text>\n";
}

void polyline(std::ostringstream& os, const Frame& f, const std::vector<std::pair<double, double>>& pts,
              const char* color, const char* extra = "") {
  os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" " << extra << " points=\"";
  for (const auto& [x, y] : pts) os << f.px(x) << ',' << f.py(y) << ' ';
  os << "\"/>\n";
}

double lobe_pdf(const LobeMoments& m, double x) {
  if (m.variance <= 0.0) return 0.0;
  const double z = (x - m.mean) / m.sd();
  return std::exp(-0.5 * z * z) / (m.sd() * std::sqrt(2.0 * std::numbers::pi));
}

}  // namespace

std::string roc_svg(std::span<const RocSeries> series, const std::string& title) {
  std::ostringstream os;
  os.precision(4);
  const Frame f{0, 1, 0, 1};
  open(os, f, title, "false positive rate", "true positive rate");
  polyline(os, f, {{0, 0}, {1, 1}}, "#999999", "stroke-dasharray=\"4 3\"");
  for (std::size_t i = 0; i < series.size(); ++i) {
    std::vector<std::pair<double, double>> pts;
    for (const auto& p : series[i].curve.points) pts.emplace_back(p.fpr, p.tpr);
    const char* color = kColors[i % std::size(kColors)];
    polyline(os, f, pts, color);
    os << "<text x=\"" << f.px(0.55) << "\" y=\"" << f.py(0.3 - 0.06 * static_cast<double>(i)) << "\" fill=\"" << color
       << "\">" << escape(series[i].label) << " (AUC " << series[i].curve.auc << ")</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::string lobe_svg(std::span<const double> samples, const DetailedDistribution& dd, double threshold,
                     double polarity, std::size_t bins, const std::string& title) {
  if (samples.empty() || bins == 0) throw std::invalid_argument("lobe_svg: empty input");
  const auto [mn, mx] = std::minmax_element(samples.begin(), samples.end());
  const double lo = *mn, hi = *mx > *mn ? *mx : *mn + 1.0, width = (hi - lo) / static_cast<double>(bins);
  std::vector<double> density(bins, 0.0);
  for (double v : samples) {
    const auto i = std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(std::floor((v - lo) / width)), 0,
                                              static_cast<std::ptrdiff_t>(bins) - 1);
    density[static_cast<std::size_t>(i)] += 1.0 / (static_cast<double>(samples.size()) * width);
  }

  constexpr std::size_t grid = 240;
  std::vector<double> xs(grid + 1), normal(grid + 1, 0.0), fault(grid + 1, 0.0);
  for (std::size_t g = 0; g <= grid; ++g) xs[g] = lo + (hi - lo) * static_cast<double>(g) / grid;
  for (const auto& c : dd.components) {
    auto& curve = c.fss.current() == Status::Fault ? fault : normal;
    for (std::size_t g = 0; g <= grid; ++g) curve[g] += c.weight * lobe_pdf(c.moments, xs[g]);
  }
  double top = *std::max_element(density.begin(), density.end());
  for (std::size_t g = 0; g <= grid; ++g) top = std::max({top, normal[g], fault[g]});

  std::ostringstream os;
  os.precision(4);
  const Frame f{lo, hi, 0.0, top * 1.05};
  open(os, f, title, "score", "density");
  for (std::size_t i = 0; i < bins; ++i) {
    const double x = lo + width * static_cast<double>(i);
    os << "<rect x=\"" << f.px(x) << "\" y=\"" << f.py(density[i]) << "\" width=\"" << f.px(x + width) - f.px(x)
       << "\" height=\"" << f.py(0) - f.py(density[i]) << "\" fill=\"#dddddd\"/>\n";
  }
  auto fault_side = [&](double x) { return polarity * (x - threshold) > 0.0; };
  auto shade = [&](const std::vector<double>& curve, bool want_fault_side, const char* color) {
    os << "<path fill=\"" << color << "\" fill-opacity=\"0.35\" d=\"";
    bool open_path = false;
    for (std::size_t g = 0; g <= grid; ++g) {
      if (fault_side(xs[g]) == want_fault_side) {
        if (!open_path) os << "M" << f.px(xs[g]) << ',' << f.py(0) << ' ';
        os << "L" << f.px(xs[g]) << ',' << f.py(curve[g]) << ' ';
        open_path = true;
      } else if (open_path) {
        os << "L" << f.px(xs[g - 1]) << ',' << f.py(0) << " Z ";
        open_path = false;
      }
    }
    if (open_path) os << "L" << f.px(xs[grid]) << ',' << f.py(0) << " Z";
    os << "\"/>\n";
  };
  shade(normal, true, "#ff7f0e");
  shade(fault, false, "#9467bd");
  std::vector<std::pair<double, double>> pn, pf;
  for (std::size_t g = 0; g <= grid; ++g) {
    pn.emplace_back(xs[g], normal[g]);
    pf.emplace_back(xs[g], fault[g]);
  }
  polyline(os, f, pn, kColors[0]);
  polyline(os, f, pf, kColors[1]);
  if (threshold >= lo && threshold <= hi)
    polyline(os, f, {{threshold, 0.0}, {threshold, top * 1.05}}, "black", "stroke-dasharray=\"4 3\"");
  os << "<text x=\"" << kMargin + 6 << "\" y=\"" << kMargin + 14 << "\" fill=\"" << kColors[0]
     << "\">normal lobes (FP shaded)</text>\n"
     << "<text x=\"" << kMargin + 6 << "\" y=\"" << kMargin + 28 << "\" fill=\"" << kColors[1]
     << "\">fault lobes (FN shaded)</text>\n"
     << "</svg>\n";
  return os.str();
}

}  // namespace sidelobe
