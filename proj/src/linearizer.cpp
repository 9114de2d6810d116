#include "sidelobe/linearizer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sidelobe {

PwlApprox::PwlApprox(std::vector<double> breakpoints, std::vector<Segment> segments, std::size_t interior)
    : breakpoints_(std::move(breakpoints)), segments_(std::move(segments)), interior_(interior) {
  if (segments_.size() != breakpoints_.size() + 1)
    throw std::invalid_argument("PwlApprox: need one more segment than breakpoints");
  if (!std::is_sorted(breakpoints_.begin(), breakpoints_.end()) ||
      std::adjacent_find(breakpoints_.begin(), breakpoints_.end()) != breakpoints_.end())
    throw std::invalid_argument("PwlApprox: breakpoints must be strictly increasing");
  if (!breakpoints_.empty()) {
    // dense sup-error over the interior knot span, the ramps included
    const double lo = breakpoints_.front(), hi = breakpoints_.back();
    constexpr int kGrid = 20000;
    for (int i = 0; i <= kGrid; ++i) {
      const double x = lo + (hi - lo) * i / kGrid;
      sup_error_ = std::max(sup_error_, std::abs((*this)(x)-std::tanh(x)));
    }
  }
}

std::size_t PwlApprox::central_index() const { return select_segment(*this, 0.0).index; }

double PwlApprox::operator()(double x) const { return select_segment(*this, x).segment(x); }

PwlApprox build_pwl(std::size_t n_interior_segments, double x_span) {
  if (n_interior_segments < 1) throw std::invalid_argument("build_pwl: need at least one segment");
  if (!(x_span > 0.0)) throw std::invalid_argument("build_pwl: span must be > 0");

  const std::size_t n = n_interior_segments;
  std::vector<double> knots_x(n + 1), knots_y(n + 1);
  for (std::size_t i = 0; i <= n; ++i) {
    knots_x[i] = -x_span + 2.0 * x_span * static_cast<double>(i) / static_cast<double>(n);
    knots_y[i] = std::tanh(knots_x[i]);
  }
  // exact odd symmetry
  for (std::size_t i = 0; i <= n / 2; ++i) {
    knots_x[n - i] = -knots_x[i];
    knots_y[n - i] = -knots_y[i];
  }
  if (n % 2 == 0) knots_x[n / 2] = knots_y[n / 2] = 0.0;

  const double end_y = std::tanh(x_span);
  const double slope = 1.0 - end_y * end_y;
  const double sat_x = x_span + (1.0 - end_y) / slope;

  std::vector<double> bps;
  std::vector<Segment> segs;
  bps.push_back(-sat_x);
  segs.push_back({0.0, -1.0});
  bps.insert(bps.end(), knots_x.begin(), knots_x.end());
  segs.push_back({slope, -end_y + slope * x_span});  // lower ramp through (-span, -tanh span)
  for (std::size_t i = 0; i < n; ++i) {
    const double g = (knots_y[i + 1] - knots_y[i]) / (knots_x[i + 1] - knots_x[i]);
    segs.push_back({g, knots_y[i] - g * knots_x[i]});
  }
  segs.push_back({slope, end_y - slope * x_span});
  bps.push_back(sat_x);
  segs.push_back({0.0, 1.0});
  // Central chord intercepts are zero by symmetry; remove rounding noise.
  for (auto& s : segs)
    if (std::abs(s.intercept) < 1e-15) s.intercept = 0.0;
  return PwlApprox(std::move(bps), std::move(segs), n);
}

SegmentChoice select_segment(const PwlApprox& pwl, double x) {
  const auto& bps = pwl.breakpoints();
  const auto idx = static_cast<std::size_t>(std::lower_bound(bps.begin(), bps.end(), x) - bps.begin());
  return {idx, pwl.segments()[idx]};
}

bool Lss::touches_start() const noexcept {
  return std::find(indices.begin(), indices.end(), kBeforeStart) != indices.end();
}

Lss make_lss(std::span<const Segment> segments) {
  Lss l;
  l.segments.assign(segments.begin(), segments.end());
  for (std::size_t i = 0; i < segments.size(); ++i) l.indices.push_back(static_cast<int>(i));
  return l;
}

double ChannelLss::relative_frequency(const std::vector<int>& key) const {
  if (counted == 0) return 0.0;
  const auto it = counts.find(key);
  return it == counts.end() ? 0.0 : static_cast<double>(it->second) / static_cast<double>(counted);
}

LssTable extract_lss(const Trace& trace, const RnnWeights& weights, std::size_t layer, const PwlApprox& pwl,
                     std::size_t order) {
  if (layer >= trace.layers.size()) throw std::invalid_argument("extract_lss: no such layer");
  for (const auto& m : weights.feedback.at(layer))
    if (!m.is_diagonal())
      throw std::invalid_argument("extract_lss: feedback is not diagonal; line segment sequences are per channel only");

  const Matrix& pre = trace.layers[layer].pre;
  const std::size_t t_len = pre.rows();
  const std::size_t span = 2 * order + 1;
  LssTable table;
  table.order = order;
  table.layer = layer;
  table.channels.resize(pre.cols());
  for (std::size_t c = 0; c < pre.cols(); ++c) {
    ChannelLss& ch = table.channels[c];
    ch.per_instant.reserve(t_len);
    for (std::size_t n = 0; n < t_len; ++n) {
      Lss l;
      for (std::size_t j = 0; j < span; ++j) {
        if (n < j) {
          l.indices.push_back(kBeforeStart);
          l.segments.push_back({0.0, 0.0});
        } else {
          const auto choice = select_segment(pwl, pre(n - j, c));
          l.indices.push_back(static_cast<int>(choice.index));
          l.segments.push_back(choice.segment);
        }
      }
      if (n + 1 >= span) {
        ++ch.counts[l.indices];
        ++ch.counted;
      }
      ch.per_instant.push_back(std::move(l));
    }
  }
  return table;
}

namespace {

/// Linear form over a(n - m), h(n - m) and a constant.
struct LinearForm {
  std::vector<double> a, h;
  double constant = 0.0;
};

/// Replaces every h(n - m) term by g_m (a(n - m) + sum_i w_i h(n - m - i)) + r_m.
void substitute(LinearForm& form, std::span<const double> w, const Lss& lss) {
  LinearForm next{form.a, std::vector<double>(form.h.size(), 0.0), form.constant};
  for (std::size_t m = 0; m < form.h.size(); ++m) {
    const double coef = form.h[m];
    if (coef == 0.0) continue;
    if (m >= lss.size()) throw std::logic_error("substitute: lag beyond line segment sequence");
    const auto [g, r] = lss.segments[m];
    next.a[m] += coef * g;
    next.constant += coef * r;
    for (std::size_t i = 1; i <= w.size(); ++i) next.h[m + i] += coef * g * w[i - 1];
  }
  form = std::move(next);
}

}  // namespace

CoeffSet expand_coefficients(std::span<const double> feedback, const Lss& lss) {
  const std::size_t p = feedback.size();
  if (p == 0 || lss.size() != 2 * p + 1)
    throw std::invalid_argument("expand_coefficients: line segment sequence must have 2p+1 entries");

  LinearForm form;
  form.a.assign(3 * p + 1, 0.0);
  form.h.assign(3 * p + 1, 0.0);
  form.h[0] = 1.0;
  // h(n) from its definition, then two levels of substitution for the lags
  for (int level = 0; level < 3; ++level) substitute(form, feedback, lss);

  CoeffSet out;
  out.alphas.assign(form.a.begin(), form.a.begin() + static_cast<std::ptrdiff_t>(2 * p + 1));
  out.beta = form.constant;
  for (double c : form.h) out.dropped_bound += std::abs(c);
  return out;
}

std::vector<CoeffSet> expand_coefficients(std::span<const Matrix> feedback, std::span<const Lss> per_channel) {
  std::vector<CoeffSet> out;
  out.reserve(per_channel.size());
  for (std::size_t c = 0; c < per_channel.size(); ++c) {
    std::vector<double> w;
    for (const auto& m : feedback) {
      if (!m.is_diagonal()) throw std::invalid_argument("expand_coefficients: feedback is not diagonal");
      w.push_back(m(c, c));
    }
    out.push_back(expand_coefficients(w, per_channel[c]));
  }
  return out;
}

CoeffSet closed_form_coefficients(std::span<const double> feedback, const Lss& lss) {
  const std::size_t p = feedback.size();
  if (p != 1 && p != 2) throw std::invalid_argument("closed_form_coefficients: order must be 1 or 2");
  if (lss.size() != 2 * p + 1) throw std::invalid_argument("closed_form_coefficients: length mismatch");

  double g[5] = {0, 0, 0, 0, 0}, r[5] = {0, 0, 0, 0, 0};
  for (std::size_t j = 0; j < lss.size(); ++j) {
    g[j] = lss.segments[j].gradient;
    r[j] = lss.segments[j].intercept;
  }
  const double w1 = feedback[0];
  const double w2 = p == 2 ? feedback[1] : 0.0;

  CoeffSet out;
  out.alphas = {
      g[0],
      g[0] * w1 * g[1],
      g[0] * g[1] * w1 * w1 * g[2] + g[0] * w2 * g[2],
      g[0] * g[1] * w1 * w2 * g[3] + g[0] * g[2] * w2 * w1 * g[3],
      g[0] * g[2] * w2 * w2 * g[4],
  };
  out.beta = r[0] + g[0] * w1 * r[1] + (g[0] * w1 * w1 * g[1] + g[0] * w2) * r[2] +
             (g[0] * w1 * w2 * g[1] + g[0] * w2 * w1 * g[2]) * r[3] + g[0] * w2 * w2 * g[2] * r[4];
  out.alphas.resize(2 * p + 1);
  return out;
}

}  // namespace sidelobe
