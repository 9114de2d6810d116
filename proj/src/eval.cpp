#include "sidelobe/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>

namespace sidelobe {

double Confusion::accuracy() const noexcept {
  return total() ? static_cast<double>(tp + tn) / static_cast<double>(total()) : 0.0;
}
double Confusion::tpr() const noexcept { return tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0; }
double Confusion::fpr() const noexcept { return fp + tn ? static_cast<double>(fp) / static_cast<double>(fp + tn) : 0.0; }

Confusion confusion(std::span<const double> scores, std::span<const Status> labels, double threshold,
                    double polarity) {
  if (scores.empty() || scores.size() != labels.size())
    throw std::invalid_argument("confusion: need equal, non-empty score and label streams");
  Confusion c;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = polarity * (scores[i] - threshold) > 0.0;
    const bool actual = labels[i] == Status::Fault;
    if (predicted && actual) ++c.tp;
    else if (predicted) ++c.fp;
    else if (actual) ++c.fn;
    else ++c.tn;
  }
  return c;
}

RocCurve roc(std::span<const double> scores, std::span<const Status> labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("roc: length mismatch");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });
  const auto pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), Status::Fault));
  const std::size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0) throw std::invalid_argument("roc: both classes must be present");

  RocCurve curve;
  curve.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double s = scores[order[i]];
    // every instant with this score flips together
    for (; i < order.size() && scores[order[i]] == s; ++i) (labels[order[i]] == Status::Fault ? tp : fp)++;
    curve.points.push_back({s, static_cast<double>(fp) / static_cast<double>(neg),
                            static_cast<double>(tp) / static_cast<double>(pos)});
  }
  curve.points.push_back({-std::numeric_limits<double>::infinity(), 1.0, 1.0});
  for (std::size_t i = 1; i < curve.points.size(); ++i) {
    const auto& a = curve.points[i - 1];
    const auto& b = curve.points[i];
    curve.auc += (b.fpr - a.fpr) * (a.tpr + b.tpr) / 2.0;
  }
  return curve;
}

double best_accuracy(std::span<const double> scores, std::span<const Status> labels) {
  const RocCurve c = roc(scores, labels);
  const auto pos = static_cast<double>(std::count(labels.begin(), labels.end(), Status::Fault));
  const double neg = static_cast<double>(labels.size()) - pos;
  double best = 0.0;
  for (const auto& p : c.points)
    best = std::max(best, (p.tpr * pos + (1.0 - p.fpr) * neg) / static_cast<double>(labels.size()));
  return best;
}

namespace {

struct Binning {
  double lo, width;
  std::size_t bins;

  std::size_t index(double x) const {
    if (width == 0.0) return 0;
    const auto i = static_cast<std::ptrdiff_t>(std::floor((x - lo) / width));
    return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(i, 0, static_cast<std::ptrdiff_t>(bins) - 1));
  }
};

std::vector<double> normalized_counts(std::span<const double> x, const Binning& b) {
  std::vector<double> p(b.bins, 0.0);
  for (double v : x) p[b.index(v)] += 1.0;
  for (auto& v : p) v /= static_cast<double>(x.size());
  return p;
}

}  // namespace

double histogram_l1(std::span<const double> a, std::span<const double> b, std::size_t bins) {
  if (a.empty() || b.empty() || bins == 0) throw std::invalid_argument("histogram_l1: empty input");
  const auto [amin, amax] = std::minmax_element(a.begin(), a.end());
  const auto [bmin, bmax] = std::minmax_element(b.begin(), b.end());
  const double lo = std::min(*amin, *bmin), hi = std::max(*amax, *bmax);
  const Binning bin{lo, (hi - lo) / static_cast<double>(bins), bins};
  const auto pa = normalized_counts(a, bin), pb = normalized_counts(b, bin);
  double d = 0.0;
  for (std::size_t i = 0; i < bins; ++i) d += std::abs(pa[i] - pb[i]);
  return d;
}

double histogram_l1(std::span<const double> samples, std::span<const LobeComponent> lobes, std::size_t bins) {
  if (samples.empty() || lobes.empty() || bins == 0) throw std::invalid_argument("histogram_l1: empty input");
  const auto [mn, mx] = std::minmax_element(samples.begin(), samples.end());
  const Binning bin{*mn, (*mx - *mn) / static_cast<double>(bins), bins};
  const auto ps = normalized_counts(samples, bin);
  double total_w = 0.0;
  for (const auto& l : lobes) total_w += l.weight;
  if (total_w <= 0.0) throw std::invalid_argument("histogram_l1: lobes carry no weight");

  // model mass per bin; the outer bins are closed so mass outside the range
  // is reported separately
  std::vector<double> pm(bins, 0.0);
  double outside = 0.0;
  auto below = [](const LobeMoments& m, double x) {
    if (m.variance <= 0.0) return m.mean <= x ? 1.0 : 0.0;
    return normal_cdf((x - m.mean) / m.sd());
  };
  for (const auto& l : lobes) {
    const double w = l.weight / total_w;
    double prev = below(l.moments, bin.lo);
    outside += w * prev;
    for (std::size_t i = 0; i < bins; ++i) {
      const double edge = i + 1 == bins ? *mx : bin.lo + bin.width * static_cast<double>(i + 1);
      const double cur = below(l.moments, edge);
      pm[i] += w * (cur - prev);
      prev = cur;
    }
    outside += w * (1.0 - prev);
  }
  double d = outside;
  for (std::size_t i = 0; i < bins; ++i) d += std::abs(ps[i] - pm[i]);
  return d;
}

std::vector<TraceError> trace_error(const Matrix& model, const Matrix& reference, std::size_t from) {
  if (model.rows() != reference.rows() || model.cols() != reference.cols())
    throw std::invalid_argument("trace_error: shape mismatch");
  if (from >= model.rows()) throw std::invalid_argument("trace_error: nothing to compare");
  std::vector<TraceError> out(model.cols());
  const auto n = static_cast<double>(model.rows() - from);
  for (std::size_t c = 0; c < model.cols(); ++c) {
    double se = 0.0, sq = 0.0;
    for (std::size_t r = from; r < model.rows(); ++r) {
      const double d = model(r, c) - reference(r, c);
      se += d * d;
      sq += reference(r, c) * reference(r, c);
    }
    out[c] = {std::sqrt(se / n), std::sqrt(sq / n)};
  }
  return out;
}

double ErrorDecomposition::lobe_total() const noexcept {
  double t = 0.0;
  for (const auto& l : lobes) t += l.mass;
  return t;
}

namespace {

/// Probability that a lobe lands on the fault side of the threshold.
double fault_side(const LobeMoments& m, double threshold, double polarity) {
  if (polarity > 0.0) return m.upper_tail(threshold);
  if (m.variance <= 0.0) return m.mean < threshold ? 1.0 : 0.0;
  return normal_cdf((threshold - m.mean) / m.sd());
}

}  // namespace

ErrorDecomposition decompose_errors(const DetailedDistribution& dd, double threshold, double polarity) {
  ErrorDecomposition out;
  out.threshold = threshold;
  out.polarity = polarity;
  for (const auto& c : dd.components) {
    const bool fault = c.fss.current() == Status::Fault;
    const double p_fault = fault_side(c.moments, threshold, polarity);
    const double mass = c.weight * (fault ? 1.0 - p_fault : p_fault);
    out.lobes.push_back({c.fss, c.context, c.kind, c.weight, mass});
    ErrorSplit& split = c.kind == LobeKind::Main            ? out.main
                        : c.kind == LobeKind::PrincipalSide ? out.principal_side
                                                            : out.neglected;
    (fault ? split.fn : split.fp) += mass;
  }

  // Mixture route: P(status) * P(error | status mixture).
  for (Status s : {Status::Normal, Status::Fault}) {
    const auto comps = dd.status_components(s);
    double prior = 0.0;
    for (const auto& c : comps) prior += c.weight;
    if (prior == 0.0) continue;
    double p_fault = 0.0;
    for (const auto& c : comps) p_fault += (c.weight / prior) * fault_side(c.moments, threshold, polarity);
    out.mixture_error += prior * (s == Status::Fault ? 1.0 - p_fault : p_fault);
  }
  return out;
}

std::vector<std::pair<Fss, double>> error_by_fss(const ErrorDecomposition& d) {
  std::map<Fss, double> acc;
  for (const auto& l : d.lobes) acc[l.fss] += l.mass;
  return {acc.begin(), acc.end()};
}

}  // namespace sidelobe
