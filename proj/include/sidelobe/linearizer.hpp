#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <vector>

#include "sidelobe/rnn.hpp"

namespace sidelobe {

/// One straight line y = gradient * x + intercept.
struct Segment {
  double gradient;
  double intercept;

  double operator()(double x) const noexcept { return gradient * x + intercept; }
  bool operator==(const Segment&) const = default;
};

/// Piecewise-linear, continuous, monotone approximation of tanh.
///
/// Interior knots sit on the tanh curve at uniformly spaced x in
/// [-span, span]. Beyond each end knot a short ramp follows the tanh tangent
/// there until it reaches +/-1, and a flat saturation segment
/// (g = 0, r = +/-1) covers the rest of the line.
/// Segment i spans (breakpoint[i-1], breakpoint[i]]; the first and last
/// segments are the saturation segments.
class PwlApprox {
 public:
  PwlApprox(std::vector<double> breakpoints, std::vector<Segment> segments, std::size_t interior);

  const std::vector<double>& breakpoints() const noexcept { return breakpoints_; }
  const std::vector<Segment>& segments() const noexcept { return segments_; }
  std::size_t interior_segments() const noexcept { return interior_; }
  /// Index of the segment containing x = 0.
  std::size_t central_index() const;

  /// max |pwl - tanh| between the outermost breakpoints, on a dense grid.
  double sup_error() const noexcept { return sup_error_; }

  double operator()(double x) const;

 private:
  std::vector<double> breakpoints_;
  std::vector<Segment> segments_;
  std::size_t interior_;
  double sup_error_ = 0.0;
};

PwlApprox build_pwl(std::size_t n_interior_segments = 8, double x_span = 3.0);

struct SegmentChoice {
  std::size_t index;
  Segment segment;
};

/// Segment active at x; a value sitting exactly on a breakpoint resolves to
/// the segment on its left.
SegmentChoice select_segment(const PwlApprox& pwl, double x);

/// Segment index recorded for a lag that reaches before the first instant.
/// Its (g, r) = (0, 0) reproduces the zero-state convention h = 0 exactly.
inline constexpr int kBeforeStart = -1;

/// Line segment sequence for one channel at one instant: slot j holds the
/// segment chosen by a'(n - j), j = 0..2p.
struct Lss {
  std::vector<int> indices;
  std::vector<Segment> segments;

  std::size_t size() const noexcept { return segments.size(); }
  bool touches_start() const noexcept;
};

/// Builds an Lss directly from (g, r) pairs; indices are left as slot
/// numbers.
Lss make_lss(std::span<const Segment> segments);

struct ChannelLss {
  /// Per instant; warm-up instants (n < 2p) carry before-start slots.
  std::vector<Lss> per_instant;
  /// Distinct index tuples over non-warm-up instants with their counts.
  std::map<std::vector<int>, std::size_t> counts;
  std::size_t counted = 0;

  double relative_frequency(const std::vector<int>& key) const;
};

struct LssTable {
  std::size_t order = 1;
  std::size_t layer = 0;
  std::vector<ChannelLss> channels;
};

/// Per-instant, per-channel line segment sequences for one layer of a
/// trace. Throws std::invalid_argument if any feedback matrix of the layer
/// is not diagonal.
LssTable extract_lss(const Trace& trace, const RnnWeights& weights, std::size_t layer,
                     const PwlApprox& pwl, std::size_t order);

/// Coefficients of the truncated expansion
///   h(n) = sum_j alpha_j a(n - j) + beta,  j = 0..2p
/// for one channel.
struct CoeffSet {
  std::vector<double> alphas;
  double beta = 0.0;
  /// Sum of |coefficient| over the residual h terms that the truncation
  /// drops (an upper bound on the dropped contribution per unit |h|).
  double dropped_bound = 0.0;
};

/// Symbolic two-level substitution of the feedback recursion for one
/// channel: h(n - j) is substituted once, the resulting h terms once more,
/// and the remaining h terms are dropped. `feedback[j-1]` is the diagonal
/// weight on h(n - j). Throws std::invalid_argument unless
/// lss.size() == 2 * feedback.size() + 1.
CoeffSet expand_coefficients(std::span<const double> feedback, const Lss& lss);

/// Same, for every channel of a layer from its diagonal feedback matrices.
std::vector<CoeffSet> expand_coefficients(std::span<const Matrix> feedback, std::span<const Lss> per_channel);

/// Printed closed forms for orders 1 and 2 (order 1 is order 2 with the
/// second feedback weight zero). Throws std::invalid_argument for other
/// orders or a length mismatch.
CoeffSet closed_form_coefficients(std::span<const double> feedback, const Lss& lss);

}  // namespace sidelobe
