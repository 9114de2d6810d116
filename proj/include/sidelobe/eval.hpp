#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "sidelobe/distmodel.hpp"
#include "sidelobe/scenario.hpp"

namespace sidelobe {

/// Fault is the positive class.
struct Confusion {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::size_t total() const noexcept { return tp + fp + tn + fn; }
  double accuracy() const noexcept;
  double tpr() const noexcept;
  double fpr() const noexcept;
};

/// Predicts fault iff polarity * (score - threshold) > 0. Throws
/// std::invalid_argument on empty or unequal inputs.
Confusion confusion(std::span<const double> scores, std::span<const Status> labels, double threshold,
                    double polarity = 1.0);

struct RocPoint {
  double threshold;
  double fpr;
  double tpr;
};

struct RocCurve {
  std::vector<RocPoint> points;  ///< from (0, 0) to (1, 1)
  double auc = 0.0;
};

/// Sweeps every unique score plus +/-inf; larger scores mean fault.
/// Trapezoidal area. Throws std::invalid_argument unless both classes occur.
RocCurve roc(std::span<const double> scores, std::span<const Status> labels);

/// Best accuracy over the ROC thresholds.
double best_accuracy(std::span<const double> scores, std::span<const Status> labels);

/// Sum over shared bins of |p_a - p_b|, bins spanning the joint range.
/// Throws std::invalid_argument on empty input.
double histogram_l1(std::span<const double> a, std::span<const double> b, std::size_t bins = 64);

/// Same distance between the histogram of `samples` and a weighted set of
/// lobes, on bins spanning the sample range. Lobe mass outside the range
/// counts toward the distance.
double histogram_l1(std::span<const double> samples, std::span<const LobeComponent> lobes, std::size_t bins = 64);

struct TraceError {
  double rmse = 0.0;
  double reference_rms = 0.0;

  double relative() const noexcept { return reference_rms > 0.0 ? rmse / reference_rms : 0.0; }
};

/// Column-wise comparison of two equally shaped traces over rows >= from.
std::vector<TraceError> trace_error(const Matrix& model, const Matrix& reference, std::size_t from = 0);

// --- lobe error attribution --------------------------------------------------------

struct LobeError {
  Fss fss;
  std::size_t context = 0;
  LobeKind kind = LobeKind::Main;
  double weight = 0.0;
  /// Predicted error mass: weight times the lobe's probability of falling on
  /// the wrong side of the threshold. Fault-current lobes give FN mass,
  /// normal-current lobes FP mass.
  double mass = 0.0;
};

struct ErrorSplit {
  double fp = 0.0;
  double fn = 0.0;

  double total() const noexcept { return fp + fn; }
};

struct ErrorDecomposition {
  double threshold = 0.0;
  double polarity = 1.0;
  std::vector<LobeError> lobes;
  ErrorSplit main, principal_side, neglected;
  /// Error of the per-status mixtures, computed from the normalized
  /// mixtures and their status probabilities.
  double mixture_error = 0.0;

  double side_total() const noexcept { return principal_side.total() + neglected.total(); }
  double lobe_total() const noexcept;
};

ErrorDecomposition decompose_errors(const DetailedDistribution& dd, double threshold, double polarity = 1.0);

/// Per-FSS error mass (sum over its contexts), in enumeration order.
std::vector<std::pair<Fss, double>> error_by_fss(const ErrorDecomposition& d);

}  // namespace sidelobe
