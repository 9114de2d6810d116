#pragma once

#include <span>
#include <string>
#include <vector>

#include "sidelobe/distmodel.hpp"
#include "sidelobe/eval.hpp"

namespace sidelobe {

struct RocSeries {
  std::string label;
  RocCurve curve;
};

/// ROC overlay on the unit square with the chance diagonal.
std::string roc_svg(std::span<const RocSeries> series, const std::string& title);

/// Histogram of `samples` with the detailed model's per-status densities
/// drawn on top. Normal lobe mass beyond the threshold (FP) and fault lobe
/// mass short of it (FN) are shaded.
std::string lobe_svg(std::span<const double> samples, const DetailedDistribution& dd, double threshold,
                     double polarity, std::size_t bins, const std::string& title);

}  // namespace sidelobe
