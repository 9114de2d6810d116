#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sidelobe/gmm.hpp"
#include "sidelobe/linearizer.hpp"
#include "sidelobe/rnn.hpp"
#include "sidelobe/scenario.hpp"

namespace sidelobe {

// --- spatial averaging ---------------------------------------------------------

/// Per-channel single-Gaussian fits to the spatially averaged input under
/// normal operation and under fault.
struct D0Pair {
  Gaussian normal;
  Gaussian fault;

  const Gaussian& of(Status s) const noexcept { return s == Status::Fault ? fault : normal; }
};

struct SpatialAverage {
  D0Pair fitted;
  /// Exact averaged mixtures (one Gaussian per composition or component
  /// assignment); present when requested.
  std::optional<GaussianMixture> exact_normal;
  std::optional<GaussianMixture> exact_fault;
};

/// Draws `n_samples` instants of len(s_row) features from each mixture,
/// averages each instant with s_row and fits D0. Both statuses use the same
/// random stream (common random numbers), so when the fault mixture is a
/// translation of the normal one the two fits differ by that translation
/// only.
SpatialAverage spatial_average_dist(const GaussianMixture& normal_mix, const GaussianMixture& fault_mix,
                                    std::span<const double> s_row, std::size_t n_samples, std::uint64_t seed,
                                    bool with_exact = false);

/// U_k factored per channel as U_k[c, :] = gain[c] * averaging[c, :], with
/// gain[c] = sign(sum of row) * sum |row| so each averaging row has unit L1
/// norm and, for same-sign rows, sums to one.
struct StageFactor {
  std::vector<double> gain;
  Matrix averaging;
};
StageFactor factor_stage(const Matrix& input_map);

// --- fault status sequences --------------------------------------------------------

/// Statuses of the lagged inputs feeding one output instant, written oldest
/// first: "NNF" is N at n-2, N at n-1, F at n.
struct Fss {
  std::vector<Status> slots;

  std::size_t size() const noexcept { return slots.size(); }
  /// Status at lag j (j = 0 is the current instant).
  Status at_lag(std::size_t j) const { return slots.at(slots.size() - 1 - j); }
  Status current() const { return slots.back(); }
  std::size_t transitions() const noexcept;
  bool uniform() const noexcept { return transitions() == 0; }
  std::string str() const;
  static Fss parse(std::string_view s);

  auto operator<=>(const Fss&) const = default;
};

/// All 2^l sequences (binary order, N < F); with principal_only, the two
/// uniform ones plus every single-transition one (2 + 2(l-1) in total).
std::vector<Fss> enumerate_fss(std::size_t l, bool principal_only);

struct FssGrowth {
  std::size_t fss_length;
  std::size_t principal_sidelobes;

  bool operator==(const FssGrowth&) const = default;
};
/// k first-order layers: (2k+1, 4k).
FssGrowth multilayer_fss_growth(std::size_t n_layers);
/// One layer of order p: (2p+1, 4p).
FssGrowth order_fss_growth(std::size_t order);
/// General stack: length 1 + n_layers * 2 * order.
FssGrowth fss_growth(const RnnConfig& cfg);

/// Window counts over a label stream; the first l-1 instants are skipped.
std::map<Fss, std::size_t> count_fss(std::span<const Status> labels, std::size_t l);

// --- lobe algebra -----------------------------------------------------------------

/// Single-channel lobe: mean = u sum_j alpha_j E[D0^{s_j}] + beta,
/// variance = u^2 sum_j alpha_j^2 Var[D0^{s_j}], where s_j = fss.at_lag(j).
/// Throws std::invalid_argument on a length mismatch and std::domain_error
/// when every alpha is zero.
Gaussian lobe_params(const Fss& fss, const CoeffSet& coeffs, const D0Pair& d0, double gain);

/// (sum alpha) / sqrt(sum alpha^2): the factor by which temporal processing
/// scales the mean-to-sd ratio of the main lobes. Throws std::domain_error
/// for an all-zero vector.
double separation_ratio(std::span<const double> alphas);

/// Full convolution of two lag kernels (the chain of two layers).
std::vector<double> compose_kernels(std::span<const double> outer, std::span<const double> inner);

/// Value of a modelled quantity at one instant as a linear function of the
/// spatially averaged inputs:  sum_m sum_c kernel(m, c) d0_c(n - m) + offset.
struct LinearContext {
  Matrix kernel;  ///< lags x first-layer channels
  double offset = 0.0;
  /// First-layer segment index per (lag, channel), row-major; filled only
  /// when the input model is segment-conditioned.
  std::vector<int> first_layer_segments;

  auto key() const -> std::vector<double>;
};

/// Mean and variance of one lobe; variance may be zero when every slot of
/// the context is saturated (a point mass).
struct LobeMoments {
  double mean = 0.0;
  double variance = 0.0;

  double sd() const noexcept;
  /// P(X > threshold); a point mass at the threshold counts as not above.
  double upper_tail(double threshold) const noexcept;
};

/// Empirical first-layer averages grouped by status and by the tuple of
/// first-layer segments active at the same instant.
struct SegmentConditioned {
  struct Cell {
    std::vector<double> mean;
    Matrix covariance;
    std::size_t count = 0;
  };
  std::map<std::pair<Status, std::vector<int>>, Cell> cells;
  /// Cells with fewer samples fall back to the marginal statistics.
  std::size_t min_count = 10;

  const Cell* find(Status s, const std::vector<int>& segments) const;
};

/// First-layer statistics needed to evaluate any LinearContext.
struct InputModel {
  std::vector<D0Pair> channels;
  /// Correlation between channels within one instant.
  Matrix correlation;
  std::optional<SegmentConditioned> conditioned;

  double mean(Status s, std::size_t c) const { return channels.at(c).of(s).mean(); }
  double covariance(Status s, std::size_t a, std::size_t b) const;
};

LobeMoments lobe_moments(const Fss& fss, const LinearContext& ctx, const InputModel& input);

// --- the two models ---------------------------------------------------------------

/// Sample-level linearized model run in parallel with the network over one
/// stream. Segment choices come from the network's own pre-activations.
struct MainModelRun {
  Trace rnn;
  std::vector<StageFactor> factors;  ///< per layer
  Matrix d0;                         ///< first-layer spatial averages, T x width_1
  std::vector<Matrix> output;        ///< d_k(n) per layer
  std::vector<double> score;         ///< readout applied to d_last
  std::vector<LssTable> lss;         ///< per layer
  /// Per layer, per channel, per instant expansion coefficients.
  std::vector<std::vector<std::vector<CoeffSet>>> coeffs;
  std::size_t warmup = 0;  ///< leading instants excluded from statistics
};

/// Throws std::invalid_argument if any feedback matrix is not diagonal.
MainModelRun run_main_model(const RnnWeights& weights, const PwlApprox& pwl, const RnnConfig& cfg,
                            const Matrix& features);

/// Which quantity a detailed model describes.
struct ModelTarget {
  enum class Kind { Channel, Readout } kind = Kind::Readout;
  std::size_t layer = 0;
  std::size_t channel = 0;

  static ModelTarget readout() { return {}; }
  static ModelTarget channel_of(std::size_t layer, std::size_t c) { return {Kind::Channel, layer, c}; }
  std::string str() const;
};

/// Linear context of `target` at instant n of a main-model run.
LinearContext linear_context(const MainModelRun& run, const RnnWeights& weights, const RnnConfig& cfg,
                             const ModelTarget& target, std::size_t n);

enum class LobeKind { Main, PrincipalSide, Neglected };
std::string to_string(LobeKind k);

struct LobeComponent {
  Fss fss;
  std::size_t context = 0;  ///< index into DetailedDistribution::contexts
  LobeMoments moments;
  double weight = 0.0;
  LobeKind kind = LobeKind::Main;
};

/// One row per fault status sequence (the combined component over every
/// context).
struct FssSummary {
  Fss fss;
  LobeKind kind = LobeKind::Main;
  double weight = 0.0;          ///< sum of its components' weights
  double rel_freq = 0.0;        ///< window frequency in the label stream
  std::size_t count = 0;        ///< window count
  double mean = 0.0;            ///< mean of the combined component
  double sd = 0.0;              ///< pooled within-lobe sd (variance formula only)
  double mixture_sd = 0.0;      ///< sd of the combined component
};

/// How (FSS, context) pairs are weighted.
enum class ContextWeighting {
  /// relfreq(FSS) * relfreq(context), both marginal.
  Product,
  /// relfreq(FSS) * relfreq(context | FSS), i.e. the joint frequency.
  Conditional,
};
std::string to_string(ContextWeighting w);
ContextWeighting parse_context_weighting(std::string_view s);

struct DetailedDistribution {
  ModelTarget target;
  std::size_t fss_length = 0;
  ContextWeighting weighting = ContextWeighting::Product;
  std::vector<LinearContext> contexts;
  std::vector<double> context_freq;  ///< marginal
  std::vector<LobeComponent> components;
  std::vector<FssSummary> per_fss;
  /// Joint vs product diagnostic: sum over pairs of |joint - product|.
  double independence_gap = 0.0;

  /// Components whose current slot has status s (optionally principal only).
  std::vector<LobeComponent> status_components(Status s, bool principal_only = false) const;
  /// Total weight of neglected (multi-transition) components.
  double neglected_mass() const;
  const FssSummary* find(std::string_view fss) const;
};

/// Builds the lobe decomposition of `target` over the non-warm-up instants
/// of a main-model run. Throws std::invalid_argument when no instant
/// survives warm-up exclusion.
DetailedDistribution compose_detailed(const MainModelRun& run, const RnnWeights& weights, const RnnConfig& cfg,
                                      std::span<const Status> labels, const InputModel& input,
                                      const ModelTarget& target, ContextWeighting weighting);

/// Input model for a network: D0 per first-layer channel from the scaled
/// normal/fault mixtures and the channel correlation implied by the
/// averaging rows.
InputModel build_input_model(const RnnWeights& weights, const GaussianMixture& normal_mix,
                             const GaussianMixture& fault_mix, std::size_t n_samples, std::uint64_t seed);

/// Segment-conditioned statistics from the non-warm-up instants of a run.
SegmentConditioned condition_on_segments(const MainModelRun& run, std::span<const Status> labels,
                                         std::size_t min_count = 10);

}  // namespace sidelobe
