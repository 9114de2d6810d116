#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sidelobe/distmodel.hpp"
#include "sidelobe/eval.hpp"
#include "sidelobe/linearizer.hpp"
#include "sidelobe/rnn.hpp"
#include "sidelobe/scenario.hpp"

namespace sidelobe {

/// Bounds checked by `compare`.
struct Tolerances {
  double auc_gap = 0.03;
  double hist_l1 = 0.15;
  double trace_rmse = 0.05;  ///< relative to the network's state RMS
  double error_rel = 0.20;   ///< predicted vs empirical error rate
  double agreement = 0.97;   ///< fraction of instants classified alike

  bool operator==(const Tolerances&) const = default;
};

/// Everything that determines one run. Two runs with equal configs produce
/// bitwise-identical artifacts.
struct ExperimentConfig {
  ScenarioConfig scenario;
  std::size_t n_layers = 1;
  std::size_t order = 1;
  std::size_t width = 2;
  TrainHyper hyper{.input_clip = 0.05};
  std::size_t pwl_segments = 8;
  double pwl_span = 1.75;
  std::size_t d0_samples = 100000;
  ContextWeighting weighting = ContextWeighting::Conditional;
  /// Replace the marginal D0 by per-segment empirical statistics.
  bool segment_conditioned = false;
  double threshold = 0.0;
  std::size_t hist_bins = 64;
  std::uint64_t seed = 1;
  Tolerances tolerances;

  RnnConfig rnn() const;
  std::string name() const { return rnn().name(); }
  /// Throws std::invalid_argument on an inconsistent config.
  void validate() const;
};

/// Network plus both models over the full label stream (every split laid
/// end to end).
struct ModelRun {
  ExperimentConfig config;
  RnnConfig rnn;
  Dataset dataset;
  Stream stream;
  TrainResult training;
  PwlApprox pwl;
  MainModelRun main;
  InputModel input;
  /// The detailed model of the readout under the configured weighting.
  DetailedDistribution detailed;
  /// The readout lobes under product weighting with the marginal D0
  /// (equal within-lobe sd in every row).
  DetailedDistribution table;
};

/// Trains on the configured dataset (or uses `weights` when given) and builds
/// both models.
ModelRun build_models(const ExperimentConfig& cfg, const RnnWeights* weights = nullptr);

struct FidelityMetrics {
  std::size_t instants = 0;  ///< compared instants (after warm-up)
  double auc_rnn = 0.0;
  double auc_model = 0.0;
  double best_accuracy_rnn = 0.0;
  double best_accuracy_model = 0.0;
  double hist_l1_model = 0.0;     ///< RNN vs main-model score histograms
  double hist_l1_detailed = 0.0;  ///< RNN scores vs detailed mixture
  /// Per status: RNN scores at instants of that status vs the normalized
  /// mixture of lobes whose current slot has it. Normal first.
  double hist_l1_status[2] = {0.0, 0.0};
  /// Per layer, per channel.
  std::vector<std::vector<TraceError>> traces;
  double agreement = 0.0;
  double rnn_error = 0.0;      ///< empirical error rate at the threshold
  double model_error = 0.0;    ///< main model, same threshold
  double predicted_error = 0.0;
  ErrorDecomposition errors;

  double max_trace_error() const;
};

/// Scores oriented so that larger means fault.
std::vector<double> oriented(std::span<const double> scores, double polarity, std::size_t from = 0);

FidelityMetrics evaluate(const ModelRun& run);

struct Check {
  std::string name;
  double value;
  double bound;
  bool upper;  ///< value must be <= bound (else >=)

  bool passed() const noexcept { return upper ? value <= bound : value >= bound; }
};

/// Tolerance checks on a run's metrics.
std::vector<Check> fidelity_checks(const FidelityMetrics& m, const Tolerances& tol);

// --- depth / order study ------------------------------------------------------------

struct StudyRow {
  std::string config;
  std::uint64_t seed = 0;
  double auc = 0.0;
  double best_accuracy = 0.0;
  double empirical_error = 0.0;
  double predicted_error = 0.0;
  double main_error = 0.0;
  double side_error = 0.0;  ///< principal plus neglected sidelobes
  /// Same split under product weighting.
  double product_main_error = 0.0;
  double product_side_error = 0.0;
  double product_predicted_error = 0.0;
  std::size_t principal_sidelobes = 0;
  double separation = 0.0;  ///< separation ratio of the dominant unsaturated context's lag profile
};

struct StudySummary {
  std::string config;
  std::size_t runs = 0;
  double auc = 0.0;
  double best_accuracy = 0.0;
  double empirical_error = 0.0;
  double predicted_error = 0.0;
  double main_error = 0.0;
  double side_error = 0.0;
  double product_side_error = 0.0;
  std::size_t principal_sidelobes = 0;
  double separation = 0.0;
};

struct StudyReport {
  std::vector<StudyRow> rows;            ///< config-major, then seed
  std::vector<StudySummary> summaries;   ///< means over seeds, config order
  /// auc_gain[i] = mean AUC(config i+1) - mean AUC(config i).
  std::vector<double> auc_gain;
};

StudyRow study_row(const ModelRun& run, const FidelityMetrics& m);

/// Trains and evaluates every (config, seed) pair on the dataset of that
/// seed. Configs are given as "<layers>L<order>". Throws
/// std::invalid_argument for fewer than two configs.
StudyReport diminishing_returns_report(const ExperimentConfig& base, std::span<const std::string> configs,
                                       std::span<const std::uint64_t> seeds);

}  // namespace sidelobe
