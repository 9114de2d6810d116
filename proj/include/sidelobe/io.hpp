#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "sidelobe/pipeline.hpp"

namespace sidelobe {

using json = nlohmann::json;

/// {"components": [{"w": .., "mean": .., "sd": ..}, ...]}
json mixture_to_json(const GaussianMixture& mix);
GaussianMixture mixture_from_json(const json& j);

/// Missing keys take their defaults; unknown keys and out-of-range values
/// throw std::invalid_argument.
json config_to_json(const ExperimentConfig& cfg);
ExperimentConfig config_from_json(const json& j);

/// 16 hex digits of FNV-1a over the canonical config dump.
std::string config_hash(const ExperimentConfig& cfg);

// --- checkpoints ------------------------------------------------------------------

struct Checkpoint {
  RnnConfig config;
  RnnWeights weights;
  std::vector<double> train_loss;
  std::vector<double> val_loss;
};

/// Shapes plus row-major values, the network config and the loss history.
json checkpoint_to_json(const RnnConfig& cfg, const TrainResult& result);
Checkpoint checkpoint_from_json(const json& j);

// --- datasets ---------------------------------------------------------------------

/// One row per instant: seq_id, t, label, f1..fm. Sequences are numbered
/// across splits in train, val, test order; t is 1-based.
void write_dataset_csv(std::ostream& os, const Dataset& ds);
/// Parses the CSV back into sequences (labels and features only).
std::vector<LabelledSequence> read_dataset_csv(std::istream& is);
json dataset_sidecar(const ScenarioConfig& cfg, std::uint64_t seed, const Dataset& ds);

// --- tables -----------------------------------------------------------------------

/// bin_left, bin_right, count over `bins` equal bins spanning the samples.
void write_histogram_csv(std::ostream& os, std::span<const double> samples, std::size_t bins);

/// case, mean, sd, rel_freq, count; every principal sequence and every
/// observed one, then a Total row.
void write_lobe_table_csv(std::ostream& os, const DetailedDistribution& dd);

/// segment, left, right, gradient, intercept; outer bounds are +/-inf.
void write_pwl_csv(std::ostream& os, const PwlApprox& pwl);

/// Distinct segment sequences of one layer with their expansion
/// coefficients: channel, lss, count, alpha_0..alpha_2p, beta, dropped_bound.
void write_coefficient_csv(std::ostream& os, const MainModelRun& run, std::size_t layer);

/// {"layer": k, "order": p, "channels": [{"counted": n, "frequencies": {"i0,i1,i2": f}}]}
json lss_to_json(const LssTable& table);

/// Per-status mixtures of a detailed model.
json mixtures_to_json(const DetailedDistribution& dd);

json metrics_to_json(const FidelityMetrics& m);
json checks_to_json(std::span<const Check> checks);

void write_error_csv(std::ostream& os, const ErrorDecomposition& d);
void write_roc_csv(std::ostream& os, const RocCurve& curve);
void write_study_csv(std::ostream& os, const StudyReport& r);
json study_to_json(const StudyReport& r);

}  // namespace sidelobe
