#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sidelobe/gmm.hpp"
#include "sidelobe/matrix.hpp"

namespace sidelobe {

enum class Status : std::uint8_t { Normal = 0, Fault = 1 };

constexpr char to_char(Status s) noexcept { return s == Status::Fault ? 'F' : 'N'; }

/// Four components spanning a plausible RSRP range, in dB.
GaussianMixture default_normal_mixture();

struct ScenarioConfig {
  std::size_t n_features = 9;
  std::size_t seq_len = 20;
  double fault_impact_db = 15.0;
  GaussianMixture normal_mixture = default_normal_mixture();
  std::size_t n_train = 144;
  std::size_t n_val = 48;
  std::size_t n_test = 48;

  /// Throws std::invalid_argument when a field is out of range.
  void validate() const;
};

/// One example: seq_len x n_features RSRP readings plus the fault label
/// stream. The fault, once applied, persists to the end of the sequence.
struct LabelledSequence {
  Matrix features;
  std::vector<Status> labels;
  /// 1-based instant at which the fault starts; empty for a fault-free
  /// sequence.
  std::optional<std::size_t> fault_onset;

  std::size_t length() const noexcept { return labels.size(); }
};

struct Dataset {
  std::vector<LabelledSequence> train;
  std::vector<LabelledSequence> val;
  std::vector<LabelledSequence> test;
};

/// Sequences of one split laid end to end. The network and both models run
/// over this stream with state carried across sequence boundaries, so
/// windows that straddle a boundary (e.g. FFN) occur exactly as they do in
/// the live label stream.
struct Stream {
  Matrix features;
  std::vector<Status> labels;
  std::vector<std::size_t> sequence_id;
};

/// Fault is a transmit power reduction: every component mean drops by
/// impact_db. Throws std::invalid_argument for negative impact.
GaussianMixture shift_mixture(const GaussianMixture& mix, double impact_db);

LabelledSequence generate_sequence(const ScenarioConfig& cfg, std::uint64_t seed);

/// Splits draw from disjoint child streams of `seed` (0 = train, 1 = val,
/// 2 = test), and each sequence from its own child of the split stream.
Dataset generate_dataset(const ScenarioConfig& cfg, std::uint64_t seed);

Stream concatenate(const std::vector<LabelledSequence>& sequences);

}  // namespace sidelobe
