#include "sidelobe/scenario.hpp"

#include <stdexcept>

namespace sidelobe {

GaussianMixture default_normal_mixture() {
  return GaussianMixture({
      {0.20, Gaussian(-75.0, 6.0)},
      {0.30, Gaussian(-90.0, 5.0)},
      {0.30, Gaussian(-105.0, 5.0)},
      {0.20, Gaussian(-120.0, 6.0)},
  });
}

void ScenarioConfig::validate() const {
  if (n_features < 1) throw std::invalid_argument("scenario: n_features must be >= 1");
  if (seq_len < 3) throw std::invalid_argument("scenario: seq_len must be >= 3");
  if (!(fault_impact_db >= 0.0)) throw std::invalid_argument("scenario: fault impact must be >= 0");
}

GaussianMixture shift_mixture(const GaussianMixture& mix, double impact_db) {
  if (!(impact_db >= 0.0)) throw std::invalid_argument("shift_mixture: impact must be >= 0");
  if (impact_db == 0.0) return mix;
  return mix.shifted(-impact_db);
}

LabelledSequence generate_sequence(const ScenarioConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  const auto fault_mix = shift_mixture(cfg.normal_mixture, cfg.fault_impact_db);

  LabelledSequence seq;
  seq.features = Matrix(cfg.seq_len, cfg.n_features);
  seq.labels.assign(cfg.seq_len, Status::Normal);

  // Onset uniform over {1..seq_len+1}; seq_len+1 leaves the sequence fault free.
  const auto onset = static_cast<std::size_t>(rng.uniform_int(1, static_cast<std::int64_t>(cfg.seq_len) + 1));
  if (onset <= cfg.seq_len) seq.fault_onset = onset;

  for (std::size_t t = 0; t < cfg.seq_len; ++t) {
    const bool faulty = seq.fault_onset && t + 1 >= *seq.fault_onset;
    seq.labels[t] = faulty ? Status::Fault : Status::Normal;
    const auto& mix = faulty ? fault_mix : cfg.normal_mixture;
    for (std::size_t f = 0; f < cfg.n_features; ++f) seq.features(t, f) = draw(mix, rng);
  }
  return seq;
}

namespace {

std::vector<LabelledSequence> generate_split(const ScenarioConfig& cfg, const Rng& split_rng,
                                             std::size_t count) {
  std::vector<LabelledSequence> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(generate_sequence(cfg, split_rng.split(i).seed()));
  return out;
}

}  // namespace

Dataset generate_dataset(const ScenarioConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const Rng root(seed);
  Dataset ds;
  ds.train = generate_split(cfg, root.split(0), cfg.n_train);
  ds.val = generate_split(cfg, root.split(1), cfg.n_val);
  ds.test = generate_split(cfg, root.split(2), cfg.n_test);
  return ds;
}

Stream concatenate(const std::vector<LabelledSequence>& sequences) {
  Stream s;
  if (sequences.empty()) return s;
  const std::size_t width = sequences.front().features.cols();
  std::size_t total = 0;
  for (const auto& seq : sequences) {
    if (seq.features.cols() != width) throw std::invalid_argument("concatenate: feature width mismatch");
    total += seq.length();
  }
  s.features = Matrix(total, width);
  s.labels.reserve(total);
  s.sequence_id.reserve(total);
  std::size_t row = 0;
  for (std::size_t i = 0; i < sequences.size(); ++i) {
    const auto& seq = sequences[i];
    for (std::size_t t = 0; t < seq.length(); ++t, ++row) {
      for (std::size_t f = 0; f < width; ++f) s.features(row, f) = seq.features(t, f);
      s.labels.push_back(seq.labels[t]);
      s.sequence_id.push_back(i);
    }
  }
  return s;
}

}  // namespace sidelobe
