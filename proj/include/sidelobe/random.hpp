#pragma once

#include <cstdint>
#include <random>

namespace sidelobe {

/// SplitMix64 finalizer; used to derive child seeds.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seeded generator that can be split into independent child streams.
///
/// A child depends only on the parent seed and the stream id, never on how
/// many values the parent has already produced, so work can be fanned out
/// (per split, per sequence, per feature block) without ordering effects.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(mix64(seed)) {}

  std::uint64_t seed() const noexcept { return seed_; }

  Rng split(std::uint64_t stream) const {
    return Rng(mix64(seed_ ^ mix64(stream + 0x632be59bd9b4e019ULL)));
  }

  /// Uniform in [0, 1).
  double uniform() { return unit_(engine_); }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [lo, hi] inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    return std::uniform_int_distribution<std::int64_t>(lo, hi)(engine_);
  }

  double normal() { return normal_(engine_); }

  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::uniform_real_distribution<double> unit_{0.0, 1.0};
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace sidelobe
