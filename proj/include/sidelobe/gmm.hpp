#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sidelobe/random.hpp"

namespace sidelobe {

/// One-dimensional normal distribution. sd is strictly positive.
class Gaussian {
 public:
  Gaussian(double mean, double sd);

  static Gaussian from_variance(double mean, double variance);

  double mean() const noexcept { return mean_; }
  double sd() const noexcept { return sd_; }
  double variance() const noexcept { return sd_ * sd_; }

  double pdf(double x) const noexcept;
  double cdf(double x) const noexcept;
  /// P(X > x), computed without cancellation in the upper tail.
  double upper_tail(double x) const noexcept;

  bool operator==(const Gaussian&) const = default;

 private:
  double mean_;
  double sd_;
};

/// Standard normal cdf.
double normal_cdf(double z) noexcept;

struct MixtureComponent {
  double weight;
  Gaussian gaussian;

  bool operator==(const MixtureComponent&) const = default;
};

/// Weighted sum of Gaussians. Weights lie in (0, 1] and sum to one within
/// 1e-9.
class GaussianMixture {
 public:
  explicit GaussianMixture(std::vector<MixtureComponent> components);

  /// Builds a mixture whose weights are renormalized to sum to one; zero
  /// weight components are dropped.
  static GaussianMixture normalized(std::vector<MixtureComponent> components);

  const std::vector<MixtureComponent>& components() const noexcept { return components_; }
  std::size_t size() const noexcept { return components_.size(); }

  double mean() const noexcept;
  double variance() const noexcept;
  double pdf(double x) const noexcept;
  double cdf(double x) const noexcept;

  /// Component means moved by `delta`, everything else kept.
  GaussianMixture shifted(double delta) const;
  /// Distribution of (x - offset) / scale.
  GaussianMixture standardized(double offset, double scale) const;

  bool operator==(const GaussianMixture&) const = default;

 private:
  std::vector<MixtureComponent> components_;
};

double mixture_pdf(double x, const GaussianMixture& mix) noexcept;

std::vector<double> sample_mixture(const GaussianMixture& mix, std::size_t n, std::uint64_t seed);
std::vector<double> sample_mixture(const GaussianMixture& mix, std::size_t n, Rng& rng);
double draw(const GaussianMixture& mix, Rng& rng);

struct WeightedGaussian {
  double weight;
  Gaussian gaussian;
};

/// Distribution of sum_i s_i X_i for independent Gaussian X_i.
/// Throws std::domain_error if every weight is zero.
Gaussian linear_combine(std::span<const WeightedGaussian> terms);

/// Method-of-moments fit using the n-1 sample standard deviation.
/// Throws std::invalid_argument on fewer than two samples and
/// std::domain_error on zero variance.
Gaussian fit_single_gaussian(std::span<const double> samples);

// --- multinomial composition ---------------------------------------------

/// Counts of how many of m draws landed in each of K mixture components.
struct Composition {
  std::vector<int> counts;

  int total() const noexcept;
  bool operator==(const Composition&) const = default;
  auto operator<=>(const Composition&) const = default;
};

/// Multinomial probability (m! / prod q_k!) prod w_k^q_k.
/// Throws std::invalid_argument if q does not sum to m or lengths differ.
double composition_pmf(int m, std::span<const double> weights, const Composition& q);

/// Every composition of m into K non-negative parts, lexicographic order.
std::vector<Composition> enumerate_compositions(int m, int k);

/// Exact distribution of sum_f s_f x_f where each x_f is an independent draw
/// from `mix`. With uniform weights this groups draws by composition and
/// weights each resulting Gaussian by composition_pmf; otherwise every
/// component assignment is enumerated (K^m terms, m*log2(K) <= 22 enforced).
GaussianMixture averaged_mixture(const GaussianMixture& mix, std::span<const double> s_row);

}  // namespace sidelobe
