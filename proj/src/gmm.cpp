#include "sidelobe/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>

namespace sidelobe {

Gaussian::Gaussian(double mean, double sd) : mean_(mean), sd_(sd) {
  if (!std::isfinite(mean) || !std::isfinite(sd) || !(sd > 0.0)) {
    throw std::invalid_argument("Gaussian: sd must be finite and > 0, got " + std::to_string(sd));
  }
}

Gaussian Gaussian::from_variance(double mean, double variance) {
  if (!(variance > 0.0)) throw std::domain_error("Gaussian: variance must be > 0");
  return Gaussian(mean, std::sqrt(variance));
}

double Gaussian::pdf(double x) const noexcept {
  const double z = (x - mean_) / sd_;
  return std::exp(-0.5 * z * z) / (sd_ * std::sqrt(2.0 * std::numbers::pi));
}

double normal_cdf(double z) noexcept { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double Gaussian::cdf(double x) const noexcept { return normal_cdf((x - mean_) / sd_); }

double Gaussian::upper_tail(double x) const noexcept {
  return 0.5 * std::erfc((x - mean_) / (sd_ * std::numbers::sqrt2));
}

// --- mixture ----------------------------------------------------------------

GaussianMixture::GaussianMixture(std::vector<MixtureComponent> components)
    : components_(std::move(components)) {
  if (components_.empty()) throw std::invalid_argument("GaussianMixture: no components");
  double total = 0.0;
  for (const auto& c : components_) {
    if (!(c.weight > 0.0) || c.weight > 1.0 + 1e-12) {
      throw std::invalid_argument("GaussianMixture: weights must lie in (0, 1]");
    }
    total += c.weight;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw std::invalid_argument("GaussianMixture: weights sum to " + std::to_string(total));
  }
}

GaussianMixture GaussianMixture::normalized(std::vector<MixtureComponent> components) {
  std::erase_if(components, [](const MixtureComponent& c) { return c.weight <= 0.0; });
  double total = 0.0;
  for (const auto& c : components) total += c.weight;
  if (!(total > 0.0)) throw std::invalid_argument("GaussianMixture: no positive weight");
  for (auto& c : components) c.weight /= total;
  return GaussianMixture(std::move(components));
}

double GaussianMixture::mean() const noexcept {
  double m = 0.0;
  for (const auto& c : components_) m += c.weight * c.gaussian.mean();
  return m;
}

double GaussianMixture::variance() const noexcept {
  const double m = mean();
  double v = 0.0;
  for (const auto& c : components_) {
    const double d = c.gaussian.mean() - m;
    v += c.weight * (c.gaussian.variance() + d * d);
  }
  return v;
}

double GaussianMixture::pdf(double x) const noexcept {
  double p = 0.0;
  for (const auto& c : components_) p += c.weight * c.gaussian.pdf(x);
  return p;
}

double GaussianMixture::cdf(double x) const noexcept {
  double p = 0.0;
  for (const auto& c : components_) p += c.weight * c.gaussian.cdf(x);
  return p;
}

GaussianMixture GaussianMixture::shifted(double delta) const {
  auto out = components_;
  for (auto& c : out) c.gaussian = Gaussian(c.gaussian.mean() + delta, c.gaussian.sd());
  return GaussianMixture(std::move(out));
}

GaussianMixture GaussianMixture::standardized(double offset, double scale) const {
  if (!(scale > 0.0)) throw std::invalid_argument("standardized: scale must be > 0");
  auto out = components_;
  for (auto& c : out) {
    c.gaussian = Gaussian((c.gaussian.mean() - offset) / scale, c.gaussian.sd() / scale);
  }
  return GaussianMixture(std::move(out));
}

double mixture_pdf(double x, const GaussianMixture& mix) noexcept { return mix.pdf(x); }

double draw(const GaussianMixture& mix, Rng& rng) {
  const auto& comps = mix.components();
  const double u = rng.uniform();
  double acc = 0.0;
  std::size_t k = comps.size() - 1;
  for (std::size_t i = 0; i < comps.size(); ++i) {
    acc += comps[i].weight;
    if (u < acc) {
      k = i;
      break;
    }
  }
  const auto& g = comps[k].gaussian;
  return g.mean() + g.sd() * rng.normal();
}

std::vector<double> sample_mixture(const GaussianMixture& mix, std::size_t n, Rng& rng) {
  std::vector<double> out(n);
  for (auto& x : out) x = draw(mix, rng);
  return out;
}

std::vector<double> sample_mixture(const GaussianMixture& mix, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  return sample_mixture(mix, n, rng);
}

Gaussian linear_combine(std::span<const WeightedGaussian> terms) {
  if (terms.empty()) throw std::invalid_argument("linear_combine: no terms");
  double mean = 0.0;
  double var = 0.0;
  for (const auto& t : terms) {
    mean += t.weight * t.gaussian.mean();
    var += t.weight * t.weight * t.gaussian.variance();
  }
  if (!(var > 0.0)) throw std::domain_error("linear_combine: all weights are zero");
  return Gaussian::from_variance(mean, var);
}

Gaussian fit_single_gaussian(std::span<const double> samples) {
  if (samples.size() < 2) throw std::invalid_argument("fit_single_gaussian: need >= 2 samples");
  const double n = static_cast<double>(samples.size());
  const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : samples) ss += (x - mean) * (x - mean);
  const double var = ss / (n - 1.0);
  if (!(var > 0.0)) throw std::domain_error("fit_single_gaussian: zero variance");
  return Gaussian(mean, std::sqrt(var));
}

// --- compositions -------------------------------------------------------------

int Composition::total() const noexcept { return std::accumulate(counts.begin(), counts.end(), 0); }

double composition_pmf(int m, std::span<const double> weights, const Composition& q) {
  if (q.counts.size() != weights.size()) {
    throw std::invalid_argument("composition_pmf: length mismatch");
  }
  if (std::any_of(q.counts.begin(), q.counts.end(), [](int c) { return c < 0; }) ||
      q.total() != m) {
    throw std::invalid_argument("composition_pmf: counts must be >= 0 and sum to m");
  }
  // log-space keeps large m well conditioned
  double log_p = std::lgamma(m + 1.0);
  for (std::size_t k = 0; k < weights.size(); ++k) {
    const int c = q.counts[k];
    log_p -= std::lgamma(c + 1.0);
    if (c > 0) {
      if (weights[k] <= 0.0) return 0.0;
      log_p += c * std::log(weights[k]);
    }
  }
  return std::exp(log_p);
}

namespace {

void compositions_rec(int remaining, int slot, Composition& cur, std::vector<Composition>& out) {
  const int k = static_cast<int>(cur.counts.size());
  if (slot == k - 1) {
    cur.counts[slot] = remaining;
    out.push_back(cur);
    return;
  }
  for (int c = remaining; c >= 0; --c) {
    cur.counts[slot] = c;
    compositions_rec(remaining - c, slot + 1, cur, out);
  }
}

}  // namespace

std::vector<Composition> enumerate_compositions(int m, int k) {
  if (m < 0 || k < 1) throw std::invalid_argument("enumerate_compositions: bad arguments");
  std::vector<Composition> out;
  Composition cur{std::vector<int>(k, 0)};
  compositions_rec(m, 0, cur, out);
  std::sort(out.begin(), out.end());
  return out;
}

GaussianMixture averaged_mixture(const GaussianMixture& mix, std::span<const double> s_row) {
  const auto& comps = mix.components();
  const int m = static_cast<int>(s_row.size());
  const int k = static_cast<int>(comps.size());
  if (m < 1) throw std::invalid_argument("averaged_mixture: empty weight row");

  const bool uniform =
      std::all_of(s_row.begin(), s_row.end(), [&](double s) { return s == s_row[0]; });
  std::vector<MixtureComponent> out;
  if (uniform) {
    const double s = s_row[0];
    std::vector<double> w(k);
    for (int i = 0; i < k; ++i) w[i] = comps[i].weight;
    for (const auto& q : enumerate_compositions(m, k)) {
      double mean = 0.0;
      double var = 0.0;
      for (int i = 0; i < k; ++i) {
        mean += s * q.counts[i] * comps[i].gaussian.mean();
        var += s * s * q.counts[i] * comps[i].gaussian.variance();
      }
      out.push_back({composition_pmf(m, w, q), Gaussian::from_variance(mean, var)});
    }
    return GaussianMixture::normalized(std::move(out));
  }

  if (m * std::log2(std::max(k, 2)) > 22.0) {
    throw std::invalid_argument("averaged_mixture: assignment enumeration too large");
  }
  std::vector<int> assign(m, 0);
  while (true) {
    double weight = 1.0, mean = 0.0, var = 0.0;
    for (int f = 0; f < m; ++f) {
      const auto& c = comps[assign[f]];
      weight *= c.weight;
      mean += s_row[f] * c.gaussian.mean();
      var += s_row[f] * s_row[f] * c.gaussian.variance();
    }
    out.push_back({weight, Gaussian::from_variance(mean, var)});
    int f = 0;
    while (f < m && ++assign[f] == k) assign[f++] = 0;
    if (f == m) break;
  }
  return GaussianMixture::normalized(std::move(out));
}

}  // namespace sidelobe
