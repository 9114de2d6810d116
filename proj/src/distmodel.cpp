#include "sidelobe/distmodel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace sidelobe {

SpatialAverage spatial_average_dist(const GaussianMixture& normal_mix, const GaussianMixture& fault_mix,
                                    std::span<const double> s_row, std::size_t n_samples, std::uint64_t seed,
                                    bool with_exact) {
  if (s_row.empty()) throw std::invalid_argument("spatial_average_dist: empty averaging row");
  auto averaged = [&](const GaussianMixture& mix) {
    Rng rng(seed);
    std::vector<double> out(n_samples);
    for (auto& d : out) {
      double acc = 0.0;
      for (double s : s_row) acc += s * draw(mix, rng);
      d = acc;
    }
    return out;
  };
  const auto normal = averaged(normal_mix);
  const auto fault = averaged(fault_mix);
  SpatialAverage out{{fit_single_gaussian(normal), fit_single_gaussian(fault)}, std::nullopt, std::nullopt};
  if (with_exact) {
    out.exact_normal = averaged_mixture(normal_mix, s_row);
    out.exact_fault = averaged_mixture(fault_mix, s_row);
  }
  return out;
}

StageFactor factor_stage(const Matrix& input_map) {
  StageFactor f;
  f.averaging = Matrix(input_map.rows(), input_map.cols());
  for (std::size_t c = 0; c < input_map.rows(); ++c) {
    const auto row = input_map.row(c);
    const double sum = std::accumulate(row.begin(), row.end(), 0.0);
    double abs_sum = 0.0;
    for (double v : row) abs_sum += std::abs(v);
    if (abs_sum == 0.0) {
      f.gain.push_back(0.0);
      for (std::size_t i = 0; i < row.size(); ++i) f.averaging(c, i) = 1.0 / static_cast<double>(row.size());
      continue;
    }
    const double gain = sum >= 0.0 ? abs_sum : -abs_sum;
    f.gain.push_back(gain);
    for (std::size_t i = 0; i < row.size(); ++i) f.averaging(c, i) = row[i] / gain;
  }
  return f;
}

// --- FSS ----------------------------------------------------------------------------

std::size_t Fss::transitions() const noexcept {
  std::size_t t = 0;
  for (std::size_t i = 1; i < slots.size(); ++i) t += slots[i] != slots[i - 1];
  return t;
}

std::string Fss::str() const {
  std::string s;
  for (auto st : slots) s.push_back(to_char(st));
  return s;
}

Fss Fss::parse(std::string_view s) {
  Fss f;
  for (char ch : s) {
    if (ch == 'N') f.slots.push_back(Status::Normal);
    else if (ch == 'F') f.slots.push_back(Status::Fault);
    else throw std::invalid_argument("Fss::parse: expected only N and F");
  }
  return f;
}

std::vector<Fss> enumerate_fss(std::size_t l, bool principal_only) {
  if (l < 1 || l > 20) throw std::invalid_argument("enumerate_fss: length must be in [1, 20]");
  std::vector<Fss> out;
  for (std::size_t bits = 0; bits < (std::size_t{1} << l); ++bits) {
    Fss f;
    for (std::size_t i = 0; i < l; ++i)
      f.slots.push_back((bits >> (l - 1 - i)) & 1U ? Status::Fault : Status::Normal);
    if (!principal_only || f.transitions() <= 1) out.push_back(std::move(f));
  }
  return out;
}

FssGrowth multilayer_fss_growth(std::size_t n_layers) {
  if (n_layers < 1) throw std::invalid_argument("multilayer_fss_growth: need >= 1 layer");
  return {2 * n_layers + 1, 4 * n_layers};
}

FssGrowth order_fss_growth(std::size_t order) {
  if (order < 1) throw std::invalid_argument("order_fss_growth: order must be >= 1");
  return {2 * order + 1, 4 * order};
}

FssGrowth fss_growth(const RnnConfig& cfg) {
  const std::size_t l = 1 + cfg.n_layers * 2 * cfg.order;
  return {l, 2 * (l - 1)};
}

std::map<Fss, std::size_t> count_fss(std::span<const Status> labels, std::size_t l) {
  std::map<Fss, std::size_t> counts;
  if (l == 0) throw std::invalid_argument("count_fss: length must be >= 1");
  for (std::size_t n = l - 1; n < labels.size(); ++n) {
    Fss f;
    f.slots.assign(labels.begin() + static_cast<std::ptrdiff_t>(n + 1 - l),
                   labels.begin() + static_cast<std::ptrdiff_t>(n + 1));
    ++counts[f];
  }
  return counts;
}

// --- lobes ----------------------------------------------------------------------------

Gaussian lobe_params(const Fss& fss, const CoeffSet& coeffs, const D0Pair& d0, double gain) {
  if (fss.size() != coeffs.alphas.size()) throw std::invalid_argument("lobe_params: length mismatch");
  double mean = 0.0, var = 0.0;
  for (std::size_t j = 0; j < coeffs.alphas.size(); ++j) {
    const Gaussian& g = d0.of(fss.at_lag(j));
    mean += coeffs.alphas[j] * g.mean();
    var += coeffs.alphas[j] * coeffs.alphas[j] * g.variance();
  }
  return Gaussian::from_variance(gain * mean + coeffs.beta, gain * gain * var);
}

double separation_ratio(std::span<const double> alphas) {
  double sum = 0.0, sq = 0.0;
  for (double a : alphas) {
    sum += a;
    sq += a * a;
  }
  if (sq == 0.0) throw std::domain_error("separation_ratio: all coefficients are zero");
  return sum / std::sqrt(sq);
}

std::vector<double> compose_kernels(std::span<const double> outer, std::span<const double> inner) {
  if (outer.empty() || inner.empty()) return {};
  std::vector<double> out(outer.size() + inner.size() - 1, 0.0);
  for (std::size_t i = 0; i < outer.size(); ++i)
    for (std::size_t j = 0; j < inner.size(); ++j) out[i + j] += outer[i] * inner[j];
  return out;
}

std::vector<double> LinearContext::key() const {
  auto k = kernel.values();
  k.push_back(offset);
  k.insert(k.end(), first_layer_segments.begin(), first_layer_segments.end());
  return k;
}

const SegmentConditioned::Cell* SegmentConditioned::find(Status s, const std::vector<int>& segments) const {
  const auto it = cells.find({s, segments});
  return it == cells.end() || it->second.count < min_count ? nullptr : &it->second;
}

double LobeMoments::sd() const noexcept { return std::sqrt(std::max(variance, 0.0)); }

double LobeMoments::upper_tail(double threshold) const noexcept {
  if (variance <= 0.0) return mean > threshold ? 1.0 : 0.0;
  return 0.5 * std::erfc((threshold - mean) / (std::sqrt(variance) * std::numbers::sqrt2));
}

double InputModel::covariance(Status s, std::size_t a, std::size_t b) const {
  return correlation(a, b) * channels.at(a).of(s).sd() * channels.at(b).of(s).sd();
}

LobeMoments lobe_moments(const Fss& fss, const LinearContext& ctx, const InputModel& input) {
  const Matrix& k = ctx.kernel;
  if (fss.size() != k.rows()) throw std::invalid_argument("lobe_moments: FSS length must match context lags");
  if (k.cols() != input.channels.size()) throw std::invalid_argument("lobe_moments: channel count mismatch");
  LobeMoments m{ctx.offset, 0.0};
  const bool conditioned = input.conditioned && !ctx.first_layer_segments.empty();
  for (std::size_t lag = 0; lag < k.rows(); ++lag) {
    const Status s = fss.at_lag(lag);
    if (conditioned) {
      const auto* seg = ctx.first_layer_segments.data() + lag * k.cols();
      if (const auto* cell = input.conditioned->find(s, std::vector<int>(seg, seg + k.cols()))) {
        for (std::size_t a = 0; a < k.cols(); ++a) {
          m.mean += k(lag, a) * cell->mean[a];
          for (std::size_t b = 0; b < k.cols(); ++b) m.variance += k(lag, a) * k(lag, b) * cell->covariance(a, b);
        }
        continue;
      }
    }
    for (std::size_t a = 0; a < k.cols(); ++a) {
      const double ka = k(lag, a);
      if (ka == 0.0) continue;
      m.mean += ka * input.mean(s, a);
      for (std::size_t b = 0; b < k.cols(); ++b) m.variance += ka * k(lag, b) * input.covariance(s, a, b);
    }
  }
  m.variance = std::max(m.variance, 0.0);
  return m;
}

InputModel build_input_model(const RnnWeights& weights, const GaussianMixture& normal_mix,
                             const GaussianMixture& fault_mix, std::size_t n_samples, std::uint64_t seed) {
  const StageFactor f = factor_stage(weights.input.at(0));
  const auto normal = normal_mix.standardized(weights.scaling.center, weights.scaling.scale);
  const auto fault = fault_mix.standardized(weights.scaling.center, weights.scaling.scale);
  const std::size_t width = f.averaging.rows();
  InputModel im;
  im.correlation = Matrix(width, width);
  const Rng root(seed);
  for (std::size_t c = 0; c < width; ++c) {
    im.channels.push_back(
        spatial_average_dist(normal, fault, f.averaging.row(c), n_samples, root.split(c).seed()).fitted);
  }
  for (std::size_t a = 0; a < width; ++a)
    for (std::size_t b = 0; b < width; ++b) {
      const auto ra = f.averaging.row(a), rb = f.averaging.row(b);
      const double dot = std::inner_product(ra.begin(), ra.end(), rb.begin(), 0.0);
      const double na = std::sqrt(std::inner_product(ra.begin(), ra.end(), ra.begin(), 0.0));
      const double nb = std::sqrt(std::inner_product(rb.begin(), rb.end(), rb.begin(), 0.0));
      im.correlation(a, b) = a == b ? 1.0 : dot / (na * nb);
    }
  return im;
}

SegmentConditioned condition_on_segments(const MainModelRun& run, std::span<const Status> labels,
                                         std::size_t min_count) {
  const std::size_t t_len = run.d0.rows(), width = run.d0.cols();
  if (labels.size() != t_len) throw std::invalid_argument("condition_on_segments: label length mismatch");
  SegmentConditioned out;
  out.min_count = min_count;
  for (std::size_t n = run.warmup; n < t_len; ++n) {
    std::vector<int> seg(width);
    for (std::size_t c = 0; c < width; ++c) seg[c] = run.lss[0].channels[c].per_instant[n].indices[0];
    auto& cell = out.cells[{labels[n], seg}];
    if (cell.count == 0) {
      cell.mean.assign(width, 0.0);
      cell.covariance = Matrix(width, width);
    }
    ++cell.count;
    for (std::size_t a = 0; a < width; ++a) {
      cell.mean[a] += run.d0(n, a);
      for (std::size_t b = 0; b < width; ++b) cell.covariance(a, b) += run.d0(n, a) * run.d0(n, b);
    }
  }
  for (auto& [key, cell] : out.cells) {
    const auto cnt = static_cast<double>(cell.count);
    for (auto& v : cell.mean) v /= cnt;
    for (std::size_t a = 0; a < width; ++a)
      for (std::size_t b = 0; b < width; ++b) {
        const double raw = cell.covariance(a, b) / cnt - cell.mean[a] * cell.mean[b];
        cell.covariance(a, b) = cell.count > 1 ? raw * cnt / (cnt - 1.0) : 0.0;
      }
  }
  return out;
}

// --- main model ---------------------------------------------------------------------------

MainModelRun run_main_model(const RnnWeights& weights, const PwlApprox& pwl, const RnnConfig& cfg,
                            const Matrix& features) {
  if (!weights.feedback_diagonal())
    throw std::invalid_argument("run_main_model: feedback matrices must be diagonal");
  MainModelRun run;
  run.rnn = forward(weights, cfg, features);
  const std::size_t t_len = features.rows();
  const std::size_t span = 2 * cfg.order + 1;
  run.warmup = std::min(t_len, cfg.n_layers * 2 * cfg.order);

  for (const auto& u : weights.input) run.factors.push_back(factor_stage(u));

  // Stage 1: weighted spatial averaging of the scaled features.
  const StageFactor& f1 = run.factors[0];
  run.d0 = Matrix(t_len, cfg.width(0));
  std::vector<double> scaled(cfg.n_features);
  for (std::size_t n = 0; n < t_len; ++n) {
    for (std::size_t i = 0; i < cfg.n_features; ++i) scaled[i] = weights.scaling.apply(features(n, i));
    const auto d = multiply(f1.averaging, scaled);
    for (std::size_t c = 0; c < d.size(); ++c) run.d0(n, c) = d[c];
  }

  // Stage 2: truncated linear recursion per layer, per channel.
  for (std::size_t k = 0; k < cfg.n_layers; ++k) {
    const std::size_t width = cfg.width(k);
    run.lss.push_back(extract_lss(run.rnn, weights, k, pwl, cfg.order));
    const LssTable& table = run.lss.back();

    Matrix a(t_len, width);
    for (std::size_t n = 0; n < t_len; ++n) {
      if (k == 0) {
        for (std::size_t c = 0; c < width; ++c) a(n, c) = f1.gain[c] * run.d0(n, c);
      } else {
        const auto in = multiply(weights.input[k], run.output[k - 1].row(n));
        for (std::size_t c = 0; c < width; ++c) a(n, c) = in[c];
      }
    }

    std::vector<std::vector<CoeffSet>> layer_coeffs(width);
    Matrix out(t_len, width);
    for (std::size_t c = 0; c < width; ++c) {
      std::vector<double> w;
      for (const auto& m : weights.feedback[k]) w.push_back(m(c, c));
      layer_coeffs[c].reserve(t_len);
      for (std::size_t n = 0; n < t_len; ++n) {
        CoeffSet cs = expand_coefficients(w, table.channels[c].per_instant[n]);
        double v = cs.beta;
        for (std::size_t j = 0; j < span && j <= n; ++j) v += cs.alphas[j] * a(n - j, c);
        out(n, c) = v;
        layer_coeffs[c].push_back(std::move(cs));
      }
    }
    run.output.push_back(std::move(out));
    run.coeffs.push_back(std::move(layer_coeffs));
  }

  // Stage 3: readout.
  const Matrix& last = run.output.back();
  run.score.resize(t_len);
  for (std::size_t n = 0; n < t_len; ++n) {
    const auto h = last.row(n);
    run.score[n] = std::inner_product(h.begin(), h.end(), weights.readout.begin(), weights.bias);
  }
  return run;
}

std::string ModelTarget::str() const {
  if (kind == Kind::Readout) return "readout";
  return "layer" + std::to_string(layer + 1) + "/ch" + std::to_string(channel);
}

namespace {

LinearContext channel_context(const MainModelRun& run, const RnnWeights& weights, const RnnConfig& cfg,
                              std::size_t layer, std::size_t c, std::size_t n, std::size_t lags) {
  LinearContext ctx{Matrix(lags, cfg.width(0)), 0.0, {}};
  const CoeffSet& cs = run.coeffs[layer][c][n];
  ctx.offset = cs.beta;
  for (std::size_t j = 0; j < cs.alphas.size() && j <= n; ++j) {
    const double alpha = cs.alphas[j];
    if (alpha == 0.0) continue;
    if (layer == 0) {
      ctx.kernel(j, c) += alpha * run.factors[0].gain[c];
      continue;
    }
    for (std::size_t below = 0; below < cfg.width(layer - 1); ++below) {
      const double coef = alpha * weights.input[layer](c, below);
      if (coef == 0.0) continue;
      const LinearContext sub = channel_context(run, weights, cfg, layer - 1, below, n - j, lags - j);
      for (std::size_t m = 0; m < sub.kernel.rows(); ++m)
        for (std::size_t i = 0; i < sub.kernel.cols(); ++i) ctx.kernel(j + m, i) += coef * sub.kernel(m, i);
      ctx.offset += coef * sub.offset;
    }
  }
  return ctx;
}

}  // namespace

namespace {

std::vector<int> first_layer_segments(const MainModelRun& run, std::size_t n, std::size_t lags) {
  const auto& channels = run.lss.at(0).channels;
  std::vector<int> out(lags * channels.size(), kBeforeStart);
  for (std::size_t m = 0; m < lags && m <= n; ++m)
    for (std::size_t c = 0; c < channels.size(); ++c) out[m * channels.size() + c] = channels[c].per_instant[n - m].indices[0];
  return out;
}

}  // namespace

LinearContext linear_context(const MainModelRun& run, const RnnWeights& weights, const RnnConfig& cfg,
                             const ModelTarget& target, std::size_t n) {
  const std::size_t lags = fss_growth(cfg).fss_length;
  if (target.kind == ModelTarget::Kind::Channel) {
    if (target.layer >= cfg.n_layers || target.channel >= cfg.width(target.layer))
      throw std::invalid_argument("linear_context: no such channel");
    // a channel of layer k only reaches back 2p(k+1) lags; pad to the full length
    const std::size_t own = 1 + (target.layer + 1) * 2 * cfg.order;
    LinearContext ctx = channel_context(run, weights, cfg, target.layer, target.channel, n, own);
    LinearContext padded{Matrix(lags, cfg.width(0)), ctx.offset, {}};
    for (std::size_t m = 0; m < own; ++m)
      for (std::size_t i = 0; i < cfg.width(0); ++i) padded.kernel(m, i) = ctx.kernel(m, i);
    padded.first_layer_segments = first_layer_segments(run, n, lags);
    return padded;
  }
  const std::size_t last = cfg.n_layers - 1;
  LinearContext ctx{Matrix(lags, cfg.width(0)), weights.bias, {}};
  for (std::size_t c = 0; c < cfg.width(last); ++c) {
    const double v = weights.readout[c];
    if (v == 0.0) continue;
    const LinearContext sub = channel_context(run, weights, cfg, last, c, n, lags);
    for (std::size_t i = 0; i < ctx.kernel.values().size(); ++i) ctx.kernel.values()[i] += v * sub.kernel.values()[i];
    ctx.offset += v * sub.offset;
  }
  ctx.first_layer_segments = first_layer_segments(run, n, lags);
  return ctx;
}

std::string to_string(LobeKind k) {
  switch (k) {
    case LobeKind::Main: return "main";
    case LobeKind::PrincipalSide: return "principal-side";
    case LobeKind::Neglected: return "neglected";
  }
  return "?";
}

std::string to_string(ContextWeighting w) { return w == ContextWeighting::Product ? "product" : "conditional"; }

ContextWeighting parse_context_weighting(std::string_view s) {
  if (s == "product") return ContextWeighting::Product;
  if (s == "conditional") return ContextWeighting::Conditional;
  throw std::invalid_argument("unknown context weighting: " + std::string(s));
}

std::vector<LobeComponent> DetailedDistribution::status_components(Status s, bool principal_only) const {
  std::vector<LobeComponent> out;
  for (const auto& c : components)
    if (c.fss.current() == s && (!principal_only || c.kind != LobeKind::Neglected)) out.push_back(c);
  return out;
}

double DetailedDistribution::neglected_mass() const {
  double m = 0.0;
  for (const auto& c : components)
    if (c.kind == LobeKind::Neglected) m += c.weight;
  return m;
}

const FssSummary* DetailedDistribution::find(std::string_view fss) const {
  for (const auto& s : per_fss)
    if (s.fss.str() == fss) return &s;
  return nullptr;
}

DetailedDistribution compose_detailed(const MainModelRun& run, const RnnWeights& weights, const RnnConfig& cfg,
                                      std::span<const Status> labels, const InputModel& input,
                                      const ModelTarget& target, ContextWeighting weighting) {
  const std::size_t l = fss_growth(cfg).fss_length;
  const std::size_t t_len = run.score.size();
  if (labels.size() != t_len) throw std::invalid_argument("compose_detailed: label length mismatch");
  const std::size_t start = std::max(run.warmup, l - 1);
  if (t_len <= start) throw std::invalid_argument("compose_detailed: no instants after warm-up");
  const double total = static_cast<double>(t_len - start);

  DetailedDistribution dd;
  dd.target = target;
  dd.fss_length = l;
  dd.weighting = weighting;

  std::map<std::vector<double>, std::size_t> ctx_index;
  std::vector<std::size_t> ctx_count;
  std::map<Fss, std::size_t> fss_count;
  std::map<std::pair<Fss, std::size_t>, std::size_t> joint;
  for (std::size_t n = start; n < t_len; ++n) {
    LinearContext ctx = linear_context(run, weights, cfg, target, n);
    if (!input.conditioned) ctx.first_layer_segments.clear();
    auto [it, inserted] = ctx_index.try_emplace(ctx.key(), dd.contexts.size());
    if (inserted) {
      dd.contexts.push_back(std::move(ctx));
      ctx_count.push_back(0);
    }
    ++ctx_count[it->second];
    Fss f;
    f.slots.assign(labels.begin() + static_cast<std::ptrdiff_t>(n + 1 - l),
                   labels.begin() + static_cast<std::ptrdiff_t>(n + 1));
    ++fss_count[f];
    ++joint[{f, it->second}];
  }
  for (auto c : ctx_count) dd.context_freq.push_back(static_cast<double>(c) / total);

  for (const Fss& f : enumerate_fss(l, false)) {
    const LobeKind kind = f.uniform() ? LobeKind::Main
                          : f.transitions() == 1 ? LobeKind::PrincipalSide
                                                 : LobeKind::Neglected;
    const auto fc = fss_count.find(f);
    const std::size_t count = fc == fss_count.end() ? 0 : fc->second;
    const double p_fss = static_cast<double>(count) / total;

    FssSummary sum;
    sum.fss = f;
    sum.kind = kind;
    sum.count = count;
    sum.rel_freq = p_fss;

    // Summary statistics use the chosen weighting; an unobserved sequence
    // falls back to the marginal context distribution so its lobe shape is
    // still reported.
    double wsum = 0.0, m1 = 0.0, m2 = 0.0, pooled = 0.0;
    for (std::size_t ci = 0; ci < dd.contexts.size(); ++ci) {
      double w_ctx = dd.context_freq[ci];
      if (weighting == ContextWeighting::Conditional && count > 0) {
        const auto jt = joint.find({f, ci});
        w_ctx = jt == joint.end() ? 0.0 : static_cast<double>(jt->second) / static_cast<double>(count);
      }
      if (count > 0) {
        const double product = p_fss * dd.context_freq[ci];
        const auto jt = joint.find({f, ci});
        const double jp = jt == joint.end() ? 0.0 : static_cast<double>(jt->second) / total;
        dd.independence_gap += std::abs(jp - product);
      }
      if (w_ctx == 0.0) continue;
      const LobeMoments mom = lobe_moments(f, dd.contexts[ci], input);
      wsum += w_ctx;
      m1 += w_ctx * mom.mean;
      m2 += w_ctx * (mom.variance + mom.mean * mom.mean);
      pooled += w_ctx * mom.variance;
      if (count > 0) dd.components.push_back({f, ci, mom, p_fss * w_ctx, kind});
    }
    if (wsum > 0.0) {
      sum.mean = m1 / wsum;
      sum.sd = std::sqrt(pooled / wsum);
      sum.mixture_sd = std::sqrt(std::max(m2 / wsum - sum.mean * sum.mean, 0.0));
    }
    sum.weight = count > 0 ? p_fss * wsum : 0.0;
    dd.per_fss.push_back(std::move(sum));
  }
  return dd;
}

}  // namespace sidelobe
