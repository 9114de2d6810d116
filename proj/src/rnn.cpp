#include "sidelobe/rnn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sidelobe/random.hpp"

namespace sidelobe {

void RnnConfig::validate() const {
  if (n_layers < 1 || n_layers > 3) throw std::invalid_argument("rnn: n_layers must be 1, 2 or 3");
  if (order != 1 && order != 2 && order != 4) throw std::invalid_argument("rnn: order must be 1, 2 or 4");
  if (hidden_widths.size() != n_layers) throw std::invalid_argument("rnn: one hidden width per layer");
  if (std::any_of(hidden_widths.begin(), hidden_widths.end(), [](std::size_t w) { return w == 0; }))
    throw std::invalid_argument("rnn: hidden widths must be >= 1");
  if (n_features < 1) throw std::invalid_argument("rnn: n_features must be >= 1");
}

std::string RnnConfig::name() const { return std::to_string(n_layers) + "L" + std::to_string(order); }

RnnConfig preset(std::string_view name, std::size_t width, std::size_t n_features) {
  if (name.size() != 3 || name[1] != 'L') throw std::invalid_argument("unknown preset: " + std::string(name));
  RnnConfig cfg;
  cfg.n_layers = static_cast<std::size_t>(name[0] - '0');
  cfg.order = static_cast<std::size_t>(name[2] - '0');
  cfg.hidden_widths.assign(cfg.n_layers, width);
  cfg.n_features = n_features;
  const auto names = preset_names();
  if (std::find(names.begin(), names.end(), name) == names.end())
    throw std::invalid_argument("unknown preset: " + std::string(name));
  cfg.validate();
  return cfg;
}

std::vector<std::string> preset_names() { return {"1L1", "1L2", "1L4", "2L1", "3L1"}; }

RnnWeights RnnWeights::zeros(const RnnConfig& cfg) {
  cfg.validate();
  RnnWeights w;
  for (std::size_t k = 0; k < cfg.n_layers; ++k) {
    w.input.emplace_back(cfg.width(k), cfg.input_width(k));
    w.feedback.emplace_back(cfg.order, Matrix(cfg.width(k), cfg.width(k)));
  }
  w.readout.assign(cfg.width(cfg.n_layers - 1), 0.0);
  return w;
}

namespace {

template <typename Fn>
void for_each_block(RnnWeights& w, Fn&& fn) {
  for (auto& u : w.input) fn(std::span<double>(u.values()));
  for (auto& layer : w.feedback)
    for (auto& m : layer) fn(std::span<double>(m.values()));
  fn(std::span<double>(w.readout));
  fn(std::span<double>(&w.bias, 1));
}

double sigmoid(double y) { return y >= 0 ? 1.0 / (1.0 + std::exp(-y)) : std::exp(y) / (1.0 + std::exp(y)); }

double softplus(double y) { return y > 0 ? y + std::log1p(std::exp(-y)) : std::log1p(std::exp(y)); }

double target(Status s) { return s == Status::Fault ? 1.0 : 0.0; }

}  // namespace

bool RnnWeights::all_finite() const {
  bool ok = std::isfinite(bias);
  auto copy = *this;
  for_each_block(copy, [&](std::span<double> b) {
    ok = ok && std::all_of(b.begin(), b.end(), [](double x) { return std::isfinite(x); });
  });
  return ok;
}

bool RnnWeights::feedback_diagonal() const {
  for (const auto& layer : feedback)
    for (const auto& m : layer)
      if (!m.is_diagonal()) return false;
  return true;
}

RecurrentState Trace::final_state(std::size_t order) const {
  RecurrentState s;
  const std::size_t t = length();
  for (const auto& layer : layers) {
    std::vector<std::vector<double>> hist;
    for (std::size_t j = 0; j < order && j < t; ++j) {
      const auto row = layer.state.row(t - 1 - j);
      hist.emplace_back(row.begin(), row.end());
    }
    s.layers.push_back(std::move(hist));
  }
  return s;
}

namespace {

/// h_k(n - j) from the trace, the carried state, or zero.
std::span<const double> lagged_state(const Matrix& state, const RecurrentState* initial, std::size_t layer,
                                     std::ptrdiff_t n, std::size_t j) {
  const std::ptrdiff_t idx = n - static_cast<std::ptrdiff_t>(j);
  if (idx >= 0) return state.row(static_cast<std::size_t>(idx));
  if (initial != nullptr && layer < initial->layers.size()) {
    const auto back = static_cast<std::size_t>(-idx - 1);
    if (back < initial->layers[layer].size()) return initial->layers[layer][back];
  }
  return {};
}

}  // namespace

Trace forward(const RnnWeights& weights, const RnnConfig& cfg, const Matrix& features,
              const RecurrentState* initial) {
  cfg.validate();
  if (features.cols() != cfg.n_features) throw std::invalid_argument("forward: feature width mismatch");
  if (weights.input.size() != cfg.n_layers || weights.feedback.size() != cfg.n_layers)
    throw std::invalid_argument("forward: weights do not match config");
  const std::size_t t_len = features.rows();

  Matrix scaled(t_len, cfg.n_features);
  for (std::size_t n = 0; n < t_len; ++n)
    for (std::size_t f = 0; f < cfg.n_features; ++f) scaled(n, f) = weights.scaling.apply(features(n, f));

  Trace trace;
  trace.layers.resize(cfg.n_layers);
  for (std::size_t k = 0; k < cfg.n_layers; ++k) {
    const std::size_t width = cfg.width(k);
    const Matrix& u = weights.input[k];
    if (u.rows() != width || u.cols() != cfg.input_width(k))
      throw std::invalid_argument("forward: input matrix shape mismatch");
    LayerTrace& lt = trace.layers[k];
    lt.input = Matrix(t_len, width);
    lt.pre = Matrix(t_len, width);
    lt.state = Matrix(t_len, width);
    for (std::size_t n = 0; n < t_len; ++n) {
      const auto in = k == 0 ? scaled.row(n) : std::span<const double>(trace.layers[k - 1].state.row(n));
      const auto a = multiply(u, in);
      for (std::size_t c = 0; c < width; ++c) {
        lt.input(n, c) = a[c];
        lt.pre(n, c) = a[c];
      }
      for (std::size_t j = 1; j <= cfg.order; ++j) {
        const auto h = lagged_state(lt.state, initial, k, static_cast<std::ptrdiff_t>(n), j);
        if (h.empty()) continue;
        const auto fb = multiply(weights.feedback[k][j - 1], h);
        for (std::size_t c = 0; c < width; ++c) lt.pre(n, c) += fb[c];
      }
      for (std::size_t c = 0; c < width; ++c) lt.state(n, c) = std::tanh(lt.pre(n, c));
    }
  }

  const auto& last = trace.layers.back().state;
  if (weights.readout.size() != last.cols()) throw std::invalid_argument("forward: readout width mismatch");
  trace.score.resize(t_len);
  for (std::size_t n = 0; n < t_len; ++n) {
    const auto h = last.row(n);
    trace.score[n] = std::inner_product(h.begin(), h.end(), weights.readout.begin(), weights.bias);
  }
  return trace;
}

double sequence_loss(const Trace& trace, std::span<const Status> labels) {
  if (labels.size() != trace.length()) throw std::invalid_argument("sequence_loss: length mismatch");
  if (labels.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t n = 0; n < labels.size(); ++n) total += softplus(trace.score[n]) - target(labels[n]) * trace.score[n];
  return total / static_cast<double>(labels.size());
}

LossGradient loss_gradient(const RnnWeights& weights, const RnnConfig& cfg, const Matrix& features,
                           std::span<const Status> labels, const RecurrentState* initial) {
  const Trace trace = forward(weights, cfg, features, initial);
  const std::size_t t_len = trace.length();
  if (labels.size() != t_len) throw std::invalid_argument("loss_gradient: label length mismatch");

  LossGradient out;
  out.loss = sequence_loss(trace, labels);
  RnnWeights& g = out.gradient;
  g = RnnWeights::zeros(cfg);
  if (t_len == 0) return out;

  const std::size_t last = cfg.n_layers - 1;
  Matrix dh(t_len, cfg.width(last));
  for (std::size_t n = 0; n < t_len; ++n) {
    const double dy = (sigmoid(trace.score[n]) - target(labels[n])) / static_cast<double>(t_len);
    g.bias += dy;
    const auto h = trace.layers[last].state.row(n);
    for (std::size_t c = 0; c < h.size(); ++c) {
      g.readout[c] += dy * h[c];
      dh(n, c) = dy * weights.readout[c];
    }
  }

  Matrix scaled(t_len, cfg.n_features);
  for (std::size_t n = 0; n < t_len; ++n)
    for (std::size_t f = 0; f < cfg.n_features; ++f) scaled(n, f) = weights.scaling.apply(features(n, f));

  for (std::size_t kk = cfg.n_layers; kk-- > 0;) {
    const LayerTrace& lt = trace.layers[kk];
    const std::size_t width = cfg.width(kk);
    const std::size_t in_width = cfg.input_width(kk);
    const Matrix& u = weights.input[kk];
    Matrix dh_below = kk > 0 ? Matrix(t_len, in_width) : Matrix();
    std::vector<double> delta(width);
    for (std::size_t n = t_len; n-- > 0;) {
      for (std::size_t c = 0; c < width; ++c) {
        const double h = lt.state(n, c);
        delta[c] = dh(n, c) * (1.0 - h * h);
      }
      const auto in = kk == 0 ? scaled.row(n) : std::span<const double>(trace.layers[kk - 1].state.row(n));
      for (std::size_t r = 0; r < width; ++r)
        for (std::size_t c = 0; c < in_width; ++c) g.input[kk](r, c) += delta[r] * in[c];
      if (kk > 0)
        for (std::size_t c = 0; c < in_width; ++c)
          for (std::size_t r = 0; r < width; ++r) dh_below(n, c) += u(r, c) * delta[r];
      for (std::size_t j = 1; j <= cfg.order; ++j) {
        const auto h = lagged_state(lt.state, initial, kk, static_cast<std::ptrdiff_t>(n), j);
        if (h.empty()) continue;
        const Matrix& wj = weights.feedback[kk][j - 1];
        Matrix& gw = g.feedback[kk][j - 1];
        for (std::size_t r = 0; r < width; ++r)
          for (std::size_t c = 0; c < width; ++c) gw(r, c) += delta[r] * h[c];
        if (n >= j)
          for (std::size_t c = 0; c < width; ++c)
            for (std::size_t r = 0; r < width; ++r) dh(n - j, c) += wj(r, c) * delta[r];
      }
    }
    if (cfg.diagonal_feedback)
      for (auto& m : g.feedback[kk])
        for (std::size_t r = 0; r < m.rows(); ++r)
          for (std::size_t c = 0; c < m.cols(); ++c)
            if (r != c) m(r, c) = 0.0;
    if (kk > 0) dh = std::move(dh_below);
  }
  return out;
}

RnnWeights initialize(const RnnConfig& cfg, std::uint64_t seed) {
  RnnWeights w = RnnWeights::zeros(cfg);
  Rng rng(seed);
  // Uniform in [-0.3, 0.3], scaled by sqrt(3 / fan_in) for the input and
  // readout maps so the first pre-activations start well inside tanh's
  // linear region.
  for (std::size_t k = 0; k < cfg.n_layers; ++k) {
    const double scale = std::sqrt(3.0 / static_cast<double>(cfg.input_width(k)));
    for (auto& v : w.input[k].values()) v = rng.uniform(-0.3, 0.3) * scale;
    for (auto& m : w.feedback[k])
      for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < m.cols(); ++c)
          if (!cfg.diagonal_feedback || r == c) m(r, c) = rng.uniform(-0.3, 0.3);
  }
  const double scale = std::sqrt(3.0 / static_cast<double>(w.readout.size()));
  for (auto& v : w.readout) v = rng.uniform(-0.3, 0.3) * scale;
  return w;
}

namespace {

InputScaling fit_scaling(const std::vector<LabelledSequence>& seqs) {
  double sum = 0.0, sq = 0.0;
  std::size_t n = 0;
  for (const auto& s : seqs)
    for (double x : s.features.values()) {
      sum += x;
      sq += x * x;
      ++n;
    }
  const double mean = sum / static_cast<double>(n);
  const double var = sq / static_cast<double>(n) - mean * mean;
  return {mean, var > 0.0 ? std::sqrt(var) : 1.0};
}

struct Adam {
  std::vector<std::vector<double>> m, v;
  std::size_t step = 0;
  double lr, b1 = 0.9, b2 = 0.999, eps = 1e-8;

  void apply(RnnWeights& w, RnnWeights& g) {
    ++step;
    std::vector<std::span<double>> params, grads;
    for_each_block(w, [&](std::span<double> b) { params.push_back(b); });
    for_each_block(g, [&](std::span<double> b) { grads.push_back(b); });
    if (m.empty()) {
      for (const auto& p : params) {
        m.emplace_back(p.size(), 0.0);
        v.emplace_back(p.size(), 0.0);
      }
    }
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(step));
    for (std::size_t b = 0; b < params.size(); ++b)
      for (std::size_t i = 0; i < params[b].size(); ++i) {
        const double gi = grads[b][i];
        m[b][i] = b1 * m[b][i] + (1 - b1) * gi;
        v[b][i] = b2 * v[b][i] + (1 - b2) * gi * gi;
        params[b][i] -= lr * (m[b][i] / c1) / (std::sqrt(v[b][i] / c2) + eps);
      }
  }
};

void accumulate(RnnWeights& into, RnnWeights& from, double scale) {
  std::vector<std::span<double>> a, b;
  for_each_block(into, [&](std::span<double> s) { a.push_back(s); });
  for_each_block(from, [&](std::span<double> s) { b.push_back(s); });
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i].size(); ++j) a[i][j] += scale * b[i][j];
}

void clip(RnnWeights& w, const TrainHyper& hyper) {
  if (hyper.weight_clip)
    for (auto& layer : w.feedback)
      for (auto& m : layer)
        for (auto& v : m.values()) v = std::clamp(v, -*hyper.weight_clip, *hyper.weight_clip);
  if (hyper.input_clip)
    for (auto& v : w.input.front().values()) v = std::clamp(v, -*hyper.input_clip, *hyper.input_clip);
}

}  // namespace

TrainResult train(const RnnConfig& cfg, const Dataset& dataset, const TrainHyper& hyper) {
  cfg.validate();
  if (dataset.train.empty()) throw std::invalid_argument("train: empty training split");
  if (hyper.batch == 0) throw std::invalid_argument("train: batch must be >= 1");

  TrainResult result;
  RnnWeights w = initialize(cfg, Rng(hyper.seed).split(0).seed());
  w.scaling = fit_scaling(dataset.train);
  clip(w, hyper);

  Adam adam;
  adam.lr = hyper.learning_rate;
  const Stream val = concatenate(dataset.val);
  const Rng shuffle_root = Rng(hyper.seed).split(1);
  std::vector<std::size_t> order(dataset.train.size());

  for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle = shuffle_root.split(epoch);
    std::shuffle(order.begin(), order.end(), shuffle.engine());

    RecurrentState carried;
    RnnWeights batch_grad = RnnWeights::zeros(cfg);
    std::size_t in_batch = 0;
    double epoch_loss = 0.0;
    for (std::size_t i = 0; i < order.size(); ++i) {
      const auto& seq = dataset.train[order[i]];
      auto lg = loss_gradient(w, cfg, seq.features, seq.labels, i == 0 ? nullptr : &carried);
      if (!std::isfinite(lg.loss)) throw NumericError("train: loss became non-finite");
      epoch_loss += lg.loss;
      accumulate(batch_grad, lg.gradient, 1.0);
      ++in_batch;
      carried = forward(w, cfg, seq.features, i == 0 ? nullptr : &carried).final_state(cfg.order);
      if (in_batch == hyper.batch || i + 1 == order.size()) {
        RnnWeights scaled = RnnWeights::zeros(cfg);
        accumulate(scaled, batch_grad, 1.0 / static_cast<double>(in_batch));
        adam.apply(w, scaled);
        clip(w, hyper);
        batch_grad = RnnWeights::zeros(cfg);
        in_batch = 0;
      }
    }
    epoch_loss /= static_cast<double>(order.size());
    if (!std::isfinite(epoch_loss) || !w.all_finite()) throw NumericError("train: weights diverged");
    result.train_loss.push_back(epoch_loss);
    if (!dataset.val.empty()) {
      const double vl = sequence_loss(forward(w, cfg, val.features), val.labels);
      if (!std::isfinite(vl)) throw NumericError("train: validation loss became non-finite");
      result.val_loss.push_back(vl);
    }
  }

  const Stream tr = concatenate(dataset.train);
  const Trace t = forward(w, cfg, tr.features);
  double sum_f = 0.0, sum_n = 0.0;
  std::size_t nf = 0, nn = 0;
  for (std::size_t n = 0; n < t.length(); ++n) {
    if (tr.labels[n] == Status::Fault) {
      sum_f += t.score[n];
      ++nf;
    } else {
      sum_n += t.score[n];
      ++nn;
    }
  }
  if (nf > 0 && nn > 0) w.polarity = sum_f / nf >= sum_n / nn ? 1.0 : -1.0;
  result.weights = std::move(w);
  return result;
}

Classification classify(const Trace& trace, double threshold, double polarity) {
  Classification out;
  out.scores = trace.score;
  out.labels.reserve(trace.length());
  for (double y : trace.score)
    out.labels.push_back(polarity * (y - threshold) > 0.0 ? Status::Fault : Status::Normal);
  return out;
}

}  // namespace sidelobe
