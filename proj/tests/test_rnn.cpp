#include "catch_amalgamated.hpp"

#include <cmath>

#include "sidelobe/eval.hpp"
#include "sidelobe/rnn.hpp"

using namespace sidelobe;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

RnnConfig tiny(std::size_t layers, std::size_t order, std::size_t width, std::size_t features) {
  RnnConfig cfg;
  cfg.n_layers = layers;
  cfg.order = order;
  cfg.hidden_widths.assign(layers, width);
  cfg.n_features = features;
  return cfg;
}

Matrix random_features(std::size_t t, std::size_t f, Rng& rng) {
  Matrix m(t, f);
  for (auto& v : m.values()) v = rng.uniform(-2.0, 2.0);
  return m;
}

std::vector<Status> random_labels(std::size_t t, Rng& rng) {
  std::vector<Status> out(t);
  for (auto& s : out) s = rng.uniform() < 0.5 ? Status::Fault : Status::Normal;
  return out;
}

/// Every trainable scalar, in a fixed order.
std::vector<double*> parameters(RnnWeights& w) {
  std::vector<double*> out;
  for (auto& m : w.input)
    for (auto& v : m.values()) out.push_back(&v);
  for (auto& layer : w.feedback)
    for (auto& m : layer)
      for (std::size_t i = 0; i < m.rows(); ++i) out.push_back(&m(i, i));
  for (auto& v : w.readout) out.push_back(&v);
  out.push_back(&w.bias);
  return out;
}

}  // namespace

TEST_CASE("zero weights give a zero trace", "[rnn]") {
  const auto cfg = tiny(2, 2, 3, 4);
  Rng rng(1);
  const auto x = random_features(10, 4, rng);
  const auto t = forward(RnnWeights::zeros(cfg), cfg, x);
  REQUIRE(t.length() == 10);
  for (const auto& layer : t.layers)
    for (double v : layer.state.values()) CHECK(v == 0.0);
  for (double y : t.score) CHECK(y == 0.0);
}

TEST_CASE("forward matches the hand recursion", "[rnn]") {
  const auto cfg = tiny(1, 1, 1, 1);
  auto w = RnnWeights::zeros(cfg);
  w.input[0](0, 0) = 1.0;
  w.feedback[0][0](0, 0) = 0.5;
  w.readout[0] = 1.0;
  const Matrix x(2, 1, 0.1);
  const auto t = forward(w, cfg, x);
  // h1 = tanh(0.1), h2 = tanh(0.1 + 0.5 h1)
  CHECK_THAT(t.layers[0].state(0, 0), WithinAbs(0.09966799462495582, 1e-15));
  CHECK_THAT(t.layers[0].state(1, 0), WithinAbs(0.14872270666593593, 1e-15));
  CHECK_THAT(t.score[1], WithinAbs(0.14872270666593593, 1e-15));
}

TEST_CASE("carried state continues a split input exactly", "[rnn]") {
  const auto cfg = tiny(2, 2, 2, 3);
  auto w = initialize(cfg, 5);
  Rng rng(2);
  const auto x = random_features(12, 3, rng);
  const auto whole = forward(w, cfg, x);
  Matrix head(5, 3), tail(7, 3);
  for (std::size_t n = 0; n < 12; ++n)
    for (std::size_t f = 0; f < 3; ++f) (n < 5 ? head(n, f) : tail(n - 5, f)) = x(n, f);
  const auto first = forward(w, cfg, head);
  const auto carried = first.final_state(cfg.order);
  const auto second = forward(w, cfg, tail, &carried);
  for (std::size_t n = 0; n < 7; ++n) CHECK(second.score[n] == whole.score[n + 5]);
}

TEST_CASE("states stay inside tanh's range and zero input is a fixpoint", "[rnn]") {
  const auto cfg = tiny(3, 1, 2, 9);
  auto w = initialize(cfg, 9);
  Rng rng(3);
  Matrix x(50, 9);
  for (auto& v : x.values()) v = rng.uniform(-100.0, 100.0);
  const auto t = forward(w, cfg, x);
  for (const auto& layer : t.layers)
    for (double v : layer.state.values()) CHECK(std::abs(v) <= 1.0);
  const auto z = forward(w, cfg, Matrix(20, 9, 0.0));
  for (const auto& layer : z.layers)
    for (double v : layer.state.values()) CHECK(v == 0.0);
}

TEST_CASE("BPTT gradient matches central differences", "[rnn][property]") {
  Rng rng(42);
  for (int c = 0; c < 20; ++c) {
    const auto cfg = tiny(static_cast<std::size_t>(rng.uniform_int(1, 3)), std::size_t{1} << rng.uniform_int(0, 2),
                          static_cast<std::size_t>(rng.uniform_int(1, 3)), static_cast<std::size_t>(rng.uniform_int(1, 4)));
    auto w = initialize(cfg, 100 + c);
    for (auto* p : parameters(w)) *p = rng.uniform(-0.8, 0.8);
    const auto x = random_features(static_cast<std::size_t>(rng.uniform_int(3, 12)), cfg.n_features, rng);
    const auto y = random_labels(x.rows(), rng);

    const auto lg = loss_gradient(w, cfg, x, y);
    CHECK_THAT(lg.loss, WithinRel(sequence_loss(forward(w, cfg, x), y), 1e-12));
    auto g = lg.gradient;
    const auto ps = parameters(w), gs = parameters(g);
    for (std::size_t i = 0; i < ps.size(); ++i) {
      const double h = 1e-5, keep = *ps[i];
      *ps[i] = keep + h;
      const double up = sequence_loss(forward(w, cfg, x), y);
      *ps[i] = keep - h;
      const double down = sequence_loss(forward(w, cfg, x), y);
      *ps[i] = keep;
      const double fd = (up - down) / (2 * h);
      CHECK(std::abs(fd - *gs[i]) <= 1e-4 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST_CASE("gradient keeps off-diagonal feedback at zero", "[rnn]") {
  const auto cfg = tiny(1, 2, 3, 2);
  Rng rng(8);
  const auto x = random_features(8, 2, rng);
  const auto g = loss_gradient(initialize(cfg, 4), cfg, x, random_labels(8, rng)).gradient;
  for (const auto& m : g.feedback[0]) CHECK(m.is_diagonal());
}

TEST_CASE("zero learning rate leaves the initial weights", "[rnn]") {
  const auto cfg = tiny(1, 1, 2, 9);
  ScenarioConfig sc;
  sc.n_train = 8;
  sc.n_val = 2;
  sc.n_test = 2;
  const auto ds = generate_dataset(sc, 3);
  TrainHyper hyper;
  hyper.learning_rate = 0.0;
  hyper.epochs = 2;
  hyper.seed = 3;
  hyper.weight_clip.reset();
  const auto tr = train(cfg, ds, hyper);
  const auto init = initialize(cfg, Rng(3).split(0).seed());
  CHECK(tr.weights.input == init.input);
  CHECK(tr.weights.feedback == init.feedback);
  CHECK(tr.weights.readout == init.readout);
  CHECK(tr.weights.bias == init.bias);
  CHECK(tr.train_loss.size() == 2);
  CHECK(tr.val_loss.size() == 2);
}

TEST_CASE("training separates a 20 dB fault and is deterministic", "[rnn]") {
  ScenarioConfig sc;
  sc.fault_impact_db = 20.0;
  const auto ds = generate_dataset(sc, 1);
  const auto cfg = tiny(1, 1, 2, 9);
  TrainHyper hyper;
  hyper.input_clip = 0.05;
  const auto a = train(cfg, ds, hyper);
  const auto b = train(cfg, ds, hyper);
  CHECK(a.weights.input == b.weights.input);
  CHECK(a.weights.readout == b.weights.readout);
  CHECK(a.train_loss == b.train_loss);
  CHECK(a.train_loss.back() < a.train_loss.front());
  for (double v : a.weights.feedback[0][0].values()) CHECK(std::abs(v) <= 0.6);
  for (double v : a.weights.input[0].values()) CHECK(std::abs(v) <= 0.05);

  const auto val = concatenate(ds.val);
  const auto t = forward(a.weights, cfg, val.features);
  std::vector<double> oriented;
  for (double y : t.score) oriented.push_back(a.weights.polarity * y);
  CHECK(roc(oriented, val.labels).auc >= 0.95);
}

TEST_CASE("classify thresholds with polarity", "[rnn]") {
  Trace t;
  t.score = {-2.0, -0.5, 0.0, 0.5, 2.0};
  const auto up = classify(t, 0.0, 1.0);
  CHECK(up.labels == std::vector<Status>{Status::Normal, Status::Normal, Status::Normal, Status::Fault, Status::Fault});
  const auto down = classify(t, 0.0, -1.0);
  CHECK(down.labels == std::vector<Status>{Status::Fault, Status::Fault, Status::Normal, Status::Normal, Status::Normal});
  // raising the threshold never adds faults
  std::size_t prev = 5;
  for (double thr = -3.0; thr <= 3.0; thr += 0.25) {
    const auto c = classify(t, thr, 1.0);
    const auto faults = static_cast<std::size_t>(std::count(c.labels.begin(), c.labels.end(), Status::Fault));
    CHECK(faults <= prev);
    prev = faults;
  }
}

TEST_CASE("presets and validation", "[rnn]") {
  CHECK(preset_names() == std::vector<std::string>{"1L1", "1L2", "1L4", "2L1", "3L1"});
  const auto p = preset("3L1");
  CHECK(p.n_layers == 3);
  CHECK(p.order == 1);
  CHECK(p.name() == "3L1");
  CHECK(preset("1L4").order == 4);
  CHECK_THROWS(preset("4L4"));
  auto bad = tiny(2, 1, 2, 9);
  bad.hidden_widths = {2};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}
