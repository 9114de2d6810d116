// Acceptance suite: one PASS/FAIL line per criterion, details indented below.
// Exits non-zero when any criterion fails.

#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "sidelobe/io.hpp"
#include "sidelobe/pipeline.hpp"

using namespace sidelobe;

namespace {

// Tolerances, pinned.
constexpr double kCoeffTol = 1e-12;
constexpr int kCoeffDraws = 20;
constexpr double kMcSe = 3.0;
constexpr std::size_t kMcSamples = 100000;
constexpr int kMcCases = 20;
constexpr double kPmfTol = 1e-9;
constexpr double kMainFreqLo = 0.38, kMainFreqHi = 0.45;
constexpr double kSideFreqLo = 0.025, kSideFreqHi = 0.055;
constexpr double kDoubleTransitionMax = 0.01;
constexpr double kSdSpread = 0.01;
constexpr double kAucGap = 0.03;
constexpr double kHistL1 = 0.15;
constexpr double kTraceRel = 0.05;
constexpr double kMassTol = 1e-12;
constexpr double kErrorRel = 0.20;
constexpr std::size_t kStudySeeds = 5;
constexpr double kGradRel = 1e-4;
constexpr int kGradConfigs = 20;

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  void require(bool ok, const std::string& what) {
    pass = pass && ok;
    notes.push_back(std::string(ok ? "ok   " : "FAIL ") + what);
  }
  void note(const std::string& what) { notes.push_back("     " + what); }
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

ExperimentConfig at(double db, std::size_t layers = 1, std::uint64_t seed = 1) {
  ExperimentConfig cfg;
  cfg.scenario.fault_impact_db = db;
  cfg.n_layers = layers;
  cfg.seed = seed;
  cfg.hyper.seed = seed;
  return cfg;
}

Lss random_lss(std::size_t len, Rng& rng) {
  std::vector<Segment> segs;
  for (std::size_t j = 0; j < len; ++j) segs.push_back({rng.uniform(0.0, 1.0), rng.uniform(-1.0, 1.0)});
  return make_lss(segs);
}

struct Moments {
  double mean, var;
};

Moments sample_moments(std::size_t n, const std::function<double()>& draw) {
  double s1 = 0.0, s2 = 0.0;
  std::vector<double> xs(n);
  for (auto& x : xs) {
    x = draw();
    s1 += x;
  }
  const double mean = s1 / static_cast<double>(n);
  for (double x : xs) s2 += (x - mean) * (x - mean);
  return {mean, s2 / static_cast<double>(n - 1)};
}

/// Standard errors of a normal sample's mean and variance.
bool within_se(const Moments& m, double mean, double var, std::size_t n) {
  const double se_mean = std::sqrt(var / static_cast<double>(n));
  const double se_var = var * std::sqrt(2.0 / static_cast<double>(n - 1));
  return std::abs(m.mean - mean) <= kMcSe * se_mean && std::abs(m.var - var) <= kMcSe * se_var;
}

Outcome coefficient_oracle() {
  Outcome o;
  Rng rng(101);
  double worst = 0.0;
  for (std::size_t p : {1u, 2u}) {
    for (int c = 0; c < kCoeffDraws; ++c) {
      const auto lss = random_lss(2 * p + 1, rng);
      std::vector<double> w(p);
      for (auto& v : w) v = rng.uniform(-1.0, 1.0);
      const auto sym = expand_coefficients(w, lss), closed = closed_form_coefficients(w, lss);
      for (std::size_t j = 0; j < sym.alphas.size(); ++j) worst = std::max(worst, std::abs(sym.alphas[j] - closed.alphas[j]));
      worst = std::max(worst, std::abs(sym.beta - closed.beta));
    }
  }
  o.require(worst <= kCoeffTol, fmt("orders 1 and 2, %d draws each: max |symbolic - closed| = %.3g (tol %.0e)", kCoeffDraws, worst, kCoeffTol));
  const double w4[] = {0.3, -0.2, 0.15, 0.1};
  const auto c4 = expand_coefficients(w4, random_lss(9, rng));
  o.require(c4.alphas.size() == 9, fmt("order 4 yields %zu coefficient vectors (want 9)", c4.alphas.size()));
  return o;
}

Outcome gaussian_algebra() {
  Outcome o;
  Rng rng(202);
  int lc_ok = 0, lobe_ok = 0;
  const auto fss = enumerate_fss(3, false);
  for (int c = 0; c < kMcCases; ++c) {
    std::vector<WeightedGaussian> terms;
    const auto k = rng.uniform_int(1, 6);
    for (std::int64_t i = 0; i < k; ++i)
      terms.push_back({rng.uniform(-2, 2), Gaussian(rng.uniform(-5, 5), rng.uniform(0.2, 3))});
    const auto g = linear_combine(terms);
    const auto m = sample_moments(kMcSamples, [&] {
      double x = 0.0;
      for (const auto& t : terms) x += t.weight * (t.gaussian.mean() + t.gaussian.sd() * rng.normal());
      return x;
    });
    lc_ok += within_se(m, g.mean(), g.variance(), kMcSamples);

    const D0Pair d0{Gaussian(rng.uniform(-1, 1), rng.uniform(0.2, 1)), Gaussian(rng.uniform(-2, 0), rng.uniform(0.2, 1))};
    CoeffSet cs;
    for (int j = 0; j < 3; ++j) cs.alphas.push_back(rng.uniform(-1, 1));
    cs.beta = rng.uniform(-0.5, 0.5);
    const double gain = rng.uniform(-2, 2);
    const Fss& f = fss[static_cast<std::size_t>(rng.uniform_int(0, 7))];
    const auto lobe = lobe_params(f, cs, d0, gain);
    const auto lm = sample_moments(kMcSamples, [&] {
      double y = cs.beta;
      for (std::size_t j = 0; j < 3; ++j) {
        const Gaussian& d = d0.of(f.at_lag(j));
        y += gain * cs.alphas[j] * (d.mean() + d.sd() * rng.normal());
      }
      return y;
    });
    lobe_ok += within_se(lm, lobe.mean(), lobe.variance(), kMcSamples);
  }
  o.require(lc_ok == kMcCases, fmt("linear_combine: %d/%d cases within %.0f SE of %zu-sample mean and variance", lc_ok, kMcCases, kMcSe, kMcSamples));
  o.require(lobe_ok == kMcCases, fmt("lobe_params: %d/%d cases within %.0f SE", lobe_ok, kMcCases, kMcSe));

  const auto mix = default_normal_mixture();
  std::vector<double> w;
  for (const auto& c : mix.components()) w.push_back(c.weight);
  double total = 0.0;
  for (const auto& q : enumerate_compositions(9, 4)) total += composition_pmf(9, w, q);
  o.require(std::abs(total - 1.0) <= kPmfTol, fmt("composition_pmf over m=9, K=4 sums to %.15f", total));
  return o;
}

Outcome table_reproduction() {
  Outcome o;
  const auto run = build_models(at(15.0));
  const auto& t = run.table;
  o.note(fmt("%zu sequences, %zu instants", run.dataset.train.size() + run.dataset.val.size() + run.dataset.test.size(),
             run.stream.labels.size()));
  o.note("case   mean      sd     rel_freq");
  double sd_lo = 1e300, sd_hi = 0.0;
  for (const auto& s : t.per_fss) {
    o.note(fmt("%s  %8.4f  %6.4f  %.4f", s.fss.str().c_str(), s.mean, s.sd, s.rel_freq));
    sd_lo = std::min(sd_lo, s.sd);
    sd_hi = std::max(sd_hi, s.sd);
  }
  for (const char* m : {"NNN", "FFF"}) {
    const double f = t.find(m)->rel_freq;
    o.require(f >= kMainFreqLo && f <= kMainFreqHi, fmt("relfreq(%s) = %.4f in [%.3f, %.3f]", m, f, kMainFreqLo, kMainFreqHi));
  }
  for (const char* s : {"NNF", "NFF", "FNN", "FFN"}) {
    const double f = t.find(s)->rel_freq;
    o.require(f >= kSideFreqLo && f <= kSideFreqHi, fmt("relfreq(%s) = %.4f in [%.3f, %.3f]", s, f, kSideFreqLo, kSideFreqHi));
  }
  const double dbl = t.find("NFN")->rel_freq + t.find("FNF")->rel_freq;
  o.require(dbl < kDoubleTransitionMax, fmt("relfreq(NFN) + relfreq(FNF) = %.4f < %.2f", dbl, kDoubleTransitionMax));
  const double spread = (sd_hi - sd_lo) / sd_lo;
  o.require(spread <= kSdSpread, fmt("all 8 lobe sds equal within %.4f%% (tol %.0f%%)", 100 * spread, 100 * kSdSpread));
  return o;
}

Outcome lobe_counts() {
  Outcome o;
  const std::size_t want_layers[] = {4, 8, 12}, want_order[] = {4, 8, 16};
  const std::size_t orders[] = {1, 2, 4};
  for (std::size_t k = 1; k <= 3; ++k) {
    const auto g = multilayer_fss_growth(k);
    const auto cfg = preset(std::to_string(k) + "L1");
    const std::size_t enumerated = enumerate_fss(fss_growth(cfg).fss_length, true).size() - 2;
    o.require(g.principal_sidelobes == want_layers[k - 1] && enumerated == want_layers[k - 1],
              fmt("%zu first-order layer(s): %zu principal sidelobes (enumerated %zu, want %zu)", k, g.principal_sidelobes,
                  enumerated, want_layers[k - 1]));
  }
  for (std::size_t i = 0; i < 3; ++i) {
    const auto g = order_fss_growth(orders[i]);
    const auto cfg = preset("1L" + std::to_string(orders[i]));
    const std::size_t enumerated = enumerate_fss(fss_growth(cfg).fss_length, true).size() - 2;
    o.require(g.principal_sidelobes == want_order[i] && enumerated == want_order[i],
              fmt("order %zu: %zu principal sidelobes (enumerated %zu, want %zu)", orders[i], g.principal_sidelobes,
                  enumerated, want_order[i]));
  }
  return o;
}

Outcome model_fidelity() {
  Outcome o;
  const auto run = build_models(at(20.0));
  const auto m = evaluate(run);
  const double gap = std::abs(m.auc_rnn - m.auc_model);
  o.require(gap <= kAucGap, fmt("20 dB 1L1, 8 segments: AUC rnn %.4f, model %.4f, gap %.5f (tol %.2f)", m.auc_rnn, m.auc_model, gap, kAucGap));
  o.require(m.hist_l1_model <= kHistL1, fmt("output histogram L1, network vs main model: %.4f (tol %.2f)", m.hist_l1_model, kHistL1));
  o.require(m.hist_l1_status[0] <= kHistL1 && m.hist_l1_status[1] <= kHistL1,
            fmt("output histogram L1, network vs detailed mixture per status: normal %.4f, fault %.4f (tol %.2f)",
                m.hist_l1_status[0], m.hist_l1_status[1], kHistL1));
  for (std::size_t c = 0; c < m.traces.front().size(); ++c) {
    const double rel = m.traces.front()[c].relative();
    o.require(rel <= kTraceRel, fmt("h1 channel %zu trace RMSE %.2f%% of state RMS (tol %.0f%%)", c, 100 * rel, 100 * kTraceRel));
  }
  for (double db : {10.0, 5.0}) {
    const auto low = build_models(at(db));
    const auto lm = evaluate(low);
    o.note(fmt("documented, not checked: %2.0f dB AUC rnn %.4f, model %.4f, gap %.4f, hist L1 %.4f, h1 trace %.2f%%", db,
               lm.auc_rnn, lm.auc_model, std::abs(lm.auc_rnn - lm.auc_model), lm.hist_l1_model, 100 * lm.traces.front()[0].relative()));
  }
  return o;
}

Outcome error_consistency() {
  Outcome o;
  for (double db : {15.0, 20.0}) {
    const auto run = build_models(at(db));
    const auto m = evaluate(run);
    const double diff = std::abs(m.errors.lobe_total() - m.errors.mixture_error);
    o.require(diff <= kMassTol, fmt("%2.0f dB: sum of lobe masses %.15f vs mixture error %.15f (diff %.2g)", db,
                                    m.errors.lobe_total(), m.errors.mixture_error, diff));
    const double rel = std::abs(m.predicted_error - m.rnn_error) / m.rnn_error;
    o.require(rel <= kErrorRel, fmt("%2.0f dB: predicted error %.4f vs network %.4f over %zu instants, %.1f%% relative (tol %.0f%%)", db,
                                    m.predicted_error, m.rnn_error, m.instants, 100 * rel, 100 * kErrorRel));
  }
  return o;
}

Outcome diminishing_returns() {
  Outcome o;
  std::vector<std::uint64_t> seeds;
  for (std::uint64_t s = 1; s <= kStudySeeds; ++s) seeds.push_back(s);
  const std::vector<std::string> configs = {"1L1", "2L1", "3L1"};
  const auto r = diminishing_returns_report(at(15.0), configs, seeds);
  o.note("config  auc      empirical  predicted  side(cond)  side(product)  principal");
  for (const auto& s : r.summaries)
    o.note(fmt("%-6s  %.5f  %.4f     %.4f     %.4f      %.4f         %zu", s.config.c_str(), s.auc, s.empirical_error,
               s.predicted_error, s.side_error, s.product_side_error, s.principal_sidelobes));
  o.require(r.auc_gain[0] >= r.auc_gain[1],
            fmt("mean AUC gain 1->2 layers %.5f >= gain 2->3 layers %.5f", r.auc_gain[0], r.auc_gain[1]));
  const auto& s = r.summaries;
  const bool increasing = s[0].side_error < s[1].side_error && s[1].side_error < s[2].side_error;
  o.require(increasing, fmt("sidelobe-attributed error mass strictly increasing with depth: %.4f, %.4f, %.4f", s[0].side_error,
                            s[1].side_error, s[2].side_error));
  o.note(fmt("product weighting, for reference: %.4f, %.4f, %.4f", s[0].product_side_error, s[1].product_side_error,
             s[2].product_side_error));
  return o;
}

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

Outcome numerical_hygiene() {
  Outcome o;
  Rng rng(808);
  double worst = 0.0;
  for (int c = 0; c < kGradConfigs; ++c) {
    RnnConfig cfg;
    cfg.n_layers = static_cast<std::size_t>(rng.uniform_int(1, 3));
    cfg.order = std::size_t{1} << rng.uniform_int(0, 2);
    cfg.hidden_widths.assign(cfg.n_layers, static_cast<std::size_t>(rng.uniform_int(1, 3)));
    cfg.n_features = static_cast<std::size_t>(rng.uniform_int(1, 4));
    auto w = initialize(cfg, 900 + static_cast<std::uint64_t>(c));
    for (auto* p : parameters(w)) *p = rng.uniform(-0.8, 0.8);
    Matrix x(static_cast<std::size_t>(rng.uniform_int(3, 12)), cfg.n_features);
    for (auto& v : x.values()) v = rng.uniform(-2.0, 2.0);
    std::vector<Status> y(x.rows());
    for (auto& s : y) s = rng.uniform() < 0.5 ? Status::Fault : Status::Normal;
    auto g = loss_gradient(w, cfg, x, y).gradient;
    const auto ps = parameters(w), gs = parameters(g);
    for (std::size_t i = 0; i < ps.size(); ++i) {
      const double h = 1e-5, keep = *ps[i];
      *ps[i] = keep + h;
      const double up = sequence_loss(forward(w, cfg, x), y);
      *ps[i] = keep - h;
      const double down = sequence_loss(forward(w, cfg, x), y);
      *ps[i] = keep;
      const double fd = (up - down) / (2 * h);
      worst = std::max(worst, std::abs(fd - *gs[i]) / std::max(1.0, std::abs(fd)));
    }
  }
  o.require(worst <= kGradRel, fmt("BPTT vs central differences over %d random configs: max rel deviation %.2g (tol %.0e)", kGradConfigs, worst, kGradRel));

  double prev = build_pwl(8).sup_error();
  std::string sups = fmt("%.5f", prev);
  bool halves = true;
  for (std::size_t n : {16u, 32u}) {
    const double cur = build_pwl(n).sup_error();
    halves = halves && cur <= 0.5 * prev;
    sups += fmt(" -> %.5f", cur);
    prev = cur;
  }
  o.require(halves, "PWL sup error halves per doubling, 8 -> 16 -> 32 segments: " + sups);

  auto dataset_csv = [](std::uint64_t seed) {
    std::ostringstream os;
    write_dataset_csv(os, generate_dataset(ScenarioConfig{}, seed));
    return os.str();
  };
  o.require(dataset_csv(3) == dataset_csv(3) && dataset_csv(3) != dataset_csv(4), "dataset CSV bitwise identical per seed");

  const auto cfg = at(15.0, 1, 3);
  auto artifacts = [&] {
    const auto run = build_models(cfg);
    std::ostringstream os;
    os << checkpoint_to_json(run.rnn, run.training).dump() << metrics_to_json(evaluate(run)).dump()
       << mixtures_to_json(run.detailed).dump();
    write_lobe_table_csv(os, run.table);
    return os.str();
  };
  o.require(artifacts() == artifacts(), "checkpoint, metrics, mixtures and lobe table bitwise identical per config");
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    Outcome (*run)();
  };
  const Criterion criteria[] = {
      {1, "coefficient oracle equality", coefficient_oracle},
      {2, "gaussian algebra", gaussian_algebra},
      {3, "lobe table reproduction", table_reproduction},
      {4, "lobe-count laws", lobe_counts},
      {5, "model fidelity", model_fidelity},
      {6, "error-decomposition consistency", error_consistency},
      {7, "diminishing-returns trend", diminishing_returns},
      {8, "numerical hygiene", numerical_hygiene},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    std::printf("criterion %d: %s: %s\n", c.id, o.pass ? "PASS" : "FAIL", c.name);
    for (const auto& n : o.notes) std::printf("    %s\n", n.c_str());
    std::fflush(stdout);
    failed += !o.pass;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(std::size(criteria)) - failed, std::size(criteria));
  return failed == 0 ? 0 : 1;
}
