#include "catch_amalgamated.hpp"

#include <algorithm>
#include <sstream>

#include "sidelobe/io.hpp"
#include "sidelobe/pipeline.hpp"

using namespace sidelobe;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

ExperimentConfig at_impact(double db, std::size_t layers = 1) {
  ExperimentConfig cfg;
  cfg.scenario.fault_impact_db = db;
  cfg.n_layers = layers;
  return cfg;
}

}  // namespace

TEST_CASE("main model tracks a one-layer network at 20 dB", "[pipeline]") {
  const auto run = build_models(at_impact(20.0));
  const auto m = evaluate(run);
  CHECK(m.instants == 4800 - 2);
  for (const auto& t : m.traces.front()) CHECK(t.relative() <= 0.05);
  CHECK(m.agreement >= 0.97);
  CHECK(std::abs(m.auc_rnn - m.auc_model) <= 0.03);
  CHECK(m.auc_rnn >= 0.95);
  for (const auto& c : fidelity_checks(m, run.config.tolerances)) {
    INFO(c.name << " = " << c.value << " vs " << c.bound);
    CHECK(c.passed());
  }
}

TEST_CASE("lobe masses add up to the mixture error and single transitions dominate", "[pipeline]") {
  const auto run = build_models(at_impact(15.0));
  const auto m = evaluate(run);
  CHECK(std::abs(m.errors.lobe_total() - m.errors.mixture_error) <= 1e-12);
  CHECK_THAT(m.predicted_error, WithinRel(m.rnn_error, 0.20));

  std::map<std::string, double> by;
  for (const auto& [f, mass] : error_by_fss(m.errors)) by[f.str()] = mass;
  // the onset (NNF) and end-of-fault boundary (FFN) lobes carry the most sidelobe mass
  for (const char* other : {"NFN", "NFF", "FNN", "FNF"}) {
    CHECK(by["NNF"] > by[other]);
    CHECK(by["FFN"] > by[other]);
  }
}

TEST_CASE("table view has equal within-lobe sd", "[pipeline]") {
  const auto run = build_models(at_impact(15.0));
  REQUIRE(run.table.per_fss.size() == 8);
  const double sd = run.table.per_fss.front().sd;
  for (const auto& s : run.table.per_fss) CHECK_THAT(s.sd, WithinRel(sd, 0.01));
  const auto* nnn = run.table.find("NNN");
  const auto* fff = run.table.find("FFF");
  // main lobes sit on opposite sides with every sidelobe between them
  for (const auto& s : run.table.per_fss) {
    CHECK(s.mean >= std::min(nnn->mean, fff->mean) - 1e-12);
    CHECK(s.mean <= std::max(nnn->mean, fff->mean) + 1e-12);
  }
}

TEST_CASE("runs are bitwise deterministic", "[pipeline]") {
  const auto cfg = at_impact(15.0);
  const auto a = build_models(cfg), b = build_models(cfg);
  CHECK(a.main.rnn.score == b.main.rnn.score);
  CHECK(a.main.score == b.main.score);
  std::ostringstream ja, jb;
  ja << metrics_to_json(evaluate(a)).dump();
  jb << metrics_to_json(evaluate(b)).dump();
  CHECK(ja.str() == jb.str());

  // reusing trained weights gives the same run
  const auto c = build_models(cfg, &a.training.weights);
  CHECK(c.main.score == a.main.score);
}

TEST_CASE("segment-conditioned model stays normalized", "[pipeline]") {
  auto cfg = at_impact(15.0);
  cfg.segment_conditioned = true;
  const auto run = build_models(cfg);
  double total = 0.0;
  for (const auto& c : run.detailed.components) total += c.weight;
  CHECK_THAT(total, WithinAbs(1.0, 1e-12));
  const auto m = evaluate(run);
  CHECK(std::abs(m.errors.lobe_total() - m.errors.mixture_error) <= 1e-12);
}

TEST_CASE("study structure", "[pipeline]") {
  const std::vector<std::string> configs = {"1L1", "2L1"};
  const std::vector<std::uint64_t> seeds = {1};
  const auto r = diminishing_returns_report(at_impact(15.0), configs, seeds);
  REQUIRE(r.summaries.size() == 2);
  REQUIRE(r.rows.size() == 2);
  REQUIRE(r.auc_gain.size() == 1);
  CHECK(r.summaries[0].principal_sidelobes == 4);
  CHECK(r.summaries[1].principal_sidelobes == 8);
  CHECK_THAT(r.auc_gain[0], WithinAbs(r.summaries[1].auc - r.summaries[0].auc, 1e-15));
  for (const auto& row : r.rows) {
    CHECK(row.separation > 0.0);
    CHECK(row.side_error <= row.predicted_error);
  }
  CHECK_THROWS_AS(diminishing_returns_report(at_impact(15.0), std::span(configs).first(1), seeds), std::invalid_argument);
}

TEST_CASE("config validation", "[pipeline]") {
  ExperimentConfig cfg;
  cfg.pwl_segments = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.pwl_span = -1.0;
  CHECK_THROWS_AS(build_models(cfg), std::invalid_argument);
  cfg = {};
  cfg.order = 3;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.order = 4;
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.name() == "1L4");
}
