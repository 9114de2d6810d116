#include "catch_amalgamated.hpp"

#include <sstream>

#include "sidelobe/io.hpp"

using namespace sidelobe;
using Catch::Matchers::WithinAbs;

namespace {

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream is(text);
  for (std::string l; std::getline(is, l);) out.push_back(l);
  return out;
}

ScenarioConfig small_scenario() {
  ScenarioConfig sc;
  sc.n_train = 6;
  sc.n_val = 2;
  sc.n_test = 2;
  return sc;
}

}  // namespace

TEST_CASE("config round trip", "[io]") {
  ExperimentConfig cfg;
  cfg.seed = 17;
  cfg.n_layers = 2;
  cfg.scenario.fault_impact_db = 12.5;
  cfg.hyper.weight_clip.reset();
  cfg.weighting = ContextWeighting::Product;
  cfg.segment_conditioned = true;
  cfg.tolerances.auc_gap = 0.01;
  const auto back = config_from_json(json::parse(config_to_json(cfg).dump()));
  CHECK(config_to_json(back) == config_to_json(cfg));
  CHECK(back.seed == 17);
  CHECK(back.hyper.seed == 17);
  CHECK_FALSE(back.hyper.weight_clip.has_value());
  CHECK(back.hyper.input_clip == cfg.hyper.input_clip);
  CHECK(back.tolerances == cfg.tolerances);
  CHECK(back.scenario.normal_mixture == cfg.scenario.normal_mixture);
  CHECK(config_hash(back) == config_hash(cfg));
}

TEST_CASE("config defaults, unknown keys and bad values", "[io]") {
  const auto d = config_from_json(json::object());
  CHECK(config_hash(d) == config_hash(ExperimentConfig{}));
  CHECK_THROWS_AS(config_from_json(json{{"sede", 1}}), std::invalid_argument);
  CHECK_THROWS_AS(config_from_json(json{{"network", {{"layerz", 2}}}}), std::invalid_argument);
  CHECK_THROWS_AS(config_from_json(json{{"network", {{"layers", 0}}}}), std::invalid_argument);
  CHECK_THROWS_AS(config_from_json(json{{"network", {{"layers", -1}}}}), std::invalid_argument);
  CHECK_THROWS_AS(config_from_json(json{{"linearizer", {{"span", "wide"}}}}), std::invalid_argument);
  CHECK_THROWS_AS(config_from_json(json{{"model", {{"weighting", "joint"}}}}), std::invalid_argument);
}

TEST_CASE("config hash is stable and sensitive", "[io]") {
  const ExperimentConfig a;
  CHECK(config_hash(a).size() == 16);
  CHECK(config_hash(a) == config_hash(a));
  ExperimentConfig b;
  b.seed = 2;
  CHECK(config_hash(a) != config_hash(b));
}

TEST_CASE("mixture round trip is bitwise", "[io]") {
  const auto mix = GaussianMixture::normalized({{1.0 / 3.0, Gaussian(-0.1, 0.7)}, {2.0 / 3.0, Gaussian(1e-8, 3.3)}});
  CHECK(mixture_from_json(json::parse(mixture_to_json(mix).dump())) == mix);
  CHECK_THROWS_AS(mixture_from_json(json{{"components", json::array()}}), std::invalid_argument);
  CHECK_THROWS_AS(mixture_from_json(json{{"components", {{{"w", 1.0}, {"mean", 0.0}}}}}), std::invalid_argument);
}

TEST_CASE("checkpoint round trip is bitwise", "[io]") {
  const auto cfg = preset("1L2");
  TrainResult tr;
  tr.weights = initialize(cfg, 3);
  tr.weights.scaling = {-97.123456789, 19.87654321};
  tr.weights.bias = 0.1 + 0.2;
  tr.weights.polarity = -1.0;
  tr.train_loss = {0.7, 0.5};
  tr.val_loss = {0.71, 0.52};
  const auto cp = checkpoint_from_json(json::parse(checkpoint_to_json(cfg, tr).dump()));
  CHECK(cp.config.name() == "1L2");
  CHECK(cp.weights.input == tr.weights.input);
  CHECK(cp.weights.feedback == tr.weights.feedback);
  CHECK(cp.weights.readout == tr.weights.readout);
  CHECK(cp.weights.bias == tr.weights.bias);
  CHECK(cp.weights.polarity == -1.0);
  CHECK(cp.weights.scaling.center == tr.weights.scaling.center);
  CHECK(cp.train_loss == tr.train_loss);

  auto broken = checkpoint_to_json(cfg, tr);
  broken["readout"] = {1.0, 2.0, 3.0};
  CHECK_THROWS_AS(checkpoint_from_json(broken), std::invalid_argument);
  broken = checkpoint_to_json(cfg, tr);
  broken["format"] = "other/9";
  CHECK_THROWS_AS(checkpoint_from_json(broken), std::invalid_argument);
}

TEST_CASE("dataset csv round trip is bitwise", "[io]") {
  const auto ds = generate_dataset(small_scenario(), 4);
  std::stringstream ss;
  write_dataset_csv(ss, ds);
  const auto text = ss.str();
  CHECK(lines(text).front() == "seq_id,t,label,f1,f2,f3,f4,f5,f6,f7,f8,f9");
  CHECK(lines(text).size() == 1 + 10 * 20);
  const auto back = read_dataset_csv(ss);
  REQUIRE(back.size() == 10);
  std::vector<const LabelledSequence*> all;
  for (const auto* split : {&ds.train, &ds.val, &ds.test})
    for (const auto& s : *split) all.push_back(&s);
  for (std::size_t i = 0; i < all.size(); ++i) {
    CHECK(back[i].features == all[i]->features);
    CHECK(back[i].labels == all[i]->labels);
    CHECK(back[i].fault_onset == all[i]->fault_onset);
  }
  std::istringstream bad("seq_id,t,label,f1\n0,1,X,3.0\n");
  CHECK_THROWS_AS(read_dataset_csv(bad), std::invalid_argument);
  const auto side = dataset_sidecar(small_scenario(), 4, ds);
  CHECK(side["sequences"]["train"] == 6);
}

TEST_CASE("histogram csv counts every sample", "[io]") {
  Rng rng(1);
  std::vector<double> xs(1000);
  for (auto& x : xs) x = rng.normal();
  std::ostringstream os;
  write_histogram_csv(os, xs, 16);
  const auto ls = lines(os.str());
  REQUIRE(ls.size() == 17);
  std::size_t total = 0;
  for (std::size_t i = 1; i < ls.size(); ++i) total += std::stoul(ls[i].substr(ls[i].rfind(',') + 1));
  CHECK(total == 1000);
}

TEST_CASE("lobe table lists principal lobes and a total", "[io]") {
  DetailedDistribution dd;
  dd.fss_length = 3;
  for (const auto& f : enumerate_fss(3, false)) {
    FssSummary s;
    s.fss = f;
    s.kind = f.uniform() ? LobeKind::Main : f.transitions() == 1 ? LobeKind::PrincipalSide : LobeKind::Neglected;
    s.count = s.kind == LobeKind::Neglected ? 0 : 10;
    s.rel_freq = s.count / 60.0;
    s.mean = 0.5;
    s.sd = 1.1;
    dd.per_fss.push_back(s);
  }
  std::ostringstream os;
  write_lobe_table_csv(os, dd);
  const auto ls = lines(os.str());
  REQUIRE(ls.size() == 8);
  CHECK(ls.front() == "case,mean,sd,rel_freq,count");
  CHECK(ls[1].rfind("NNN,", 0) == 0);
  CHECK(ls.back().rfind("Total,,,", 0) == 0);
  CHECK(ls.back().substr(ls.back().rfind(',') + 1) == "60");

  dd.per_fss[2].count = 1;  // NFN observed once
  std::ostringstream again;
  write_lobe_table_csv(again, dd);
  CHECK(lines(again.str()).size() == 9);
}

TEST_CASE("pwl and lss tables", "[io]") {
  const auto pwl = build_pwl(8, 1.75);
  std::ostringstream os;
  write_pwl_csv(os, pwl);
  const auto ls = lines(os.str());
  CHECK(ls.size() == 1 + pwl.segments().size());
  CHECK(ls[1].find("-inf") != std::string::npos);

  Trace t;
  t.layers.resize(1);
  Rng rng(3);
  t.layers[0].pre = Matrix(100, 2);
  for (auto& v : t.layers[0].pre.values()) v = rng.normal();
  RnnConfig cfg;
  cfg.hidden_widths = {2};
  const auto table = extract_lss(t, RnnWeights::zeros(cfg), 0, pwl, 1);
  const auto j = lss_to_json(table);
  CHECK(j["order"] == 1);
  for (const auto& ch : j["channels"]) {
    double total = 0.0;
    for (const auto& [_, f] : ch["frequencies"].items()) total += f.get<double>();
    CHECK_THAT(total, WithinAbs(1.0, 1e-12));
    CHECK(ch["counted"] == 98);
  }
}

TEST_CASE("coefficient table has one row per distinct sequence", "[io]") {
  const auto cfg = preset("1L1");
  auto w = initialize(cfg, 2);
  w.scaling = {-97.5, 20.0};
  for (auto& v : w.input[0].values()) v *= 3.0;
  const auto ds = generate_dataset(small_scenario(), 2);
  const auto s = concatenate(ds.train);
  const auto run = run_main_model(w, build_pwl(8, 1.75), cfg, s.features);
  std::ostringstream os;
  write_coefficient_csv(os, run, 0);
  const auto ls = lines(os.str());
  CHECK(ls.front() == "channel,lss,count,alpha_0,alpha_1,alpha_2,beta,dropped_bound");
  std::size_t distinct = 0, counted = 0;
  for (const auto& ch : run.lss[0].channels) distinct += ch.counts.size();
  for (std::size_t i = 1; i < ls.size(); ++i) {
    const auto q = ls[i].find("\",");
    counted += std::stoul(ls[i].substr(q + 2));
  }
  CHECK(ls.size() == 1 + distinct);
  CHECK(counted == run.lss[0].channels[0].counted + run.lss[0].channels[1].counted);
}
