// Reproduction pipeline driver: gen, train, linearize, model, compare, study,
// report. Every run writes into <out>/<config hash>/ and records its
// artifacts in manifest.json there.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "sidelobe/io.hpp"
#include "sidelobe/pipeline.hpp"
#include "sidelobe/plot.hpp"

#ifndef SIDELOBE_VERSION
#define SIDELOBE_VERSION "dev"
#endif

namespace fs = std::filesystem;
using namespace sidelobe;

namespace {

enum Exit { kOk = 0, kConfigError = 2, kNumericError = 3, kAssertionError = 4 };

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct AssertionFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<double> impact;
  std::optional<std::size_t> layers;
  std::optional<std::size_t> order;
  std::optional<std::size_t> segments;
  std::string out = "runs";
  std::string preset;
  std::size_t seeds = 5;
};

std::string timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

ExperimentConfig load_config(const Flags& f) {
  try {
    ExperimentConfig cfg;
    if (!f.config.empty()) {
      std::ifstream in(f.config);
      if (!in) throw ConfigError("cannot open config file " + f.config);
      cfg = config_from_json(json::parse(in));
    }
    if (f.seed) cfg.seed = *f.seed;
    if (f.impact) cfg.scenario.fault_impact_db = *f.impact;
    if (f.layers) cfg.n_layers = *f.layers;
    if (f.order) cfg.order = *f.order;
    if (f.segments) cfg.pwl_segments = *f.segments;
    cfg.hyper.seed = cfg.seed;
    cfg.validate();
    return cfg;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
}

/// Run directory plus its manifest; artifacts are registered as written.
class Run {
 public:
  Run(const ExperimentConfig& cfg, const std::string& out, std::string subcommand)
      : cfg_(cfg), hash_(config_hash(cfg)), dir_(fs::path(out) / hash_), subcommand_(std::move(subcommand)) {
    fs::create_directories(dir_);
    fs::remove(dir_ / "error.json");
    const fs::path mpath = dir_ / "manifest.json";
    if (fs::exists(mpath)) {
      std::ifstream in(mpath);
      manifest_ = json::parse(in, nullptr, false);
      if (manifest_.is_discarded()) manifest_ = json::object();
    }
    manifest_["config_hash"] = hash_;
    manifest_["tool_version"] = SIDELOBE_VERSION;
    manifest_["config"] = config_to_json(cfg);
    manifest_["seeds"] = {{"dataset", cfg.seed},
                          {"training", cfg.seed},
                          {"input_model", Rng(cfg.seed).split(7).seed()}};
    manifest_["runs"][subcommand_] = {{"started", timestamp()}, {"status", "running"}, {"artifacts", json::array()}};
    write_text("config.json", config_to_json(cfg).dump(2) + "\n");
  }

  const fs::path& dir() const { return dir_; }
  const ExperimentConfig& config() const { return cfg_; }

  void write_text(const std::string& name, const std::string& text) {
    std::ofstream(dir_ / name, std::ios::binary) << text;
    record(name);
  }
  void write_json(const std::string& name, const json& j) { write_text(name, j.dump(2) + "\n"); }
  template <class F>
  void write_with(const std::string& name, F&& f) {
    std::ostringstream os;
    f(os);
    write_text(name, os.str());
  }

  void finish(const std::string& status, const json& error = nullptr) {
    auto& r = manifest_["runs"][subcommand_];
    r["status"] = status;
    r["finished"] = timestamp();
    if (!error.is_null()) {
      r["error"] = error;
      for (auto& a : r["artifacts"]) a["valid"] = false;
    }
    std::ofstream(dir_ / "manifest.json") << manifest_.dump(2) << "\n";
  }

 private:
  void record(const std::string& name) {
    auto& arts = manifest_["runs"][subcommand_]["artifacts"];
    for (const auto& a : arts)
      if (a["path"] == name) return;
    arts.push_back({{"path", name}, {"valid", true}});
  }

  ExperimentConfig cfg_;
  std::string hash_;
  fs::path dir_;
  std::string subcommand_;
  json manifest_ = json::object();
};

/// Weights from the run directory's checkpoint, training (and saving) them
/// first when absent.
RnnWeights weights_for(Run& run) {
  const fs::path cp = run.dir() / "checkpoint.json";
  if (fs::exists(cp)) {
    std::ifstream in(cp);
    return checkpoint_from_json(json::parse(in)).weights;
  }
  const ExperimentConfig& cfg = run.config();
  const Dataset ds = generate_dataset(cfg.scenario, cfg.seed);
  TrainHyper hyper = cfg.hyper;
  hyper.seed = cfg.seed;
  const TrainResult tr = train(cfg.rnn(), ds, hyper);
  run.write_json("checkpoint.json", checkpoint_to_json(cfg.rnn(), tr));
  return tr.weights;
}

void cmd_gen(Run& run) {
  const ExperimentConfig& cfg = run.config();
  const Dataset ds = generate_dataset(cfg.scenario, cfg.seed);
  run.write_with("dataset.csv", [&](std::ostream& os) { write_dataset_csv(os, ds); });
  run.write_json("dataset.json", dataset_sidecar(cfg.scenario, cfg.seed, ds));
}

void cmd_train(Run& run) {
  const ExperimentConfig& cfg = run.config();
  const Dataset ds = generate_dataset(cfg.scenario, cfg.seed);
  TrainHyper hyper = cfg.hyper;
  hyper.seed = cfg.seed;
  const TrainResult tr = train(cfg.rnn(), ds, hyper);
  run.write_json("checkpoint.json", checkpoint_to_json(cfg.rnn(), tr));
  run.write_with("loss.csv", [&](std::ostream& os) {
    os << "epoch,train_loss,val_loss\n" << std::setprecision(17);
    for (std::size_t e = 0; e < tr.train_loss.size(); ++e)
      os << e + 1 << ',' << tr.train_loss[e] << ',' << (e < tr.val_loss.size() ? tr.val_loss[e] : 0.0) << '\n';
  });
}

void cmd_linearize(Run& run) {
  const RnnWeights w = weights_for(run);
  const ModelRun m = build_models(run.config(), &w);
  run.write_with("pwl.csv", [&](std::ostream& os) { write_pwl_csv(os, m.pwl); });
  for (std::size_t k = 0; k < m.rnn.n_layers; ++k) {
    const std::string suffix = "_layer" + std::to_string(k + 1);
    run.write_with("coefficients" + suffix + ".csv", [&](std::ostream& os) { write_coefficient_csv(os, m.main, k); });
    run.write_json("lss" + suffix + ".json", lss_to_json(m.main.lss[k]));
  }
}

void cmd_model(Run& run) {
  const RnnWeights w = weights_for(run);
  const ModelRun m = build_models(run.config(), &w);
  run.write_with("lobes.csv", [&](std::ostream& os) { write_lobe_table_csv(os, m.table); });
  run.write_with("lobes_detailed.csv", [&](std::ostream& os) { write_lobe_table_csv(os, m.detailed); });
  run.write_json("mixtures.json", mixtures_to_json(m.detailed));
  run.write_with("scores.csv", [&](std::ostream& os) {
    os << "n,label,rnn,model\n" << std::setprecision(17);
    for (std::size_t n = 0; n < m.main.score.size(); ++n)
      os << n << ',' << to_char(m.stream.labels[n]) << ',' << m.main.rnn.score[n] << ',' << m.main.score[n] << '\n';
  });
}

void cmd_compare(Run& run) {
  const RnnWeights w = weights_for(run);
  const ModelRun m = build_models(run.config(), &w);
  const FidelityMetrics metrics = evaluate(m);
  const auto checks = fidelity_checks(metrics, run.config().tolerances);

  const std::size_t from = m.main.score.size() - metrics.instants;
  const std::span<const double> rnn_s = std::span<const double>(m.main.rnn.score).subspan(from);
  const std::span<const double> model_s = std::span<const double>(m.main.score).subspan(from);
  const std::span<const Status> labels = std::span<const Status>(m.stream.labels).subspan(from);
  const double pol = w.polarity;
  const RocCurve roc_rnn = roc(oriented(rnn_s, pol), labels), roc_model = roc(oriented(model_s, pol), labels);

  run.write_json("metrics.json", metrics_to_json(metrics));
  run.write_json("checks.json", checks_to_json(checks));
  run.write_with("roc_rnn.csv", [&](std::ostream& os) { write_roc_csv(os, roc_rnn); });
  run.write_with("roc_model.csv", [&](std::ostream& os) { write_roc_csv(os, roc_model); });
  run.write_with("histogram_rnn.csv", [&](std::ostream& os) { write_histogram_csv(os, rnn_s, m.config.hist_bins); });
  run.write_with("histogram_model.csv",
                 [&](std::ostream& os) { write_histogram_csv(os, model_s, m.config.hist_bins); });
  run.write_with("errors.csv", [&](std::ostream& os) { write_error_csv(os, metrics.errors); });
  run.write_with("lobes.csv", [&](std::ostream& os) { write_lobe_table_csv(os, m.table); });
  run.write_with("traces.csv", [&](std::ostream& os) {
    os << "n,layer,channel,rnn,model\n" << std::setprecision(17);
    for (std::size_t k = 0; k < m.rnn.n_layers; ++k)
      for (std::size_t n = 0; n < m.main.output[k].rows(); ++n)
        for (std::size_t c = 0; c < m.main.output[k].cols(); ++c)
          os << n << ',' << k + 1 << ',' << c << ',' << m.main.rnn.layers[k].state(n, c) << ','
             << m.main.output[k](n, c) << '\n';
  });
  const std::vector<RocSeries> series{{"RNN", roc_rnn}, {"main model", roc_model}};
  run.write_text("roc.svg", roc_svg(series, m.rnn.name() + " ROC"));
  run.write_text("lobes.svg", lobe_svg(rnn_s, m.detailed, m.config.threshold, pol, m.config.hist_bins,
                                       m.rnn.name() + " readout lobes"));

  std::string failed;
  for (const auto& c : checks)
    if (!c.passed()) failed += (failed.empty() ? "" : ", ") + c.name;
  if (!failed.empty()) throw AssertionFailure("tolerance checks failed: " + failed);
}

void cmd_study(Run& run, const Flags& f) {
  std::vector<std::string> configs;
  if (f.preset == "paper") configs = preset_names();
  else if (!f.preset.empty()) throw ConfigError("unknown study preset: " + f.preset);
  else configs = {"1L1", "2L1", "3L1"};
  std::vector<std::uint64_t> seeds;
  for (std::size_t i = 0; i < f.seeds; ++i) seeds.push_back(run.config().seed + i);
  const StudyReport r = diminishing_returns_report(run.config(), configs, seeds);
  run.write_with("study.csv", [&](std::ostream& os) { write_study_csv(os, r); });
  run.write_json("study.json", study_to_json(r));
}

void cmd_report(const Flags& f) {
  const fs::path out(f.out);
  if (!fs::is_directory(out)) throw ConfigError("no run directory at " + f.out);
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(out))
    if (e.is_directory() && fs::exists(e.path() / "manifest.json")) dirs.push_back(e.path());
  std::sort(dirs.begin(), dirs.end());

  json index = json::array();
  std::ostringstream csv;
  csv << "config_hash,network,impact_db,seed,segments,auc_rnn,auc_model,hist_l1_model,rnn_error,predicted_error\n"
      << std::setprecision(17);
  for (const auto& d : dirs) {
    std::ifstream min(d / "manifest.json");
    const json man = json::parse(min, nullptr, false);
    if (man.is_discarded()) continue;
    const ExperimentConfig cfg = config_from_json(man.at("config"));
    json entry = {{"config_hash", man.value("config_hash", "")}, {"network", cfg.name()}, {"runs", man["runs"]}};
    if (fs::exists(d / "metrics.json")) {
      std::ifstream mm(d / "metrics.json");
      const json m = json::parse(mm);
      entry["metrics"] = m;
      csv << man.value("config_hash", "") << ',' << cfg.name() << ',' << cfg.scenario.fault_impact_db << ','
          << cfg.seed << ',' << cfg.pwl_segments << ',' << m["auc_rnn"].get<double>() << ','
          << m["auc_model"].get<double>() << ',' << m["hist_l1_model"].get<double>() << ','
          << m["rnn_error"].get<double>() << ',' << m["predicted_error"].get<double>() << '\n';
    }
    index.push_back(entry);
  }
  std::ofstream(out / "report.json") << json{{"tool_version", SIDELOBE_VERSION}, {"runs", index}}.dump(2) << "\n";
  std::ofstream(out / "report.csv") << csv.str();
}

void add_common(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config, "JSON config file")->check(CLI::ExistingFile);
  sub->add_option("--seed", f.seed, "dataset and training seed");
  sub->add_option("--impact", f.impact, "fault impact in dB")->check(CLI::NonNegativeNumber);
  sub->add_option("--layers", f.layers, "hidden layers")->check(CLI::IsMember({1, 2, 3}));
  sub->add_option("--order", f.order, "feedback order")->check(CLI::IsMember({1, 2, 4}));
  sub->add_option("--segments", f.segments, "PWL interior segments")->check(CLI::PositiveNumber);
  sub->add_option("--out", f.out, "output root")->capture_default_str();
}

int fail(int code, const std::string& kind, const std::string& message, const std::string& sub, Run* run) {
  const json err = {{"error", {{"code", code}, {"kind", kind}, {"message", message}, {"subcommand", sub}}}};
  std::cerr << err.dump() << std::endl;
  if (run) {
    try {
      run->write_json("error.json", err);
      run->finish("failed", err["error"]);
    } catch (...) {
    }
  }
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Explanatory models for small recurrent fault detectors"};
  app.set_version_flag("--version", SIDELOBE_VERSION);
  app.require_subcommand(1);
  Flags f;
  const std::vector<std::pair<std::string, std::string>> subs = {
      {"gen", "generate the labelled dataset"},
      {"train", "train the network and save a checkpoint"},
      {"linearize", "emit PWL, segment sequence and coefficient tables"},
      {"model", "build the main and detailed models"},
      {"compare", "compare the models with the network and check tolerances"},
      {"study", "depth/order sweep over several seeds"},
      {"report", "collate the runs under --out"}};
  for (const auto& [name, help] : subs) {
    auto* sub = app.add_subcommand(name, help);
    add_common(sub, f);
    if (name == "study") {
      sub->add_option("--preset", f.preset, "'paper' runs all five networks");
      sub->add_option("--seeds", f.seeds, "number of consecutive seeds")->check(CLI::PositiveNumber);
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return fail(kConfigError, "config", e.what(), "", nullptr);
  }
  const std::string sub = app.get_subcommands().front()->get_name();

  std::unique_ptr<Run> run;
  try {
    if (sub == "report") {
      cmd_report(f);
      return kOk;
    }
    const ExperimentConfig cfg = load_config(f);
    run = std::make_unique<Run>(cfg, f.out, sub);
    if (sub == "gen") cmd_gen(*run);
    else if (sub == "train") cmd_train(*run);
    else if (sub == "linearize") cmd_linearize(*run);
    else if (sub == "model") cmd_model(*run);
    else if (sub == "compare") cmd_compare(*run);
    else if (sub == "study") cmd_study(*run, f);
    run->finish("ok");
    std::cout << run->dir().string() << std::endl;
    return kOk;
  } catch (const ConfigError& e) {
    return fail(kConfigError, "config", e.what(), sub, run.get());
  } catch (const AssertionFailure& e) {
    const json err = {{"error", {{"code", kAssertionError}, {"kind", "assertion"}, {"message", e.what()}, {"subcommand", sub}}}};
    std::cerr << err.dump() << std::endl;
    // the comparison artifacts are complete; only the verdict is negative
    run->write_json("error.json", err);
    run->finish("assertion-failed");
    return kAssertionError;
  } catch (const std::invalid_argument& e) {
    return fail(kConfigError, "config", e.what(), sub, run.get());
  } catch (const std::exception& e) {
    return fail(kNumericError, "numeric", e.what(), sub, run.get());
  }
}
