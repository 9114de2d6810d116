#include "sidelobe/io.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace sidelobe {

namespace {

void check_keys(const json& j, std::initializer_list<std::string_view> allowed, std::string_view where) {
  if (!j.is_object()) throw std::invalid_argument(std::string(where) + ": expected an object");
  for (const auto& [key, _] : j.items())
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw std::invalid_argument(std::string(where) + ": unknown key '" + key + "'");
}

double get_real(const json& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number()) throw std::invalid_argument(std::string(key) + ": expected a number");
  return j[key].get<double>();
}

std::size_t get_count(const json& j, const char* key, std::size_t fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j[key];
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0)
    throw std::invalid_argument(std::string(key) + ": expected a non-negative integer");
  return v.get<std::size_t>();
}

std::optional<double> get_optional(const json& j, const char* key, std::optional<double> fallback) {
  if (!j.contains(key)) return fallback;
  if (j[key].is_null()) return std::nullopt;
  return get_real(j, key, 0.0);
}

json optional_to_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json matrix_to_json(const Matrix& m) { return {{"rows", m.rows()}, {"cols", m.cols()}, {"values", m.values()}}; }

Matrix matrix_from_json(const json& j) {
  return Matrix(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(),
                j.at("values").get<std::vector<double>>());
}

std::string join(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

std::ostream& full(std::ostream& os) { return os << std::setprecision(17); }

}  // namespace

json mixture_to_json(const GaussianMixture& mix) {
  json comps = json::array();
  for (const auto& c : mix.components())
    comps.push_back({{"w", c.weight}, {"mean", c.gaussian.mean()}, {"sd", c.gaussian.sd()}});
  return {{"components", comps}};
}

GaussianMixture mixture_from_json(const json& j) {
  check_keys(j, {"components"}, "mixture");
  if (!j.contains("components") || !j["components"].is_array() || j["components"].empty())
    throw std::invalid_argument("mixture: need a non-empty components array");
  std::vector<MixtureComponent> comps;
  for (const auto& c : j["components"]) {
    check_keys(c, {"w", "mean", "sd"}, "mixture component");
    if (!c.contains("w") || !c.contains("mean") || !c.contains("sd"))
      throw std::invalid_argument("mixture component: w, mean and sd are required");
    comps.push_back({get_real(c, "w", 0.0), Gaussian(get_real(c, "mean", 0.0), get_real(c, "sd", 0.0))});
  }
  return GaussianMixture(std::move(comps));
}

json config_to_json(const ExperimentConfig& cfg) {
  const auto& s = cfg.scenario;
  const auto& h = cfg.hyper;
  const auto& t = cfg.tolerances;
  return {
      {"seed", cfg.seed},
      {"scenario",
       {{"n_features", s.n_features},
        {"seq_len", s.seq_len},
        {"fault_impact_db", s.fault_impact_db},
        {"n_train", s.n_train},
        {"n_val", s.n_val},
        {"n_test", s.n_test},
        {"normal_mixture", mixture_to_json(s.normal_mixture)}}},
      {"network", {{"layers", cfg.n_layers}, {"order", cfg.order}, {"width", cfg.width}}},
      {"training",
       {{"learning_rate", h.learning_rate},
        {"epochs", h.epochs},
        {"batch", h.batch},
        {"weight_clip", optional_to_json(h.weight_clip)},
        {"input_clip", optional_to_json(h.input_clip)}}},
      {"linearizer", {{"segments", cfg.pwl_segments}, {"span", cfg.pwl_span}}},
      {"model",
       {{"d0_samples", cfg.d0_samples},
        {"weighting", to_string(cfg.weighting)},
        {"segment_conditioned", cfg.segment_conditioned},
        {"threshold", cfg.threshold},
        {"hist_bins", cfg.hist_bins}}},
      {"tolerances",
       {{"auc_gap", t.auc_gap},
        {"hist_l1", t.hist_l1},
        {"trace_rmse", t.trace_rmse},
        {"error_rel", t.error_rel},
        {"agreement", t.agreement}}},
  };
}

ExperimentConfig config_from_json(const json& j) {
  check_keys(j, {"seed", "scenario", "network", "training", "linearizer", "model", "tolerances"}, "config");
  ExperimentConfig cfg;
  try {
    cfg.seed = get_count(j, "seed", cfg.seed);
    if (j.contains("scenario")) {
      const auto& s = j["scenario"];
      check_keys(s, {"n_features", "seq_len", "fault_impact_db", "n_train", "n_val", "n_test", "normal_mixture"},
                 "scenario");
      auto& sc = cfg.scenario;
      sc.n_features = get_count(s, "n_features", sc.n_features);
      sc.seq_len = get_count(s, "seq_len", sc.seq_len);
      sc.fault_impact_db = get_real(s, "fault_impact_db", sc.fault_impact_db);
      sc.n_train = get_count(s, "n_train", sc.n_train);
      sc.n_val = get_count(s, "n_val", sc.n_val);
      sc.n_test = get_count(s, "n_test", sc.n_test);
      if (s.contains("normal_mixture")) sc.normal_mixture = mixture_from_json(s["normal_mixture"]);
    }
    if (j.contains("network")) {
      const auto& n = j["network"];
      check_keys(n, {"layers", "order", "width"}, "network");
      cfg.n_layers = get_count(n, "layers", cfg.n_layers);
      cfg.order = get_count(n, "order", cfg.order);
      cfg.width = get_count(n, "width", cfg.width);
    }
    if (j.contains("training")) {
      const auto& t = j["training"];
      check_keys(t, {"learning_rate", "epochs", "batch", "weight_clip", "input_clip"}, "training");
      auto& h = cfg.hyper;
      h.learning_rate = get_real(t, "learning_rate", h.learning_rate);
      h.epochs = get_count(t, "epochs", h.epochs);
      h.batch = get_count(t, "batch", h.batch);
      h.weight_clip = get_optional(t, "weight_clip", h.weight_clip);
      h.input_clip = get_optional(t, "input_clip", h.input_clip);
    }
    if (j.contains("linearizer")) {
      const auto& l = j["linearizer"];
      check_keys(l, {"segments", "span"}, "linearizer");
      cfg.pwl_segments = get_count(l, "segments", cfg.pwl_segments);
      cfg.pwl_span = get_real(l, "span", cfg.pwl_span);
    }
    if (j.contains("model")) {
      const auto& m = j["model"];
      check_keys(m, {"d0_samples", "weighting", "segment_conditioned", "threshold", "hist_bins"}, "model");
      cfg.d0_samples = get_count(m, "d0_samples", cfg.d0_samples);
      if (m.contains("weighting")) cfg.weighting = parse_context_weighting(m["weighting"].get<std::string>());
      if (m.contains("segment_conditioned")) cfg.segment_conditioned = m["segment_conditioned"].get<bool>();
      cfg.threshold = get_real(m, "threshold", cfg.threshold);
      cfg.hist_bins = get_count(m, "hist_bins", cfg.hist_bins);
    }
    if (j.contains("tolerances")) {
      const auto& t = j["tolerances"];
      check_keys(t, {"auc_gap", "hist_l1", "trace_rmse", "error_rel", "agreement"}, "tolerances");
      auto& tol = cfg.tolerances;
      tol.auc_gap = get_real(t, "auc_gap", tol.auc_gap);
      tol.hist_l1 = get_real(t, "hist_l1", tol.hist_l1);
      tol.trace_rmse = get_real(t, "trace_rmse", tol.trace_rmse);
      tol.error_rel = get_real(t, "error_rel", tol.error_rel);
      tol.agreement = get_real(t, "agreement", tol.agreement);
    }
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  cfg.hyper.seed = cfg.seed;
  cfg.validate();
  return cfg;
}

std::string config_hash(const ExperimentConfig& cfg) {
  const std::string s = config_to_json(cfg).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

json checkpoint_to_json(const RnnConfig& cfg, const TrainResult& result) {
  const RnnWeights& w = result.weights;
  json input = json::array(), feedback = json::array();
  for (const auto& u : w.input) input.push_back(matrix_to_json(u));
  for (const auto& layer : w.feedback) {
    json l = json::array();
    for (const auto& m : layer) l.push_back(matrix_to_json(m));
    feedback.push_back(l);
  }
  return {
      {"format", "sidelobe-checkpoint/1"},
      {"config",
       {{"layers", cfg.n_layers},
        {"order", cfg.order},
        {"hidden_widths", cfg.hidden_widths},
        {"n_features", cfg.n_features},
        {"diagonal_feedback", cfg.diagonal_feedback}}},
      {"scaling", {{"center", w.scaling.center}, {"scale", w.scaling.scale}}},
      {"input", input},
      {"feedback", feedback},
      {"readout", w.readout},
      {"bias", w.bias},
      {"polarity", w.polarity},
      {"training", {{"train_loss", result.train_loss}, {"val_loss", result.val_loss}}},
  };
}

Checkpoint checkpoint_from_json(const json& j) {
  Checkpoint cp;
  try {
    if (j.at("format") != "sidelobe-checkpoint/1") throw std::invalid_argument("checkpoint: unknown format");
    const auto& c = j.at("config");
    cp.config.n_layers = c.at("layers").get<std::size_t>();
    cp.config.order = c.at("order").get<std::size_t>();
    cp.config.hidden_widths = c.at("hidden_widths").get<std::vector<std::size_t>>();
    cp.config.n_features = c.at("n_features").get<std::size_t>();
    cp.config.diagonal_feedback = c.at("diagonal_feedback").get<bool>();
    cp.config.validate();

    RnnWeights& w = cp.weights;
    w.scaling.center = j.at("scaling").at("center").get<double>();
    w.scaling.scale = j.at("scaling").at("scale").get<double>();
    for (const auto& u : j.at("input")) w.input.push_back(matrix_from_json(u));
    for (const auto& layer : j.at("feedback")) {
      w.feedback.emplace_back();
      for (const auto& m : layer) w.feedback.back().push_back(matrix_from_json(m));
    }
    w.readout = j.at("readout").get<std::vector<double>>();
    w.bias = j.at("bias").get<double>();
    w.polarity = j.at("polarity").get<double>();
    if (j.contains("training")) {
      cp.train_loss = j["training"].value("train_loss", std::vector<double>{});
      cp.val_loss = j["training"].value("val_loss", std::vector<double>{});
    }
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("checkpoint: ") + e.what());
  }

  const RnnWeights shape = RnnWeights::zeros(cp.config);
  bool ok = shape.input.size() == cp.weights.input.size() && shape.feedback.size() == cp.weights.feedback.size() &&
            shape.readout.size() == cp.weights.readout.size();
  for (std::size_t k = 0; ok && k < shape.input.size(); ++k) {
    ok = shape.input[k].rows() == cp.weights.input[k].rows() && shape.input[k].cols() == cp.weights.input[k].cols() &&
         shape.feedback[k].size() == cp.weights.feedback[k].size();
    for (std::size_t p = 0; ok && p < shape.feedback[k].size(); ++p)
      ok = shape.feedback[k][p].rows() == cp.weights.feedback[k][p].rows() &&
           shape.feedback[k][p].cols() == cp.weights.feedback[k][p].cols();
  }
  if (!ok) throw std::invalid_argument("checkpoint: weight shapes do not match the config");
  return cp;
}

void write_dataset_csv(std::ostream& os, const Dataset& ds) {
  std::size_t m = 0;
  for (const auto* split : {&ds.train, &ds.val, &ds.test})
    if (!split->empty()) m = split->front().features.cols();
  os << "seq_id,t,label";
  for (std::size_t f = 1; f <= m; ++f) os << ",f" << f;
  os << '\n';
  full(os);
  std::size_t id = 0;
  for (const auto* split : {&ds.train, &ds.val, &ds.test})
    for (const auto& seq : *split) {
      for (std::size_t t = 0; t < seq.length(); ++t) {
        os << id << ',' << t + 1 << ',' << to_char(seq.labels[t]);
        for (double v : seq.features.row(t)) os << ',' << v;
        os << '\n';
      }
      ++id;
    }
}

std::vector<LabelledSequence> read_dataset_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("seq_id,t,label", 0) != 0)
    throw std::invalid_argument("dataset csv: missing header");
  const auto m = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) - 2;

  std::vector<LabelledSequence> out;
  std::vector<std::vector<double>> rows;
  std::size_t current = std::numeric_limits<std::size_t>::max();
  auto flush = [&] {
    if (rows.empty()) return;
    auto& seq = out.back();
    seq.features = Matrix(rows.size(), m);
    for (std::size_t r = 0; r < rows.size(); ++r)
      for (std::size_t c = 0; c < m; ++c) seq.features(r, c) = rows[r][c];
    for (std::size_t t = 0; t < seq.labels.size(); ++t)
      if (seq.labels[t] == Status::Fault) {
        seq.fault_onset = t + 1;
        break;
      }
    rows.clear();
  };
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() != m + 3) throw std::invalid_argument("dataset csv: wrong column count");
    const auto id = static_cast<std::size_t>(std::stoull(cells[0]));
    if (id != current) {
      flush();
      out.emplace_back();
      current = id;
    }
    if (cells[2] != "N" && cells[2] != "F") throw std::invalid_argument("dataset csv: label must be N or F");
    out.back().labels.push_back(cells[2] == "F" ? Status::Fault : Status::Normal);
    std::vector<double> row;
    for (std::size_t c = 0; c < m; ++c) row.push_back(std::stod(cells[3 + c]));
    rows.push_back(std::move(row));
  }
  flush();
  return out;
}

json dataset_sidecar(const ScenarioConfig& cfg, std::uint64_t seed, const Dataset& ds) {
  return {
      {"seed", seed},
      {"split_streams", {{"train", 0}, {"val", 1}, {"test", 2}}},
      {"sequences", {{"train", ds.train.size()}, {"val", ds.val.size()}, {"test", ds.test.size()}}},
      {"n_features", cfg.n_features},
      {"seq_len", cfg.seq_len},
      {"fault_impact_db", cfg.fault_impact_db},
      {"normal_mixture", mixture_to_json(cfg.normal_mixture)},
      {"fault_mixture", mixture_to_json(shift_mixture(cfg.normal_mixture, cfg.fault_impact_db))},
  };
}

void write_histogram_csv(std::ostream& os, std::span<const double> samples, std::size_t bins) {
  if (samples.empty() || bins == 0) throw std::invalid_argument("histogram: empty input");
  const auto [mn, mx] = std::minmax_element(samples.begin(), samples.end());
  const double lo = *mn, width = (*mx - *mn) / static_cast<double>(bins);
  std::vector<std::size_t> counts(bins, 0);
  for (double v : samples) {
    const auto i = width == 0.0 ? 0 : static_cast<std::ptrdiff_t>(std::floor((v - lo) / width));
    ++counts[static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(i, 0, static_cast<std::ptrdiff_t>(bins) - 1))];
  }
  os << "bin_left,bin_right,count\n";
  full(os);
  for (std::size_t i = 0; i < bins; ++i)
    os << lo + width * static_cast<double>(i) << ',' << lo + width * static_cast<double>(i + 1) << ',' << counts[i]
       << '\n';
}

void write_lobe_table_csv(std::ostream& os, const DetailedDistribution& dd) {
  os << "case,mean,sd,rel_freq,count\n";
  full(os);
  double freq = 0.0;
  std::size_t count = 0;
  for (const auto& s : dd.per_fss) {
    if (s.kind == LobeKind::Neglected && s.count == 0) continue;
    os << s.fss.str() << ',' << s.mean << ',' << s.sd << ',' << s.rel_freq << ',' << s.count << '\n';
    freq += s.rel_freq;
    count += s.count;
  }
  os << "Total,,," << freq << ',' << count << '\n';
}

void write_pwl_csv(std::ostream& os, const PwlApprox& pwl) {
  os << "segment,left,right,gradient,intercept\n";
  full(os);
  const auto& b = pwl.breakpoints();
  const auto& s = pwl.segments();
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double left = i == 0 ? -std::numeric_limits<double>::infinity() : b[i - 1];
    const double right = i == b.size() ? std::numeric_limits<double>::infinity() : b[i];
    os << i << ',' << left << ',' << right << ',' << s[i].gradient << ',' << s[i].intercept << '\n';
  }
}

void write_coefficient_csv(std::ostream& os, const MainModelRun& run, std::size_t layer) {
  const LssTable& table = run.lss.at(layer);
  const std::size_t span = 2 * table.order + 1;
  os << "channel,lss,count";
  for (std::size_t j = 0; j < span; ++j) os << ",alpha_" << j;
  os << ",beta,dropped_bound\n";
  full(os);
  for (std::size_t c = 0; c < table.channels.size(); ++c) {
    const auto& ch = table.channels[c];
    std::map<std::vector<int>, std::size_t> first;
    for (std::size_t n = 0; n < ch.per_instant.size(); ++n)
      if (!ch.per_instant[n].touches_start()) first.try_emplace(ch.per_instant[n].indices, n);
    for (const auto& [key, cnt] : ch.counts) {
      const auto it = first.find(key);
      if (it == first.end()) continue;
      const CoeffSet& cs = run.coeffs.at(layer)[c][it->second];
      os << c << ",\"" << join(key) << "\"," << cnt;
      for (double a : cs.alphas) os << ',' << a;
      os << ',' << cs.beta << ',' << cs.dropped_bound << '\n';
    }
  }
}

json lss_to_json(const LssTable& table) {
  json channels = json::array();
  for (const auto& ch : table.channels) {
    json freq = json::object();
    for (const auto& [key, cnt] : ch.counts) freq[join(key)] = ch.relative_frequency(key);
    channels.push_back({{"counted", ch.counted}, {"frequencies", freq}});
  }
  return {{"layer", table.layer}, {"order", table.order}, {"channels", channels}};
}

json mixtures_to_json(const DetailedDistribution& dd) {
  json out = {{"target", dd.target.str()},
              {"fss_length", dd.fss_length},
              {"weighting", to_string(dd.weighting)},
              {"independence_gap", dd.independence_gap}};
  for (Status s : {Status::Normal, Status::Fault}) {
    json comps = json::array();
    for (const auto& c : dd.status_components(s))
      comps.push_back({{"fss", c.fss.str()},
                       {"context", c.context},
                       {"kind", to_string(c.kind)},
                       {"w", c.weight},
                       {"mean", c.moments.mean},
                       {"sd", c.moments.sd()}});
    out[s == Status::Fault ? "fault" : "normal"] = {{"components", comps}};
  }
  return out;
}

json metrics_to_json(const FidelityMetrics& m) {
  json traces = json::array();
  for (const auto& layer : m.traces) {
    json l = json::array();
    for (const auto& t : layer) l.push_back({{"rmse", t.rmse}, {"reference_rms", t.reference_rms}, {"relative", t.relative()}});
    traces.push_back(l);
  }
  auto split = [](const ErrorSplit& s) { return json{{"fp", s.fp}, {"fn", s.fn}, {"total", s.total()}}; };
  return {
      {"instants", m.instants},
      {"auc_rnn", m.auc_rnn},
      {"auc_model", m.auc_model},
      {"best_accuracy_rnn", m.best_accuracy_rnn},
      {"best_accuracy_model", m.best_accuracy_model},
      {"hist_l1_model", m.hist_l1_model},
      {"hist_l1_detailed", m.hist_l1_detailed},
      {"hist_l1_normal", m.hist_l1_status[0]},
      {"hist_l1_fault", m.hist_l1_status[1]},
      {"traces", traces},
      {"agreement", m.agreement},
      {"rnn_error", m.rnn_error},
      {"model_error", m.model_error},
      {"predicted_error", m.predicted_error},
      {"errors",
       {{"main", split(m.errors.main)},
        {"principal_side", split(m.errors.principal_side)},
        {"neglected", split(m.errors.neglected)},
        {"mixture_error", m.errors.mixture_error}}},
  };
}

json checks_to_json(std::span<const Check> checks) {
  json out = json::array();
  for (const auto& c : checks)
    out.push_back({{"name", c.name}, {"value", c.value}, {"bound", c.bound}, {"upper", c.upper}, {"passed", c.passed()}});
  return out;
}

void write_error_csv(std::ostream& os, const ErrorDecomposition& d) {
  os << "fss,context,kind,weight,side,mass\n";
  full(os);
  for (const auto& l : d.lobes)
    os << l.fss.str() << ',' << l.context << ',' << to_string(l.kind) << ',' << l.weight << ','
       << (l.fss.current() == Status::Fault ? "FN" : "FP") << ',' << l.mass << '\n';
}

void write_roc_csv(std::ostream& os, const RocCurve& curve) {
  os << "threshold,fpr,tpr\n";
  full(os);
  for (const auto& p : curve.points) os << p.threshold << ',' << p.fpr << ',' << p.tpr << '\n';
}

void write_study_csv(std::ostream& os, const StudyReport& r) {
  os << "config,seed,auc,best_accuracy,empirical_error,predicted_error,main_error,side_error,"
        "product_main_error,product_side_error,product_predicted_error,principal_sidelobes,separation\n";
  full(os);
  for (const auto& x : r.rows)
    os << x.config << ',' << x.seed << ',' << x.auc << ',' << x.best_accuracy << ',' << x.empirical_error << ','
       << x.predicted_error << ',' << x.main_error << ',' << x.side_error << ',' << x.product_main_error << ','
       << x.product_side_error << ',' << x.product_predicted_error << ',' << x.principal_sidelobes << ','
       << x.separation << '\n';
}

json study_to_json(const StudyReport& r) {
  json summaries = json::array();
  for (const auto& s : r.summaries)
    summaries.push_back({{"config", s.config},
                         {"runs", s.runs},
                         {"auc", s.auc},
                         {"best_accuracy", s.best_accuracy},
                         {"empirical_error", s.empirical_error},
                         {"predicted_error", s.predicted_error},
                         {"main_error", s.main_error},
                         {"side_error", s.side_error},
                         {"product_side_error", s.product_side_error},
                         {"principal_sidelobes", s.principal_sidelobes},
                         {"separation", s.separation}});
  return {{"summaries", summaries}, {"auc_gain", r.auc_gain}};
}

}  // namespace sidelobe
