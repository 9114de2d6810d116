#include "sidelobe/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sidelobe {

RnnConfig ExperimentConfig::rnn() const {
  RnnConfig cfg;
  cfg.n_layers = n_layers;
  cfg.order = order;
  cfg.hidden_widths.assign(n_layers, width);
  cfg.n_features = scenario.n_features;
  return cfg;
}

void ExperimentConfig::validate() const {
  scenario.validate();
  rnn().validate();
  if (pwl_segments < 1) throw std::invalid_argument("config: pwl_segments must be >= 1");
  if (!(pwl_span > 0.0)) throw std::invalid_argument("config: pwl_span must be > 0");
  if (d0_samples < 2) throw std::invalid_argument("config: d0_samples must be >= 2");
  if (hist_bins < 1) throw std::invalid_argument("config: hist_bins must be >= 1");
  if (hyper.epochs < 1 || hyper.batch < 1) throw std::invalid_argument("config: epochs and batch must be >= 1");
  if (!(hyper.learning_rate >= 0.0)) throw std::invalid_argument("config: learning_rate must be >= 0");
  if (hyper.weight_clip && !(*hyper.weight_clip > 0.0)) throw std::invalid_argument("config: weight_clip must be > 0");
  if (hyper.input_clip && !(*hyper.input_clip > 0.0)) throw std::invalid_argument("config: input_clip must be > 0");
  if (!std::isfinite(threshold)) throw std::invalid_argument("config: threshold must be finite");
}

ModelRun build_models(const ExperimentConfig& cfg, const RnnWeights* weights) {
  cfg.validate();
  ModelRun run{cfg, cfg.rnn(), {}, {}, {}, build_pwl(cfg.pwl_segments, cfg.pwl_span), {}, {}, {}, {}};
  run.dataset = generate_dataset(cfg.scenario, cfg.seed);

  std::vector<LabelledSequence> all = run.dataset.train;
  all.insert(all.end(), run.dataset.val.begin(), run.dataset.val.end());
  all.insert(all.end(), run.dataset.test.begin(), run.dataset.test.end());
  run.stream = concatenate(all);

  if (weights) {
    run.training.weights = *weights;
  } else {
    TrainHyper hyper = cfg.hyper;
    hyper.seed = cfg.seed;
    run.training = train(run.rnn, run.dataset, hyper);
  }
  const RnnWeights& w = run.training.weights;
  if (!w.all_finite()) throw NumericError("build_models: non-finite weights");

  run.main = run_main_model(w, run.pwl, run.rnn, run.stream.features);
  const auto fault_mix = shift_mixture(cfg.scenario.normal_mixture, cfg.scenario.fault_impact_db);
  run.input = build_input_model(w, cfg.scenario.normal_mixture, fault_mix, cfg.d0_samples, Rng(cfg.seed).split(7).seed());

  run.table = compose_detailed(run.main, w, run.rnn, run.stream.labels, run.input, ModelTarget::readout(),
                               ContextWeighting::Product);
  InputModel input = run.input;
  if (cfg.segment_conditioned) input.conditioned = condition_on_segments(run.main, run.stream.labels);
  run.detailed =
      compose_detailed(run.main, w, run.rnn, run.stream.labels, input, ModelTarget::readout(), cfg.weighting);
  return run;
}

std::vector<double> oriented(std::span<const double> scores, double polarity, std::size_t from) {
  std::vector<double> out;
  out.reserve(scores.size() - std::min(from, scores.size()));
  for (std::size_t i = from; i < scores.size(); ++i) out.push_back(polarity * scores[i]);
  return out;
}

double FidelityMetrics::max_trace_error() const {
  double m = 0.0;
  for (const auto& layer : traces)
    for (const auto& t : layer) m = std::max(m, t.relative());
  return m;
}

namespace {

double error_rate(std::span<const double> scores, std::span<const Status> labels, double threshold,
                  double polarity) {
  const Confusion c = confusion(scores, labels, threshold, polarity);
  return 1.0 - c.accuracy();
}

}  // namespace

FidelityMetrics evaluate(const ModelRun& run) {
  const double pol = run.training.weights.polarity;
  const double thr = run.config.threshold;
  // the detailed model starts once a full fault status window exists
  const std::size_t from = std::max(run.main.warmup, run.detailed.fss_length - 1);
  const std::span<const double> rnn_all(run.main.rnn.score), model_all(run.main.score);
  const auto rnn_s = rnn_all.subspan(from), model_s = model_all.subspan(from);
  const std::span<const Status> labels = std::span<const Status>(run.stream.labels).subspan(from);

  FidelityMetrics m;
  m.instants = labels.size();
  const auto rnn_o = oriented(rnn_s, pol), model_o = oriented(model_s, pol);
  m.auc_rnn = roc(rnn_o, labels).auc;
  m.auc_model = roc(model_o, labels).auc;
  m.best_accuracy_rnn = best_accuracy(rnn_o, labels);
  m.best_accuracy_model = best_accuracy(model_o, labels);
  m.hist_l1_model = histogram_l1(rnn_s, model_s, run.config.hist_bins);
  m.hist_l1_detailed = histogram_l1(rnn_s, run.detailed.components, run.config.hist_bins);
  for (Status st : {Status::Normal, Status::Fault}) {
    std::vector<double> own;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == st) own.push_back(rnn_s[i]);
    m.hist_l1_status[static_cast<int>(st)] =
        histogram_l1(own, run.detailed.status_components(st), run.config.hist_bins);
  }
  for (std::size_t k = 0; k < run.rnn.n_layers; ++k)
    m.traces.push_back(trace_error(run.main.output[k], run.main.rnn.layers[k].state, from));

  std::size_t agree = 0;
  for (std::size_t i = 0; i < rnn_s.size(); ++i)
    agree += (pol * (rnn_s[i] - thr) > 0.0) == (pol * (model_s[i] - thr) > 0.0);
  m.agreement = static_cast<double>(agree) / static_cast<double>(rnn_s.size());
  m.rnn_error = error_rate(rnn_s, labels, thr, pol);
  m.model_error = error_rate(model_s, labels, thr, pol);
  m.errors = decompose_errors(run.detailed, thr, pol);
  m.predicted_error = m.errors.lobe_total();
  return m;
}

std::vector<Check> fidelity_checks(const FidelityMetrics& m, const Tolerances& tol) {
  std::vector<Check> out;
  out.push_back({"auc_gap", std::abs(m.auc_rnn - m.auc_model), tol.auc_gap, true});
  out.push_back({"hist_l1_model", m.hist_l1_model, tol.hist_l1, true});
  out.push_back({"hist_l1_normal", m.hist_l1_status[0], tol.hist_l1, true});
  out.push_back({"hist_l1_fault", m.hist_l1_status[1], tol.hist_l1, true});
  out.push_back({"trace_rmse_first_layer", 0.0, tol.trace_rmse, true});
  for (const auto& t : m.traces.front()) out.back().value = std::max(out.back().value, t.relative());
  out.push_back({"agreement", m.agreement, tol.agreement, false});
  const double rel = m.rnn_error > 0.0 ? std::abs(m.predicted_error - m.rnn_error) / m.rnn_error : 0.0;
  out.push_back({"predicted_error_rel", rel, tol.error_rel, true});
  return out;
}

StudyRow study_row(const ModelRun& run, const FidelityMetrics& m) {
  StudyRow row;
  row.config = run.rnn.name();
  row.seed = run.config.seed;
  row.auc = m.auc_rnn;
  row.best_accuracy = m.best_accuracy_rnn;
  row.empirical_error = m.rnn_error;
  row.predicted_error = m.predicted_error;
  row.main_error = m.errors.main.total();
  row.side_error = m.errors.side_total();
  const ErrorDecomposition prod =
      decompose_errors(run.table, run.config.threshold, run.training.weights.polarity);
  row.product_main_error = prod.main.total();
  row.product_side_error = prod.side_total();
  row.product_predicted_error = prod.lobe_total();
  row.principal_sidelobes = fss_growth(run.rnn).principal_sidelobes;

  // lag profile of the most frequent context that is not fully saturated
  const auto& dd = run.detailed;
  double best = -1.0;
  for (std::size_t i = 0; i < dd.contexts.size(); ++i) {
    const Matrix& k = dd.contexts[i].kernel;
    std::vector<double> profile(k.rows(), 0.0);
    for (std::size_t lag = 0; lag < k.rows(); ++lag)
      for (double v : k.row(lag)) profile[lag] += v;
    if (dd.context_freq[i] <= best || std::all_of(profile.begin(), profile.end(), [](double v) { return v == 0.0; }))
      continue;
    best = dd.context_freq[i];
    row.separation = std::abs(separation_ratio(profile));
  }
  return row;
}

StudyReport diminishing_returns_report(const ExperimentConfig& base, std::span<const std::string> configs,
                                       std::span<const std::uint64_t> seeds) {
  if (configs.size() < 2) throw std::invalid_argument("diminishing_returns_report: need at least two configs");
  if (seeds.empty()) throw std::invalid_argument("diminishing_returns_report: need at least one seed");
  StudyReport report;
  for (const auto& name : configs) {
    const RnnConfig rc = preset(name, base.width, base.scenario.n_features);
    StudySummary s;
    s.config = rc.name();
    for (const auto seed : seeds) {
      ExperimentConfig cfg = base;
      cfg.n_layers = rc.n_layers;
      cfg.order = rc.order;
      cfg.seed = seed;
      const ModelRun run = build_models(cfg);
      const StudyRow row = study_row(run, evaluate(run));
      s.auc += row.auc;
      s.best_accuracy += row.best_accuracy;
      s.empirical_error += row.empirical_error;
      s.predicted_error += row.predicted_error;
      s.main_error += row.main_error;
      s.side_error += row.side_error;
      s.product_side_error += row.product_side_error;
      s.separation += row.separation;
      s.principal_sidelobes = row.principal_sidelobes;
      report.rows.push_back(row);
    }
    s.runs = seeds.size();
    const auto n = static_cast<double>(seeds.size());
    for (double* v : {&s.auc, &s.best_accuracy, &s.empirical_error, &s.predicted_error, &s.main_error,
                      &s.side_error, &s.product_side_error, &s.separation})
      *v /= n;
    report.summaries.push_back(s);
  }
  for (std::size_t i = 1; i < report.summaries.size(); ++i)
    report.auc_gain.push_back(report.summaries[i].auc - report.summaries[i - 1].auc);
  return report;
}

}  // namespace sidelobe
