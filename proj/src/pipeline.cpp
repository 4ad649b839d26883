#include "lqe/pipeline.hpp"

#include <string>

#include "lqe/error.hpp"

namespace lqe {

namespace {

constexpr std::uint64_t kOversampleSeedSalt = 0x9E3779B97F4A7C15ULL;

void check_features(const LqeModel& model, const std::vector<WindowSample>& windows) {
  for (const auto& w : windows) {
    if (w.standardized) throw ValidationError("expected raw (unstandardized) windows");
    if (w.channel_count() != model.standardizer.channel_count()) {
      throw ValidationError("model expects " + std::to_string(model.feature_count()) +
                            " features, trace has " + std::to_string(w.channel_count() / 2));
    }
    if (w.length != model.config.window) {
      throw ValidationError("model expects windows of " + std::to_string(model.config.window) +
                            " steps, got " + std::to_string(w.length));
    }
  }
}

}  // namespace

PreparedData prepare_windows(const std::vector<SessionTrace>& traces,
                             const PreprocessConfig& config) {
  config.validate();
  if (traces.empty()) throw ValidationError("no sessions to process");

  PreparedData out;
  out.feature_count = traces.front().feature_count();
  std::size_t longest = 0;
  for (std::size_t s = 0; s < traces.size(); ++s) {
    const auto& trace = traces[s];
    if (trace.feature_count() != out.feature_count) {
      throw ValidationError("sessions disagree on the feature count");
    }
    const auto imputed = impute_missing(trace);
    const auto dec = decompose_trace(imputed, config.tau);
    auto windows = build_windows(dec, config.window, s);
    out.windows.insert(out.windows.end(), std::make_move_iterator(windows.begin()),
                       std::make_move_iterator(windows.end()));
    out.session_ids.push_back(trace.session_id);
    std::vector<std::int64_t> ts;
    ts.reserve(trace.size());
    for (const auto& r : trace.records) ts.push_back(r.timestamp_s);
    out.timestamps.push_back(std::move(ts));
    longest = std::max(longest, trace.size());
  }
  if (out.windows.empty()) {
    throw ValidationError("no session is long enough for window size N = " +
                          std::to_string(config.window) + ": a session needs at least N + 1 = " +
                          std::to_string(config.window + 1) + " records, the longest has " +
                          std::to_string(longest));
  }
  return out;
}

std::vector<WindowSample> select_subset(const std::vector<WindowSample>& windows,
                                        SplitRatio ratio, Subset subset) {
  if (subset == Subset::kAll) return windows;
  auto split = split_dataset(windows, ratio);
  switch (subset) {
    case Subset::kTrain:
      return std::move(split.train);
    case Subset::kValidation:
      return std::move(split.validation);
    default:
      return std::move(split.test);
  }
}

TrainOutcome train_model(const std::vector<SessionTrace>& traces, const PreprocessConfig& config,
                         const ModelShape& shape, const TrainHyper& hyper,
                         const EarlyStopConfig& early_stop, const EpochCallback& on_epoch) {
  hyper.validate();
  const auto data = prepare_windows(traces, config);
  if (data.windows.size() < 10) {
    throw ValidationError("dataset too small for window size N = " +
                          std::to_string(config.window) + ": " +
                          std::to_string(data.windows.size()) +
                          " windows, need at least 10 (a session of N + 10 = " +
                          std::to_string(config.window + 10) + " records)");
  }
  auto split = split_dataset(data.windows, config.split);
  if (split.train.size() < 2 || split.validation.empty()) {
    throw ValidationError("split ratio leaves too few training or validation windows");
  }

  TrainOutcome out;
  out.train_windows = split.train.size();
  out.validation_windows = split.validation.size();
  out.test_windows = split.test.size();
  out.train_histogram = grade_histogram(split.train);

  const auto standardizer = fit_standardizer(split.train);
  const auto balanced = oversample(split.train, hyper.seed ^ kOversampleSeedSalt);
  out.oversampled_histogram = grade_histogram(balanced);

  const auto train_set = apply_standardizer(standardizer, balanced);
  const auto validation_set = apply_standardizer(standardizer, split.validation);

  const auto initial =
      LstmParams::initialized(2 * data.feature_count, shape.hidden, shape.layers, hyper.seed);
  auto result = train(initial, hyper, early_stop, train_set, validation_set, on_epoch);

  out.model = LqeModel{std::move(result.best), standardizer, config};
  out.history = std::move(result.history);
  return out;
}

std::vector<Forecast> forecast(const LqeModel& model, const std::vector<WindowSample>& raw_windows) {
  check_features(model, raw_windows);
  if (raw_windows.empty()) return {};
  const auto standardized = apply_standardizer(model.standardizer, raw_windows);
  const auto pred = predict_windows(model.params, standardized);
  std::vector<Forecast> out;
  out.reserve(raw_windows.size());
  for (Eigen::Index i = 0; i < pred.cols(); ++i) {
    const auto dbm = model.standardizer.destandardize_label({pred(0, i), pred(1, i)});
    Forecast f;
    f.trend_dbm = dbm[0];
    f.noise_dbm = dbm[1];
    f.rsrp_dbm = recombine(dbm[0], dbm[1]);
    f.grade = grade_of(f.rsrp_dbm);
    out.push_back(f);
  }
  return out;
}

EvalReport evaluate_model(const LqeModel& model, const std::vector<WindowSample>& raw_windows) {
  if (raw_windows.empty()) throw ValidationError("evaluate: no windows to score");
  const auto forecasts = forecast(model, raw_windows);
  const auto standardized = apply_standardizer(model.standardizer, raw_windows);

  std::vector<QualityGrade> truths;
  std::vector<QualityGrade> preds;
  truths.reserve(raw_windows.size());
  preds.reserve(raw_windows.size());
  double se_std = 0.0;
  double se_dbm = 0.0;
  double se_persist = 0.0;
  for (std::size_t i = 0; i < raw_windows.size(); ++i) {
    const auto& w = raw_windows[i];
    const auto& f = forecasts[i];
    truths.push_back(w.label_grade);
    preds.push_back(f.grade);
    const auto p = model.standardizer.standardize_label({f.trend_dbm, f.noise_dbm});
    const auto& y = standardized[i].label;
    se_std += (p[0] - y[0]) * (p[0] - y[0]) + (p[1] - y[1]) * (p[1] - y[1]);
    se_dbm += (f.rsrp_dbm - w.target_rsrp_dbm) * (f.rsrp_dbm - w.target_rsrp_dbm);
    se_persist += (w.last_rsrp_dbm - w.target_rsrp_dbm) * (w.last_rsrp_dbm - w.target_rsrp_dbm);
  }
  const double n = static_cast<double>(raw_windows.size());

  EvalReport r;
  r.confusion = confusion_matrix(truths, preds);
  r.accuracy = accuracy(r.confusion);
  r.macro_f1 = macro_f1(r.confusion);
  r.per_class_f1 = per_class_f1(r.confusion);
  r.mse_standardized = se_std / (2.0 * n);
  r.mse_dbm = se_dbm / n;

  const auto baseline = persistence_baseline(raw_windows);
  r.persistence_confusion = confusion_matrix(truths, baseline);
  r.persistence_accuracy = accuracy(r.persistence_confusion);
  r.persistence_macro_f1 = macro_f1(r.persistence_confusion);
  r.persistence_mse_dbm = se_persist / n;
  return r;
}

}  // namespace lqe
