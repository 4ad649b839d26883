#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "lqe/metrics.hpp"
#include "lqe/model.hpp"
#include "lqe/training.hpp"

namespace lqe {

struct ModelShape {
  std::size_t hidden = 128;
  std::size_t layers = 2;
};

/// Session-ordered raw windows plus the bookkeeping needed to map a window
/// back to its session and timestamp.
struct PreparedData {
  std::vector<WindowSample> windows;
  std::vector<std::string> session_ids;
  std::vector<std::vector<std::int64_t>> timestamps;  // per session
  std::size_t feature_count = 0;

  const std::string& session_of(const WindowSample& w) const { return session_ids.at(w.session_index); }
  std::int64_t label_timestamp(const WindowSample& w) const {
    return timestamps.at(w.session_index).at(w.label_step());
  }
};

/// impute -> EMA decompose (restarting per session) -> sliding windows.
/// Throws ValidationError when no session is longer than the window.
PreparedData prepare_windows(const std::vector<SessionTrace>& traces,
                             const PreprocessConfig& config);

enum class Subset { kAll, kTrain, kValidation, kTest };

/// The part of a chronological split that `subset` names.
std::vector<WindowSample> select_subset(const std::vector<WindowSample>& windows,
                                        SplitRatio ratio, Subset subset);

struct TrainOutcome {
  LqeModel model;
  TrainHistory history;
  std::size_t train_windows = 0;
  std::size_t validation_windows = 0;
  std::size_t test_windows = 0;
  std::array<std::size_t, kNumGrades> train_histogram{};
  std::array<std::size_t, kNumGrades> oversampled_histogram{};
};

/// Full training pipeline: prepare -> split -> fit standardizer on the
/// training windows -> oversample the training windows -> standardize ->
/// train. Throws ValidationError when the data cannot fill a 10-window split.
TrainOutcome train_model(const std::vector<SessionTrace>& traces, const PreprocessConfig& config,
                         const ModelShape& shape, const TrainHyper& hyper,
                         const EarlyStopConfig& early_stop, const EpochCallback& on_epoch = {});

struct Forecast {
  double trend_dbm = 0.0;
  double noise_dbm = 0.0;
  double rsrp_dbm = 0.0;
  QualityGrade grade = QualityGrade::kVeryBad;
};

/// Standardizes raw windows with the model's statistics, runs the network in
/// eval mode and de-standardizes before grading. Throws ValidationError when
/// the windows do not match the model's feature count.
std::vector<Forecast> forecast(const LqeModel& model, const std::vector<WindowSample>& raw_windows);

/// Forecasts, grades and scores `raw_windows` against their labels and the
/// persistence baseline.
EvalReport evaluate_model(const LqeModel& model, const std::vector<WindowSample>& raw_windows);

}  // namespace lqe
