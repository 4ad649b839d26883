#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <memory>
#include <vector>

#include "lqe/grading.hpp"
#include "lqe/trace_io.hpp"

namespace lqe {

/// EMA smoothing factor for span coefficient `tau`: 2 / (tau + 1).
/// Throws ValidationError for tau < 1.
double smoothing_factor(double tau);

/// Per-feature trend and noise channels of one session. trend + noise
/// reproduces the input; trend[j][0] equals the first input value.
struct DecomposedSeries {
  std::vector<std::vector<double>> trend;  // [feature][t]
  std::vector<std::vector<double>> noise;  // [feature][t]
  double tau = 0.0;

  std::size_t feature_count() const { return trend.size(); }
  std::size_t length() const { return trend.empty() ? 0 : trend.front().size(); }

  /// L x 2n matrix, row t = [trend_1..trend_n, noise_1..noise_n].
  Eigen::MatrixXd channel_matrix() const;
};

/// Trend via x~_0 = x_0, x~_t = a x_t + (1 - a) x~_{t-1}; noise = x - x~.
/// `features[j]` is the j-th feature's series. Throws ValidationError when a
/// series is empty or lengths differ.
DecomposedSeries ema_decompose(const std::vector<std::vector<double>>& features, double tau);

/// Decomposes an already imputed session. Throws ValidationError if any value
/// is still flagged missing.
DecomposedSeries decompose_trace(const SessionTrace& trace, double tau);

/// One training example. The input matrix is a row block of a channel matrix
/// shared between overlapping windows of the same session.
struct WindowSample {
  std::shared_ptr<const Eigen::MatrixXd> series;  // L x 2n
  std::size_t start = 0;
  std::size_t length = 0;
  /// (RSRP trend, RSRP noise) at step start + length. Standardized once
  /// apply_standardizer has run.
  std::array<double, 2> label{};
  /// Grade of the raw label RSRP (trend + noise, dBm).
  QualityGrade label_grade = QualityGrade::kVeryBad;
  double target_rsrp_dbm = 0.0;
  /// Raw RSRP at the final input step, used by the persistence baseline.
  double last_rsrp_dbm = 0.0;
  std::size_t session_index = 0;
  bool standardized = false;

  std::size_t channel_count() const { return static_cast<std::size_t>(series->cols()); }
  std::size_t label_step() const { return start + length; }
  auto inputs() const { return series->middleRows(static_cast<Eigen::Index>(start),
                                                  static_cast<Eigen::Index>(length)); }
};

/// Sliding windows of `window_size` steps with stride 1. A session of length
/// L yields max(L - N, 0) windows. Throws ValidationError for N = 0.
std::vector<WindowSample> build_windows(const DecomposedSeries& dec, std::size_t window_size,
                                        std::size_t session_index = 0);

/// Per-channel z-score statistics over the 2n input channels.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> sd;

  std::size_t channel_count() const { return mean.size(); }
  std::size_t feature_count() const { return mean.size() / 2; }

  /// Standardized label to (trend, noise) in dBm.
  std::array<double, 2> destandardize_label(const std::array<double, 2>& label) const;
  std::array<double, 2> standardize_label(const std::array<double, 2>& label) const;

  bool operator==(const Standardizer&) const = default;
};

/// Population mean and SD over every time step of every window. Channels
/// with zero spread get SD = 1. Throws ValidationError for fewer than two
/// windows or mismatched channel counts.
Standardizer fit_standardizer(const std::vector<WindowSample>& train_windows);

/// (x - mean) / sd channel-wise on inputs; labels use the RSRP trend and
/// RSRP noise channel statistics. Windows that share a series keep sharing
/// the standardized copy. Throws ValidationError on channel-count mismatch or
/// on windows that are already standardized.
std::vector<WindowSample> apply_standardizer(const Standardizer& standardizer,
                                             const std::vector<WindowSample>& windows);

/// Exact inverse of apply_standardizer.
std::vector<WindowSample> invert_standardizer(const Standardizer& standardizer,
                                              const std::vector<WindowSample>& windows);

struct SplitRatio {
  unsigned train = 7;
  unsigned validation = 2;
  unsigned test = 1;

  unsigned total() const { return train + validation + test; }
};

struct DatasetSplit {
  std::vector<WindowSample> train;
  std::vector<WindowSample> validation;
  std::vector<WindowSample> test;
};

/// Chronological split of session-ordered windows: the first floor(7/10)
/// go to train, the next floor(2/10) to validation, the rest to test.
/// Throws ValidationError for fewer than 10 windows.
DatasetSplit split_dataset(const std::vector<WindowSample>& windows, SplitRatio ratio = {});

/// Number of windows per grade.
std::array<std::size_t, kNumGrades> grade_histogram(const std::vector<WindowSample>& windows);

/// Random oversampling: for each represented grade, duplicates of its
/// windows drawn uniformly with replacement are appended until every
/// represented grade matches the majority count. The input prefix is kept
/// as is. Throws ValidationError on empty input.
std::vector<WindowSample> oversample(const std::vector<WindowSample>& train_windows,
                                     std::uint64_t seed);

}  // namespace lqe
