#include "lqe/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <unordered_map>

#include "lqe/error.hpp"

namespace lqe {

double smoothing_factor(double tau) {
  if (!(tau >= 1.0) || !std::isfinite(tau)) {
    throw ValidationError("span coefficient tau must be >= 1, got " + std::to_string(tau));
  }
  return 2.0 / (tau + 1.0);
}

Eigen::MatrixXd DecomposedSeries::channel_matrix() const {
  const auto n = feature_count();
  const auto len = length();
  Eigen::MatrixXd m(static_cast<Eigen::Index>(len), static_cast<Eigen::Index>(2 * n));
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t t = 0; t < len; ++t) {
      m(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(j)) = trend[j][t];
      m(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(n + j)) = noise[j][t];
    }
  }
  return m;
}

DecomposedSeries ema_decompose(const std::vector<std::vector<double>>& features, double tau) {
  const double alpha = smoothing_factor(tau);
  if (features.empty() || features.front().empty()) {
    throw ValidationError("ema_decompose: series is empty");
  }
  const auto len = features.front().size();

  DecomposedSeries out;
  out.tau = tau;
  out.trend.reserve(features.size());
  out.noise.reserve(features.size());
  for (const auto& x : features) {
    if (x.size() != len) throw ValidationError("ema_decompose: feature lengths differ");
    std::vector<double> trend(len);
    std::vector<double> noise(len);
    trend[0] = x[0];
    noise[0] = 0.0;
    for (std::size_t t = 1; t < len; ++t) {
      trend[t] = alpha * x[t] + (1.0 - alpha) * trend[t - 1];
      noise[t] = x[t] - trend[t];
    }
    out.trend.push_back(std::move(trend));
    out.noise.push_back(std::move(noise));
  }
  return out;
}

DecomposedSeries decompose_trace(const SessionTrace& trace, double tau) {
  trace.validate();
  std::vector<std::vector<double>> features(trace.feature_count());
  for (std::size_t j = 0; j < features.size(); ++j) {
    features[j].reserve(trace.size());
    for (const auto& r : trace.records) {
      if (r.missing[j]) {
        throw ValidationError("ema_decompose: session '" + trace.session_id +
                              "' still has missing values; impute first");
      }
      features[j].push_back(r.values[j]);
    }
  }
  return ema_decompose(features, tau);
}

std::vector<WindowSample> build_windows(const DecomposedSeries& dec, std::size_t window_size,
                                        std::size_t session_index) {
  if (window_size == 0) throw ValidationError("window size must be >= 1");
  const auto len = dec.length();
  if (len <= window_size) return {};

  auto series = std::make_shared<const Eigen::MatrixXd>(dec.channel_matrix());
  std::vector<WindowSample> out;
  out.reserve(len - window_size);
  for (std::size_t k = 0; k + window_size < len; ++k) {
    const auto label_t = k + window_size;
    const auto last_t = label_t - 1;
    WindowSample w;
    w.series = series;
    w.start = k;
    w.length = window_size;
    w.label = {dec.trend[0][label_t], dec.noise[0][label_t]};
    w.target_rsrp_dbm = dec.trend[0][label_t] + dec.noise[0][label_t];
    w.label_grade = grade_of(w.target_rsrp_dbm);
    w.last_rsrp_dbm = dec.trend[0][last_t] + dec.noise[0][last_t];
    w.session_index = session_index;
    out.push_back(std::move(w));
  }
  return out;
}

std::array<double, 2> Standardizer::standardize_label(const std::array<double, 2>& label) const {
  const auto n = feature_count();
  return {(label[0] - mean[0]) / sd[0], (label[1] - mean[n]) / sd[n]};
}

std::array<double, 2> Standardizer::destandardize_label(const std::array<double, 2>& label) const {
  const auto n = feature_count();
  return {label[0] * sd[0] + mean[0], label[1] * sd[n] + mean[n]};
}

Standardizer fit_standardizer(const std::vector<WindowSample>& train_windows) {
  if (train_windows.size() < 2) {
    throw ValidationError("fit_standardizer needs at least 2 training windows, got " +
                          std::to_string(train_windows.size()));
  }
  const auto channels = train_windows.front().channel_count();
  std::vector<double> sum(channels, 0.0);
  std::size_t rows = 0;
  for (const auto& w : train_windows) {
    if (w.channel_count() != channels) throw ValidationError("fit_standardizer: channel mismatch");
    if (w.standardized) throw ValidationError("fit_standardizer: windows already standardized");
    const auto block = w.inputs();
    for (Eigen::Index c = 0; c < block.cols(); ++c) sum[static_cast<std::size_t>(c)] += block.col(c).sum();
    rows += w.length;
  }

  Standardizer s;
  s.mean.resize(channels);
  s.sd.resize(channels);
  for (std::size_t c = 0; c < channels; ++c) s.mean[c] = sum[c] / static_cast<double>(rows);

  // Second pass around the mean for numerical stability.
  std::vector<double> sq(channels, 0.0);
  for (const auto& w : train_windows) {
    const auto block = w.inputs();
    for (Eigen::Index c = 0; c < block.cols(); ++c) {
      const auto cu = static_cast<std::size_t>(c);
      sq[cu] += (block.col(c).array() - s.mean[cu]).square().sum();
    }
  }
  for (std::size_t c = 0; c < channels; ++c) {
    const double sd = std::sqrt(sq[c] / static_cast<double>(rows));
    s.sd[c] = sd > 0.0 ? sd : 1.0;
  }
  return s;
}

namespace {

enum class Direction { kForward, kInverse };

std::vector<WindowSample> transform_windows(const Standardizer& st,
                                            const std::vector<WindowSample>& windows,
                                            Direction dir) {
  const auto channels = st.channel_count();
  if (channels == 0 || st.sd.size() != channels || channels % 2 != 0) {
    throw ValidationError("standardizer is malformed");
  }
  const Eigen::Map<const Eigen::RowVectorXd> mean(st.mean.data(),
                                                  static_cast<Eigen::Index>(channels));
  const Eigen::Map<const Eigen::RowVectorXd> sd(st.sd.data(), static_cast<Eigen::Index>(channels));

  std::unordered_map<const Eigen::MatrixXd*, std::shared_ptr<const Eigen::MatrixXd>> cache;
  std::vector<WindowSample> out;
  out.reserve(windows.size());
  for (const auto& w : windows) {
    if (w.channel_count() != channels) {
      throw ValidationError("standardizer has " + std::to_string(channels) +
                            " channels, window has " + std::to_string(w.channel_count()));
    }
    const bool forward = dir == Direction::kForward;
    if (w.standardized == forward) {
      throw ValidationError(forward ? "window is already standardized"
                                    : "window is not standardized");
    }
    auto& mapped = cache[w.series.get()];
    if (!mapped) {
      Eigen::MatrixXd m = *w.series;
      if (forward) {
        m = (m.rowwise() - mean).array().rowwise() / sd.array();
      } else {
        m = (m.array().rowwise() * sd.array()).matrix().rowwise() + mean;
      }
      mapped = std::make_shared<const Eigen::MatrixXd>(std::move(m));
    }
    WindowSample t = w;
    t.series = mapped;
    t.label = forward ? st.standardize_label(w.label) : st.destandardize_label(w.label);
    t.standardized = forward;
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace

std::vector<WindowSample> apply_standardizer(const Standardizer& standardizer,
                                             const std::vector<WindowSample>& windows) {
  return transform_windows(standardizer, windows, Direction::kForward);
}

std::vector<WindowSample> invert_standardizer(const Standardizer& standardizer,
                                              const std::vector<WindowSample>& windows) {
  return transform_windows(standardizer, windows, Direction::kInverse);
}

DatasetSplit split_dataset(const std::vector<WindowSample>& windows, SplitRatio ratio) {
  if (windows.size() < 10) {
    throw ValidationError("split_dataset needs at least 10 windows, got " +
                          std::to_string(windows.size()));
  }
  if (ratio.total() == 0) throw ValidationError("split ratio must be positive");
  const auto total = windows.size();
  const auto n_train = total * ratio.train / ratio.total();
  const auto n_val = total * ratio.validation / ratio.total();

  DatasetSplit split;
  const auto begin = windows.begin();
  split.train.assign(begin, begin + static_cast<std::ptrdiff_t>(n_train));
  split.validation.assign(begin + static_cast<std::ptrdiff_t>(n_train),
                          begin + static_cast<std::ptrdiff_t>(n_train + n_val));
  split.test.assign(begin + static_cast<std::ptrdiff_t>(n_train + n_val), windows.end());
  return split;
}

std::array<std::size_t, kNumGrades> grade_histogram(const std::vector<WindowSample>& windows) {
  std::array<std::size_t, kNumGrades> counts{};
  for (const auto& w : windows) ++counts[grade_index(w.label_grade)];
  return counts;
}

std::vector<WindowSample> oversample(const std::vector<WindowSample>& train_windows,
                                     std::uint64_t seed) {
  if (train_windows.empty()) throw ValidationError("oversample: no training windows");

  std::array<std::vector<std::size_t>, kNumGrades> members;
  for (std::size_t i = 0; i < train_windows.size(); ++i) {
    members[grade_index(train_windows[i].label_grade)].push_back(i);
  }
  std::size_t majority = 0;
  for (const auto& m : members) majority = std::max(majority, m.size());

  std::mt19937_64 rng(seed);
  std::vector<WindowSample> out = train_windows;
  for (const auto& m : members) {
    if (m.empty() || m.size() == majority) continue;
    std::uniform_int_distribution<std::size_t> pick(0, m.size() - 1);
    for (std::size_t k = m.size(); k < majority; ++k) out.push_back(train_windows[m[pick(rng)]]);
  }
  return out;
}

}  // namespace lqe
