#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "lqe/lstm.hpp"
#include "lqe/preprocess.hpp"

namespace lqe {

/// Preprocessing that produced a model's training data; re-applied verbatim
/// at evaluation and prediction time.
struct PreprocessConfig {
  double tau = 120.0;
  std::size_t window = 370;
  SplitRatio split;

  void validate() const;
  bool operator==(const PreprocessConfig& o) const {
    return tau == o.tau && window == o.window && split.train == o.split.train &&
           split.validation == o.split.validation && split.test == o.split.test;
  }
};

/// A trained forecaster: network weights, the standardizer fitted on its
/// training windows, and the preprocessing configuration.
struct LqeModel {
  LstmParams params;
  Standardizer standardizer;
  PreprocessConfig config;

  std::size_t feature_count() const { return standardizer.feature_count(); }

  bool operator==(const LqeModel&) const = default;
};

inline constexpr char kModelMagic[4] = {'L', 'Q', 'E', 'M'};
inline constexpr std::uint32_t kModelFormatVersion = 1;

/// Binary model stream, all integers u32 and reals f64, little-endian:
///
///   magic "LQEM", version
///   n_features, hidden, layers, window, tau
///   split train, split validation, split test
///   channel count (2n), mean[2n], sd[2n]
///   per layer: w_input (4H x D), w_recurrent (4H x H), bias (4H)
///   head_weight (2 x H), head_bias (2)
///
/// Matrices are written row-major. Gate blocks within 4H rows are ordered
/// input, forget, candidate, output.
void save_model(std::ostream& out, const LqeModel& model);
void save_model(const std::string& path, const LqeModel& model);

/// Throws FormatError on a bad magic tag, unsupported version, inconsistent
/// dimensions or truncated stream.
LqeModel load_model(std::istream& in);
LqeModel load_model(const std::string& path);

}  // namespace lqe
