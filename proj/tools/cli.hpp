#pragma once

#include <string>

#include "lqe/lstm.hpp"
#include "lqe/model.hpp"
#include "lqe/pipeline.hpp"
#include "lqe/report.hpp"
#include "lqe/training.hpp"

namespace lqe::cli {

/// Everything a training run depends on. Defaults are the paper preset.
struct RunConfig {
  std::string preset = "paper";
  std::vector<std::string> inputs;
  PreprocessConfig preprocess;
  ModelShape shape;
  TrainHyper hyper;
  EarlyStopConfig early_stop;

  static RunConfig paper();
  /// Scaled down for CI: N = 30, H = 16, batch 8, 50 epochs.
  static RunConfig desk();
  static RunConfig for_preset(const std::string& name);

  void validate() const;

  /// [config] section of an effective-config record.
  void to_report(Report& report) const;
  /// Overlays keys present in a [config] section.
  void merge(const Report::Section& section);
};

/// "7:2:1" -> SplitRatio. Throws ValidationError.
SplitRatio parse_split(const std::string& text);
std::string format_split(const SplitRatio& ratio);

/// Entry point of the `lqe` binary. Returns the process exit code.
int run(int argc, char** argv);

}  // namespace lqe::cli
