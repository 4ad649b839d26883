#pragma once

#include <functional>
#include <limits>
#include <vector>

#include "lqe/lstm.hpp"
#include "lqe/preprocess.hpp"

namespace lqe {

struct EarlyStopConfig {
  std::size_t patience = 50;
  /// An epoch improves when (best - val_loss) > min_delta. Negative values
  /// tolerate small regressions.
  double min_delta = -0.0001;
};

struct EarlyStopState {
  EarlyStopConfig config;
  double best = std::numeric_limits<double>::infinity();
  std::size_t best_epoch = 0;
  std::size_t counter = 0;
};

enum class StopDecision { kContinue, kStop };

/// Records one epoch's validation loss. An improvement resets the counter
/// and lowers `best` to min(best, val_loss); anything else increments the
/// counter. Returns kStop once the counter reaches the patience limit.
StopDecision early_stop_update(EarlyStopState& state, double val_loss, std::size_t epoch);

/// Per-epoch losses; epochs are numbered from 1.
struct TrainHistory {
  std::vector<double> train_loss;
  std::vector<double> validation_loss;
  std::size_t stopped_epoch = 0;
  /// Epoch with the lowest validation loss (first one on ties).
  std::size_t best_epoch = 0;
  bool early_stopped = false;

  double best_validation_loss() const { return validation_loss.at(best_epoch - 1); }
};

struct EpochLosses {
  double train = 0.0;
  double validation = 0.0;
};

/// Epoch driver shared by train() and scripted tests. `run_epoch(epoch)`
/// trains one epoch and reports its losses; `on_new_best(epoch)` fires
/// whenever the validation loss reaches a new strict minimum, so the caller
/// can snapshot its parameters. Throws TrainingError on a non-finite loss.
TrainHistory run_epochs(std::size_t max_epochs, const EarlyStopConfig& early_stop,
                        const std::function<EpochLosses(std::size_t)>& run_epoch,
                        const std::function<void(std::size_t)>& on_new_best = {});

/// Stacks windows `indices` into a time-major batch and a 2 x B label matrix.
void assemble_batch(const std::vector<WindowSample>& windows, std::span<const std::size_t> indices,
                    SequenceBatch& batch, Eigen::MatrixXd& labels);

/// Eval-mode MSE over all windows.
double evaluate_loss(const LstmParams& params, const std::vector<WindowSample>& windows);

/// Eval-mode predictions (standardized) for every window, 2 x M.
Eigen::MatrixXd predict_windows(const LstmParams& params, const std::vector<WindowSample>& windows);

/// Batch-averaged gradient over windows `indices`, accumulated over
/// fixed-size chunks in a fixed order. Returns the train-mode batch loss.
double batch_gradient(const LstmParams& params, const std::vector<WindowSample>& windows,
                      std::span<const std::size_t> indices, double dropout_rate,
                      std::mt19937_64& rng, LstmGradients& grads);

struct TrainResult {
  LstmParams best;
  TrainHistory history;
};

using EpochCallback = std::function<void(std::size_t epoch, const EpochLosses&)>;

/// Mini-batch Adam with global-norm clipping. Each epoch shuffles the
/// training windows with a generator derived from (seed, epoch), then
/// measures eval-mode validation MSE. Returns the snapshot with the lowest
/// validation loss. Windows must already be standardized.
TrainResult train(const LstmParams& initial, const TrainHyper& hyper,
                  const EarlyStopConfig& early_stop, const std::vector<WindowSample>& train_set,
                  const std::vector<WindowSample>& validation_set,
                  const EpochCallback& on_epoch = {});

}  // namespace lqe
