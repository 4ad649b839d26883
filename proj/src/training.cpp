#include "lqe/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "lqe/error.hpp"

namespace lqe {

namespace {

// Windows per forward/backward pass. Bounds cache memory at long windows.
constexpr std::size_t kChunk = 32;
constexpr std::size_t kEvalChunk = 256;

std::mt19937_64 derived_rng(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
  return std::mt19937_64(seq);
}

void scale_add(LstmGradients& acc, const LstmGradients& g, double weight) {
  auto a = acc.blocks();
  const auto b = g.blocks();
  for (std::size_t k = 0; k < a.size(); ++k) {
    for (std::size_t i = 0; i < a[k].size(); ++i) a[k][i] += weight * b[k][i];
  }
}

}  // namespace

StopDecision early_stop_update(EarlyStopState& state, double val_loss, std::size_t epoch) {
  if (state.best - val_loss > state.config.min_delta) {
    if (val_loss < state.best) {
      state.best = val_loss;
      state.best_epoch = epoch;
    }
    state.counter = 0;
  } else {
    ++state.counter;
  }
  return state.counter >= state.config.patience ? StopDecision::kStop : StopDecision::kContinue;
}

TrainHistory run_epochs(std::size_t max_epochs, const EarlyStopConfig& early_stop,
                        const std::function<EpochLosses(std::size_t)>& run_epoch,
                        const std::function<void(std::size_t)>& on_new_best) {
  if (early_stop.patience == 0) throw ValidationError("early-stopping patience must be >= 1");
  TrainHistory history;
  EarlyStopState state{early_stop};
  double best = std::numeric_limits<double>::infinity();

  for (std::size_t epoch = 1; epoch <= max_epochs; ++epoch) {
    const auto losses = run_epoch(epoch);
    if (!std::isfinite(losses.train) || !std::isfinite(losses.validation)) {
      throw TrainingError("training diverged: non-finite loss at epoch " + std::to_string(epoch));
    }
    history.train_loss.push_back(losses.train);
    history.validation_loss.push_back(losses.validation);
    history.stopped_epoch = epoch;
    if (losses.validation < best) {
      best = losses.validation;
      history.best_epoch = epoch;
      if (on_new_best) on_new_best(epoch);
    }
    if (early_stop_update(state, losses.validation, epoch) == StopDecision::kStop) {
      history.early_stopped = true;
      break;
    }
  }
  return history;
}

void assemble_batch(const std::vector<WindowSample>& windows, std::span<const std::size_t> indices,
                    SequenceBatch& batch, Eigen::MatrixXd& labels) {
  if (indices.empty()) throw ValidationError("assemble_batch: no windows");
  const auto& first = windows.at(indices.front());
  const auto steps = first.length;
  const auto channels = static_cast<Eigen::Index>(first.channel_count());
  const auto b = static_cast<Eigen::Index>(indices.size());

  batch.steps.resize(steps);
  for (auto& s : batch.steps) s.resize(channels, b);
  labels.resize(kHeadOutputs, b);
  for (Eigen::Index col = 0; col < b; ++col) {
    const auto& w = windows.at(indices[static_cast<std::size_t>(col)]);
    if (w.length != steps || static_cast<Eigen::Index>(w.channel_count()) != channels) {
      throw ValidationError("assemble_batch: windows differ in shape");
    }
    const auto block = w.inputs();
    for (std::size_t t = 0; t < steps; ++t) {
      batch.steps[t].col(col) = block.row(static_cast<Eigen::Index>(t)).transpose();
    }
    labels(0, col) = w.label[0];
    labels(1, col) = w.label[1];
  }
}

Eigen::MatrixXd predict_windows(const LstmParams& params, const std::vector<WindowSample>& windows) {
  Eigen::MatrixXd out(kHeadOutputs, static_cast<Eigen::Index>(windows.size()));
  SequenceBatch batch;
  Eigen::MatrixXd labels;
  std::vector<std::size_t> idx;
  for (std::size_t begin = 0; begin < windows.size(); begin += kEvalChunk) {
    const auto end = std::min(windows.size(), begin + kEvalChunk);
    idx.resize(end - begin);
    std::iota(idx.begin(), idx.end(), begin);
    assemble_batch(windows, idx, batch, labels);
    out.middleCols(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(end - begin)) =
        forward(params, batch, Mode::kEval, 0.0, nullptr, nullptr);
  }
  return out;
}

double evaluate_loss(const LstmParams& params, const std::vector<WindowSample>& windows) {
  if (windows.empty()) throw ValidationError("evaluate_loss: no windows");
  const auto pred = predict_windows(params, windows);
  Eigen::MatrixXd labels(kHeadOutputs, pred.cols());
  for (std::size_t i = 0; i < windows.size(); ++i) {
    labels(0, static_cast<Eigen::Index>(i)) = windows[i].label[0];
    labels(1, static_cast<Eigen::Index>(i)) = windows[i].label[1];
  }
  return mse_loss(pred, labels);
}

double batch_gradient(const LstmParams& params, const std::vector<WindowSample>& windows,
                      std::span<const std::size_t> indices, double dropout_rate,
                      std::mt19937_64& rng, LstmGradients& grads) {
  grads = LstmParams::zeros(params.input_size(), params.hidden_size(), params.layer_count());
  const double total = static_cast<double>(indices.size());
  double loss = 0.0;
  SequenceBatch batch;
  Eigen::MatrixXd labels;
  ForwardCache cache;
  for (std::size_t begin = 0; begin < indices.size(); begin += kChunk) {
    const auto chunk = indices.subspan(begin, std::min(kChunk, indices.size() - begin));
    assemble_batch(windows, chunk, batch, labels);
    const auto pred = forward(params, batch, Mode::kTrain, dropout_rate, &rng, &cache);
    const double weight = static_cast<double>(chunk.size()) / total;
    loss += weight * mse_loss(pred, labels);
    scale_add(grads, backward(params, cache, labels), weight);
  }
  return loss;
}

TrainResult train(const LstmParams& initial, const TrainHyper& hyper,
                  const EarlyStopConfig& early_stop, const std::vector<WindowSample>& train_set,
                  const std::vector<WindowSample>& validation_set, const EpochCallback& on_epoch) {
  hyper.validate();
  if (train_set.empty() || validation_set.empty()) {
    throw ValidationError("train: training and validation sets must be non-empty");
  }
  for (const auto* set : {&train_set, &validation_set}) {
    for (const auto& w : *set) {
      if (!w.standardized) throw ValidationError("train: windows must be standardized first");
    }
  }

  LstmParams params = initial;
  AdamState adam = AdamState::for_params(params);
  TrainResult result{params, {}};
  std::vector<std::size_t> order(train_set.size());
  LstmGradients grads;

  const auto run_epoch = [&](std::size_t epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto shuffle_rng = derived_rng(hyper.seed, epoch, 0);
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double train_loss = 0.0;
    const std::span<const std::size_t> all(order);
    for (std::size_t begin = 0, batch_no = 0; begin < order.size();
         begin += hyper.batch_size, ++batch_no) {
      const auto batch = all.subspan(begin, std::min(hyper.batch_size, order.size() - begin));
      auto dropout_rng = derived_rng(hyper.seed, epoch, batch_no + 1);
      const double loss = batch_gradient(params, train_set, batch, hyper.dropout_rate,
                                         dropout_rng, grads);
      if (!std::isfinite(loss)) {
        throw TrainingError("training diverged: non-finite loss at epoch " + std::to_string(epoch));
      }
      train_loss += loss * static_cast<double>(batch.size());
      clip_global_norm(grads, hyper.clip_norm);
      try {
        adam_step(params, grads, adam, hyper);
      } catch (const TrainingError& e) {
        throw TrainingError(std::string(e.what()) + " at epoch " + std::to_string(epoch));
      }
    }
    const EpochLosses losses{train_loss / static_cast<double>(order.size()),
                             evaluate_loss(params, validation_set)};
    if (on_epoch) on_epoch(epoch, losses);
    return losses;
  };

  result.history = run_epochs(hyper.max_epochs, early_stop, run_epoch,
                              [&](std::size_t) { result.best = params; });
  return result;
}

}  // namespace lqe
