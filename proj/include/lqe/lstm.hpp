#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace lqe {

/// Outputs of the regression head: standardized (RSRP trend, RSRP noise).
inline constexpr Eigen::Index kHeadOutputs = 2;

/// Weights of one LSTM layer. Gate rows are stacked in the order
/// input, forget, candidate, output; each block has `hidden` rows.
struct LayerParams {
  Eigen::MatrixXd w_input;      // 4H x D
  Eigen::MatrixXd w_recurrent;  // 4H x H
  Eigen::VectorXd bias;         // 4H

  bool operator==(const LayerParams& o) const {
    return w_input == o.w_input && w_recurrent == o.w_recurrent && bias == o.bias;
  }
};

/// Stacked LSTM with a linear head on the top layer's last hidden state.
/// Also used as the gradient container, since gradients share the shape.
struct LstmParams {
  std::vector<LayerParams> layers;
  Eigen::MatrixXd head_weight;  // 2 x H
  Eigen::VectorXd head_bias;    // 2

  /// All-zero parameters of the given shape.
  static LstmParams zeros(std::size_t input_size, std::size_t hidden_size, std::size_t layer_count);

  /// Weights uniform in +-1/sqrt(fan_in), zero biases except forget gates at 1.
  static LstmParams initialized(std::size_t input_size, std::size_t hidden_size,
                                std::size_t layer_count, std::uint64_t seed);

  std::size_t input_size() const;
  std::size_t hidden_size() const;
  std::size_t layer_count() const { return layers.size(); }
  std::size_t parameter_count() const;

  /// Flat views of every parameter block in serialization order.
  std::vector<std::span<double>> blocks();
  std::vector<std::span<const double>> blocks() const;

  bool same_shape(const LstmParams& other) const;
  bool all_finite() const;
  double squared_norm() const;

  bool operator==(const LstmParams& o) const {
    return layers == o.layers && head_weight == o.head_weight && head_bias == o.head_bias;
  }
};

using LstmGradients = LstmParams;

/// Optimiser and regularisation settings. Defaults are the full-scale values.
struct TrainHyper {
  double learning_rate = 0.001;
  std::size_t batch_size = 128;
  std::size_t max_epochs = 1000;
  double dropout_rate = 0.266;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double clip_norm = 5.0;
  std::uint64_t seed = 0;

  /// Throws ValidationError if any field is out of range.
  void validate() const;
};

/// Time-major batch: `steps[t]` is D x B, column b belongs to sample b.
struct SequenceBatch {
  std::vector<Eigen::MatrixXd> steps;

  Eigen::Index batch_size() const { return steps.empty() ? 0 : steps.front().cols(); }
  Eigen::Index input_size() const { return steps.empty() ? 0 : steps.front().rows(); }

  /// Single N x D window as a batch of one.
  static SequenceBatch from_window(const Eigen::Ref<const Eigen::MatrixXd>& window);
};

enum class Mode { kTrain, kEval };

/// Activations kept by forward for backward.
struct ForwardCache {
  struct Layer {
    std::vector<Eigen::MatrixXd> gates;  // 4H x B after activation
    std::vector<Eigen::MatrixXd> cell;   // H x B
    std::vector<Eigen::MatrixXd> cell_tanh;
    std::vector<Eigen::MatrixXd> hidden;  // H x B, feeds the recurrence
    std::vector<Eigen::MatrixXd> output;  // H x B, hidden after dropout
    std::vector<Eigen::MatrixXd> mask;    // empty when dropout is off
  };
  SequenceBatch inputs;
  std::vector<Layer> layers;
  Eigen::MatrixXd prediction;  // 2 x B
  std::size_t hidden_size = 0;
};

/// Runs the network over a batch and returns the 2 x B predictions. Hidden
/// and cell state start at zero for every call.
///
/// In kTrain mode with a positive `dropout_rate`, each layer's hidden output is
/// multiplied at every step by a Bernoulli keep mask scaled by 1/(1 - rate),
/// drawn from `rng`; eval mode never draws. `cache` may be null.
///
/// Throws ValidationError on shape mismatch or non-finite input.
Eigen::MatrixXd forward(const LstmParams& params, const SequenceBatch& batch, Mode mode,
                        double dropout_rate, std::mt19937_64* rng, ForwardCache* cache);

/// Eval-mode prediction for one N x D window.
std::array<double, 2> predict(const LstmParams& params,
                              const Eigen::Ref<const Eigen::MatrixXd>& window);

/// Mean over every scalar component of the squared residuals.
/// Throws ValidationError on size mismatch or empty input.
double mse_loss(std::span<const std::array<double, 2>> predictions,
                std::span<const std::array<double, 2>> labels);
double mse_loss(const Eigen::MatrixXd& predictions, const Eigen::MatrixXd& labels);

/// Exact gradient of mse_loss(cache.prediction, labels) by backpropagation
/// through time, averaged over the batch. `labels` is 2 x B.
LstmGradients backward(const LstmParams& params, const ForwardCache& cache,
                       const Eigen::MatrixXd& labels);

/// Scales `grads` so its global L2 norm is at most `max_norm`. Returns the
/// norm before clipping.
double clip_global_norm(LstmGradients& grads, double max_norm);

struct AdamState {
  LstmParams first_moment;
  LstmParams second_moment;
  std::uint64_t step = 0;

  static AdamState for_params(const LstmParams& params);
};

/// One bias-corrected Adam update in place. Throws TrainingError on a
/// non-finite gradient before touching any state; ValidationError on shape
/// mismatch.
void adam_step(LstmParams& params, const LstmGradients& grads, AdamState& state,
               const TrainHyper& hyper);

enum class ParamSubset { kAll, kHeadOnly };

/// Largest relative error |a - b| / max(|a|, |b|, 1e-6) between backward's
/// gradient and central differences with step `epsilon`, over the selected
/// parameters, for a single window and label. Dropout is off.
double gradient_check(const LstmParams& params, const Eigen::Ref<const Eigen::MatrixXd>& window,
                      const std::array<double, 2>& label, double epsilon,
                      ParamSubset subset = ParamSubset::kAll);

}  // namespace lqe
