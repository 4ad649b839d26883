#include "lqe/lstm.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lqe/error.hpp"

namespace lqe {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;

Index idx(std::size_t v) { return static_cast<Index>(v); }

std::span<double> as_span(Eigen::MatrixXd& m) {
  return {m.data(), static_cast<std::size_t>(m.size())};
}
std::span<double> as_span(Eigen::VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}
std::span<const double> as_span(const Eigen::MatrixXd& m) {
  return {m.data(), static_cast<std::size_t>(m.size())};
}
std::span<const double> as_span(const Eigen::VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

MatrixXd sigmoid(const MatrixXd& z) {
  return (1.0 + (-z.array()).exp()).inverse().matrix();
}

void uniform_fill(Eigen::MatrixXd& m, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-bound, bound);
  // Column-major fill order is part of the determinism contract.
  for (Index c = 0; c < m.cols(); ++c) {
    for (Index r = 0; r < m.rows(); ++r) m(r, c) = u(rng);
  }
}

}  // namespace

LstmParams LstmParams::zeros(std::size_t input_size, std::size_t hidden_size,
                             std::size_t layer_count) {
  if (input_size == 0 || hidden_size == 0 || layer_count == 0) {
    throw ValidationError("LSTM input size, hidden size and layer count must be >= 1");
  }
  LstmParams p;
  const auto h = idx(hidden_size);
  for (std::size_t l = 0; l < layer_count; ++l) {
    const auto d = l == 0 ? idx(input_size) : h;
    p.layers.push_back(
        {MatrixXd::Zero(4 * h, d), MatrixXd::Zero(4 * h, h), Eigen::VectorXd::Zero(4 * h)});
  }
  p.head_weight = MatrixXd::Zero(kHeadOutputs, h);
  p.head_bias = Eigen::VectorXd::Zero(kHeadOutputs);
  return p;
}

LstmParams LstmParams::initialized(std::size_t input_size, std::size_t hidden_size,
                                   std::size_t layer_count, std::uint64_t seed) {
  LstmParams p = zeros(input_size, hidden_size, layer_count);
  std::mt19937_64 rng(seed);
  const auto h = idx(hidden_size);
  for (auto& layer : p.layers) {
    uniform_fill(layer.w_input, 1.0 / std::sqrt(static_cast<double>(layer.w_input.cols())), rng);
    uniform_fill(layer.w_recurrent, 1.0 / std::sqrt(static_cast<double>(hidden_size)), rng);
    layer.bias.segment(h, h).setOnes();
  }
  uniform_fill(p.head_weight, 1.0 / std::sqrt(static_cast<double>(hidden_size)), rng);
  return p;
}

std::size_t LstmParams::input_size() const {
  return layers.empty() ? 0 : static_cast<std::size_t>(layers.front().w_input.cols());
}

std::size_t LstmParams::hidden_size() const {
  return static_cast<std::size_t>(head_weight.cols());
}

std::size_t LstmParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& b : blocks()) n += b.size();
  return n;
}

std::vector<std::span<double>> LstmParams::blocks() {
  std::vector<std::span<double>> out;
  for (auto& l : layers) {
    out.push_back(as_span(l.w_input));
    out.push_back(as_span(l.w_recurrent));
    out.push_back(as_span(l.bias));
  }
  out.push_back(as_span(head_weight));
  out.push_back(as_span(head_bias));
  return out;
}

std::vector<std::span<const double>> LstmParams::blocks() const {
  std::vector<std::span<const double>> out;
  for (const auto& l : layers) {
    out.push_back(as_span(l.w_input));
    out.push_back(as_span(l.w_recurrent));
    out.push_back(as_span(l.bias));
  }
  out.push_back(as_span(head_weight));
  out.push_back(as_span(head_bias));
  return out;
}

bool LstmParams::same_shape(const LstmParams& o) const {
  if (layers.size() != o.layers.size()) return false;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& a = layers[l];
    const auto& b = o.layers[l];
    if (a.w_input.rows() != b.w_input.rows() || a.w_input.cols() != b.w_input.cols() ||
        a.w_recurrent.rows() != b.w_recurrent.rows() ||
        a.w_recurrent.cols() != b.w_recurrent.cols() || a.bias.size() != b.bias.size()) {
      return false;
    }
  }
  return head_weight.rows() == o.head_weight.rows() && head_weight.cols() == o.head_weight.cols() &&
         head_bias.size() == o.head_bias.size();
}

bool LstmParams::all_finite() const {
  for (const auto& b : blocks()) {
    if (!std::all_of(b.begin(), b.end(), [](double v) { return std::isfinite(v); })) return false;
  }
  return true;
}

double LstmParams::squared_norm() const {
  double s = 0.0;
  for (const auto& b : blocks()) {
    for (double v : b) s += v * v;
  }
  return s;
}

void TrainHyper::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ValidationError("learning rate must be > 0");
  }
  if (batch_size == 0) throw ValidationError("batch size must be >= 1");
  if (max_epochs == 0) throw ValidationError("epoch count must be >= 1");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw ValidationError("dropout rate must lie in [0, 1)");
  }
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw ValidationError("Adam decay rates must lie in [0, 1)");
  }
  if (!(adam_epsilon > 0.0)) throw ValidationError("Adam epsilon must be > 0");
  if (!(clip_norm > 0.0)) throw ValidationError("gradient clip norm must be > 0");
}

SequenceBatch SequenceBatch::from_window(const Eigen::Ref<const Eigen::MatrixXd>& window) {
  SequenceBatch b;
  b.steps.reserve(static_cast<std::size_t>(window.rows()));
  for (Index t = 0; t < window.rows(); ++t) b.steps.emplace_back(window.row(t).transpose());
  return b;
}

Eigen::MatrixXd forward(const LstmParams& params, const SequenceBatch& batch, Mode mode,
                        double dropout_rate, std::mt19937_64* rng, ForwardCache* cache) {
  if (batch.steps.empty()) throw ValidationError("forward: window has no time steps");
  if (params.layers.empty()) throw ValidationError("forward: network has no layers");
  const Index batch_size = batch.batch_size();
  const Index h = idx(params.hidden_size());
  if (batch.input_size() != idx(params.input_size())) {
    throw ValidationError("forward: window has " + std::to_string(batch.input_size()) +
                          " channels, network expects " + std::to_string(params.input_size()));
  }
  for (const auto& step : batch.steps) {
    if (step.rows() != batch.input_size() || step.cols() != batch_size) {
      throw ValidationError("forward: ragged batch");
    }
    if (!step.allFinite()) throw ValidationError("forward: input contains non-finite values");
  }

  const bool use_dropout = mode == Mode::kTrain && dropout_rate > 0.0;
  if (use_dropout && rng == nullptr) throw ValidationError("forward: dropout needs a random source");
  const double keep = 1.0 - dropout_rate;
  std::bernoulli_distribution keep_draw(keep);

  const auto steps = batch.steps.size();
  if (cache != nullptr) {
    cache->inputs = batch;
    cache->hidden_size = params.hidden_size();
    cache->layers.assign(params.layers.size(), {});
  }

  const std::vector<MatrixXd>* layer_in = &batch.steps;
  std::vector<MatrixXd> outputs;
  std::vector<MatrixXd> prev_outputs;

  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& lp = params.layers[l];
    MatrixXd hidden = MatrixXd::Zero(h, batch_size);
    MatrixXd cell = MatrixXd::Zero(h, batch_size);
    outputs.assign(steps, MatrixXd());
    ForwardCache::Layer* lc = cache != nullptr ? &cache->layers[l] : nullptr;
    if (lc != nullptr) {
      lc->gates.reserve(steps);
      lc->cell.reserve(steps);
      lc->cell_tanh.reserve(steps);
      lc->hidden.reserve(steps);
      if (use_dropout) lc->mask.reserve(steps);
    }

    for (std::size_t t = 0; t < steps; ++t) {
      MatrixXd z = lp.w_input * (*layer_in)[t] + lp.w_recurrent * hidden;
      z.colwise() += lp.bias;
      MatrixXd gates(4 * h, batch_size);
      gates.topRows(2 * h) = sigmoid(z.topRows(2 * h));
      gates.middleRows(2 * h, h) = z.middleRows(2 * h, h).array().tanh().matrix();
      gates.bottomRows(h) = sigmoid(z.bottomRows(h));

      cell = (gates.middleRows(h, h).array() * cell.array() +
              gates.topRows(h).array() * gates.middleRows(2 * h, h).array())
                 .matrix();
      MatrixXd cell_tanh = cell.array().tanh().matrix();
      hidden = (gates.bottomRows(h).array() * cell_tanh.array()).matrix();

      if (use_dropout) {
        MatrixXd mask(h, batch_size);
        for (Index c = 0; c < batch_size; ++c) {
          for (Index r = 0; r < h; ++r) mask(r, c) = keep_draw(*rng) ? 1.0 / keep : 0.0;
        }
        outputs[t] = (hidden.array() * mask.array()).matrix();
        if (lc != nullptr) lc->mask.push_back(std::move(mask));
      } else {
        outputs[t] = hidden;
      }

      if (lc != nullptr) {
        lc->gates.push_back(std::move(gates));
        lc->cell.push_back(cell);
        lc->cell_tanh.push_back(std::move(cell_tanh));
        lc->hidden.push_back(hidden);
      }
    }
    if (lc != nullptr) lc->output = outputs;
    prev_outputs.swap(outputs);
    layer_in = &prev_outputs;
  }

  MatrixXd prediction = params.head_weight * prev_outputs.back();
  prediction.colwise() += params.head_bias;
  if (cache != nullptr) cache->prediction = prediction;
  return prediction;
}

std::array<double, 2> predict(const LstmParams& params,
                              const Eigen::Ref<const Eigen::MatrixXd>& window) {
  const auto out = forward(params, SequenceBatch::from_window(window), Mode::kEval, 0.0, nullptr,
                           nullptr);
  return {out(0, 0), out(1, 0)};
}

double mse_loss(std::span<const std::array<double, 2>> predictions,
                std::span<const std::array<double, 2>> labels) {
  if (predictions.size() != labels.size()) {
    throw ValidationError("mse_loss: " + std::to_string(predictions.size()) +
                          " predictions vs " + std::to_string(labels.size()) + " labels");
  }
  if (predictions.empty()) throw ValidationError("mse_loss: no samples");
  double sum = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    for (std::size_t c = 0; c < 2; ++c) {
      const double r = predictions[i][c] - labels[i][c];
      sum += r * r;
    }
  }
  return sum / static_cast<double>(2 * predictions.size());
}

double mse_loss(const Eigen::MatrixXd& predictions, const Eigen::MatrixXd& labels) {
  if (predictions.rows() != labels.rows() || predictions.cols() != labels.cols()) {
    throw ValidationError("mse_loss: prediction and label shapes differ");
  }
  if (predictions.size() == 0) throw ValidationError("mse_loss: no samples");
  return (predictions - labels).squaredNorm() / static_cast<double>(predictions.size());
}

LstmGradients backward(const LstmParams& params, const ForwardCache& cache,
                       const Eigen::MatrixXd& labels) {
  if (cache.layers.size() != params.layers.size() ||
      cache.hidden_size != params.hidden_size() || cache.inputs.steps.empty() ||
      cache.inputs.input_size() != idx(params.input_size())) {
    throw ValidationError("backward: cache does not belong to these parameters");
  }
  const Index batch_size = cache.prediction.cols();
  if (labels.rows() != kHeadOutputs || labels.cols() != batch_size) {
    throw ValidationError("backward: labels must be 2 x batch");
  }
  const Index h = idx(params.hidden_size());
  const auto steps = cache.inputs.steps.size();

  LstmGradients g = LstmParams::zeros(params.input_size(), params.hidden_size(),
                                      params.layer_count());

  // d(mean of 2B squared residuals)/d(prediction)
  const MatrixXd d_pred = (cache.prediction - labels) * (2.0 / static_cast<double>(labels.size()));
  const auto& top = cache.layers.back();
  g.head_weight = d_pred * top.output.back().transpose();
  g.head_bias = d_pred.rowwise().sum();

  // Gradient w.r.t. each step's (post-dropout) output of the current layer.
  std::vector<MatrixXd> d_out(steps, MatrixXd::Zero(h, batch_size));
  d_out.back() = params.head_weight.transpose() * d_pred;

  for (std::size_t li = params.layers.size(); li-- > 0;) {
    const auto& lp = params.layers[li];
    const auto& lc = cache.layers[li];
    auto& lg = g.layers[li];
    const std::vector<MatrixXd>& inputs = li == 0 ? cache.inputs.steps : cache.layers[li - 1].output;
    const bool has_mask = !lc.mask.empty();

    std::vector<MatrixXd> d_in;
    if (li > 0) d_in.assign(steps, MatrixXd());

    MatrixXd dh_next = MatrixXd::Zero(h, batch_size);
    MatrixXd dc_next = MatrixXd::Zero(h, batch_size);
    MatrixXd dz(4 * h, batch_size);

    for (std::size_t t = steps; t-- > 0;) {
      const auto& gates = lc.gates[t];
      const auto i_gate = gates.topRows(h).array();
      const auto f_gate = gates.middleRows(h, h).array();
      const auto cand = gates.middleRows(2 * h, h).array();
      const auto o_gate = gates.bottomRows(h).array();
      const auto tc = lc.cell_tanh[t].array();

      MatrixXd dh = has_mask ? MatrixXd(d_out[t].array() * lc.mask[t].array()) : d_out[t];
      dh += dh_next;

      const MatrixXd dc =
          (dh.array() * o_gate * (1.0 - tc.square()) + dc_next.array()).matrix();

      dz.topRows(h) = (dc.array() * cand * i_gate * (1.0 - i_gate)).matrix();
      if (t > 0) {
        dz.middleRows(h, h) =
            (dc.array() * lc.cell[t - 1].array() * f_gate * (1.0 - f_gate)).matrix();
      } else {
        dz.middleRows(h, h).setZero();
      }
      dz.middleRows(2 * h, h) = (dc.array() * i_gate * (1.0 - cand.square())).matrix();
      dz.bottomRows(h) = (dh.array() * tc * o_gate * (1.0 - o_gate)).matrix();

      lg.w_input.noalias() += dz * inputs[t].transpose();
      if (t > 0) lg.w_recurrent.noalias() += dz * lc.hidden[t - 1].transpose();
      lg.bias += dz.rowwise().sum();

      if (li > 0) d_in[t] = lp.w_input.transpose() * dz;
      dh_next.noalias() = lp.w_recurrent.transpose() * dz;
      dc_next = (dc.array() * f_gate).matrix();
    }
    if (li > 0) d_out = std::move(d_in);
  }
  return g;
}

double clip_global_norm(LstmGradients& grads, double max_norm) {
  const double norm = std::sqrt(grads.squared_norm());
  if (norm > max_norm) {
    const double scale = max_norm / norm;
    for (auto b : grads.blocks()) {
      for (double& v : b) v *= scale;
    }
  }
  return norm;
}

AdamState AdamState::for_params(const LstmParams& params) {
  AdamState s;
  s.first_moment =
      LstmParams::zeros(params.input_size(), params.hidden_size(), params.layer_count());
  s.second_moment = s.first_moment;
  return s;
}

void adam_step(LstmParams& params, const LstmGradients& grads, AdamState& state,
               const TrainHyper& hyper) {
  if (!params.same_shape(grads) || !params.same_shape(state.first_moment) ||
      !params.same_shape(state.second_moment)) {
    throw ValidationError("adam_step: parameter, gradient and moment shapes differ");
  }
  if (!grads.all_finite()) {
    throw TrainingError("adam_step: gradient contains non-finite values");
  }

  const double b1 = hyper.adam_beta1;
  const double b2 = hyper.adam_beta2;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(b1, t);
  const double correction2 = 1.0 - std::pow(b2, t);

  auto p_blocks = params.blocks();
  const auto g_blocks = grads.blocks();
  auto m_blocks = state.first_moment.blocks();
  auto v_blocks = state.second_moment.blocks();
  for (std::size_t b = 0; b < p_blocks.size(); ++b) {
    auto p = p_blocks[b];
    const auto g = g_blocks[b];
    auto m = m_blocks[b];
    auto v = v_blocks[b];
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = b1 * m[k] + (1.0 - b1) * g[k];
      v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
      const double m_hat = m[k] / correction1;
      const double v_hat = v[k] / correction2;
      p[k] -= hyper.learning_rate * m_hat / (std::sqrt(v_hat) + hyper.adam_epsilon);
    }
  }
}

double gradient_check(const LstmParams& params, const Eigen::Ref<const Eigen::MatrixXd>& window,
                      const std::array<double, 2>& label, double epsilon, ParamSubset subset) {
  if (!(epsilon > 0.0)) throw ValidationError("gradient_check: epsilon must be > 0");
  const auto batch = SequenceBatch::from_window(window);
  MatrixXd labels(kHeadOutputs, 1);
  labels << label[0], label[1];

  ForwardCache cache;
  forward(params, batch, Mode::kEval, 0.0, nullptr, &cache);
  const LstmGradients analytic = backward(params, cache, labels);

  LstmParams probe = params;
  const auto loss_at = [&]() {
    return mse_loss(forward(probe, batch, Mode::kEval, 0.0, nullptr, nullptr), labels);
  };

  auto probe_blocks = probe.blocks();
  const auto grad_blocks = analytic.blocks();
  // The head weight and bias are the last two blocks.
  const std::size_t first = subset == ParamSubset::kHeadOnly ? probe_blocks.size() - 2 : 0;

  double worst = 0.0;
  for (std::size_t b = first; b < probe_blocks.size(); ++b) {
    auto block = probe_blocks[b];
    for (std::size_t k = 0; k < block.size(); ++k) {
      const double saved = block[k];
      block[k] = saved + epsilon;
      const double up = loss_at();
      block[k] = saved - epsilon;
      const double down = loss_at();
      block[k] = saved;
      const double numeric = (up - down) / (2.0 * epsilon);
      const double a = grad_blocks[b][k];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace lqe
