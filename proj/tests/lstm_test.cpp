#include "lqe/lstm.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "lqe/error.hpp"

using namespace lqe;

namespace {

Eigen::MatrixXd random_window(std::size_t steps, std::size_t channels, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd w(static_cast<Eigen::Index>(steps), static_cast<Eigen::Index>(channels));
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = n(rng);
  return w;
}

SequenceBatch stack(const std::vector<Eigen::MatrixXd>& windows) {
  SequenceBatch b;
  const auto steps = windows.front().rows();
  for (Eigen::Index t = 0; t < steps; ++t) {
    Eigen::MatrixXd m(windows.front().cols(), static_cast<Eigen::Index>(windows.size()));
    for (std::size_t k = 0; k < windows.size(); ++k) {
      m.col(static_cast<Eigen::Index>(k)) = windows[k].row(t).transpose();
    }
    b.steps.push_back(m);
  }
  return b;
}

LstmGradients grad_of(const LstmParams& p, const SequenceBatch& b, const Eigen::MatrixXd& labels) {
  ForwardCache cache;
  forward(p, b, Mode::kEval, 0.0, nullptr, &cache);
  return backward(p, cache, labels);
}

double max_abs_diff(const LstmParams& a, const LstmParams& b) {
  double worst = 0.0;
  const auto x = a.blocks();
  const auto y = b.blocks();
  for (std::size_t k = 0; k < x.size(); ++k) {
    for (std::size_t i = 0; i < x[k].size(); ++i) {
      worst = std::max(worst, std::abs(x[k][i] - y[k][i]));
    }
  }
  return worst;
}

}  // namespace

TEST(LstmParams, ShapesAndInit) {
  const auto p = LstmParams::initialized(4, 8, 2, 1);
  EXPECT_EQ(p.input_size(), 4u);
  EXPECT_EQ(p.hidden_size(), 8u);
  EXPECT_EQ(p.layer_count(), 2u);
  EXPECT_EQ(p.layers[0].w_input.rows(), 32);
  EXPECT_EQ(p.layers[0].w_input.cols(), 4);
  EXPECT_EQ(p.layers[1].w_input.cols(), 8);
  EXPECT_EQ(p.parameter_count(), (32u * 4 + 32 * 8 + 32) + (32u * 8 + 32 * 8 + 32) + 2 * 8 + 2);
  EXPECT_LE(p.layers[0].w_input.cwiseAbs().maxCoeff(), 0.5);
  EXPECT_LE(p.layers[0].w_recurrent.cwiseAbs().maxCoeff(), 1.0 / std::sqrt(8.0));
  EXPECT_EQ(p.layers[1].bias.segment(0, 8).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(p.layers[1].bias.segment(8, 8), Eigen::VectorXd::Ones(8));
  EXPECT_EQ(p.head_bias, Eigen::VectorXd::Zero(2));
  EXPECT_EQ(LstmParams::initialized(4, 8, 2, 1), p);
  EXPECT_FALSE(LstmParams::initialized(4, 8, 2, 2) == p);
}

TEST(Forward, ZeroNetworkReturnsHeadBias) {
  auto p = LstmParams::zeros(4, 5, 2);
  p.head_bias << 0.25, -1.5;
  const auto out = predict(p, random_window(7, 4, 3));
  EXPECT_EQ(out[0], 0.25);
  EXPECT_EQ(out[1], -1.5);
}

TEST(Forward, EvalIsDeterministic) {
  const auto p = LstmParams::initialized(4, 6, 2, 11);
  const auto w = random_window(9, 4, 5);
  EXPECT_EQ(predict(p, w), predict(p, w));
}

TEST(Forward, TrainWithoutDropoutEqualsEval) {
  const auto p = LstmParams::initialized(4, 6, 2, 11);
  const auto b = SequenceBatch::from_window(random_window(9, 4, 5));
  std::mt19937_64 rng(1);
  const auto train = forward(p, b, Mode::kTrain, 0.0, &rng, nullptr);
  const auto eval = forward(p, b, Mode::kEval, 0.266, nullptr, nullptr);
  EXPECT_EQ(train, eval);
}

TEST(Forward, DropoutChangesTrainOutput) {
  const auto p = LstmParams::initialized(4, 6, 2, 11);
  const auto b = SequenceBatch::from_window(random_window(9, 4, 5));
  std::mt19937_64 r1(1);
  std::mt19937_64 r2(2);
  const auto a = forward(p, b, Mode::kTrain, 0.5, &r1, nullptr);
  const auto c = forward(p, b, Mode::kTrain, 0.5, &r2, nullptr);
  EXPECT_NE(a, c);
  std::mt19937_64 r3(1);
  EXPECT_EQ(a, forward(p, b, Mode::kTrain, 0.5, &r3, nullptr));
}

TEST(Forward, NoStateLeaksBetweenWindows) {
  const auto p = LstmParams::initialized(4, 6, 2, 2);
  const auto a = random_window(8, 4, 1);
  const auto b = random_window(8, 4, 2);
  const auto before = predict(p, b);
  predict(p, a);
  EXPECT_EQ(predict(p, b), before);
  // Batched columns are independent too.
  const auto both = forward(p, stack({a, b}), Mode::kEval, 0.0, nullptr, nullptr);
  EXPECT_NEAR(both(0, 1), before[0], 1e-14);
  EXPECT_NEAR(both(1, 1), before[1], 1e-14);
}

TEST(Forward, Errors) {
  const auto p = LstmParams::initialized(4, 6, 2, 2);
  EXPECT_THROW(predict(p, random_window(5, 3, 1)), ValidationError);
  auto w = random_window(5, 4, 1);
  w(2, 1) = std::nan("");
  EXPECT_THROW(predict(p, w), ValidationError);
  const auto b = SequenceBatch::from_window(random_window(5, 4, 1));
  EXPECT_THROW(forward(p, b, Mode::kTrain, 0.3, nullptr, nullptr), ValidationError);
}

TEST(MseLoss, Values) {
  const std::vector<std::array<double, 2>> y = {{1.0, 3.0}, {-2.0, 0.5}};
  EXPECT_EQ(mse_loss(y, y), 0.0);
  const std::vector<std::array<double, 2>> zero = {{0.0, 0.0}};
  const std::vector<std::array<double, 2>> one = {{1.0, 3.0}};
  EXPECT_EQ(mse_loss(zero, one), 5.0);
  const std::vector<std::array<double, 2>> p = {{1.5, 2.0}, {-1.0, 1.0}};
  const std::vector<std::array<double, 2>> p2 = {{2.0, 1.0}, {0.0, 1.5}};  // residuals doubled
  EXPECT_DOUBLE_EQ(mse_loss(p2, y), 4.0 * mse_loss(p, y));
}

TEST(MseLoss, Errors) {
  const std::vector<std::array<double, 2>> a = {{0.0, 0.0}};
  const std::vector<std::array<double, 2>> b = {{0.0, 0.0}, {1.0, 1.0}};
  EXPECT_THROW(mse_loss(a, b), ValidationError);
  EXPECT_THROW(mse_loss(std::span<const std::array<double, 2>>{},
                        std::span<const std::array<double, 2>>{}),
               ValidationError);
}

TEST(Backward, ZeroResidualGivesZeroGradient) {
  const auto p = LstmParams::initialized(4, 5, 2, 3);
  const auto b = SequenceBatch::from_window(random_window(6, 4, 9));
  ForwardCache cache;
  const auto pred = forward(p, b, Mode::kEval, 0.0, nullptr, &cache);
  const auto g = backward(p, cache, pred);
  EXPECT_EQ(g.squared_norm(), 0.0);
}

TEST(Backward, DuplicatedSampleDoublesSummedGradient) {
  const auto p = LstmParams::initialized(4, 5, 2, 3);
  const auto a = random_window(6, 4, 9);
  Eigen::MatrixXd y1(2, 1);
  y1 << 0.3, -0.7;
  Eigen::MatrixXd y2(2, 2);
  y2 << 0.3, 0.3, -0.7, -0.7;
  const auto single = grad_of(p, stack({a}), y1);
  const auto doubled = grad_of(p, stack({a, a}), y2);
  // Gradients are batch means, so a batch of two copies sums to twice one copy.
  auto summed = doubled;
  for (auto blk : summed.blocks()) {
    for (double& v : blk) v *= 2.0;
  }
  auto twice = single;
  for (auto blk : twice.blocks()) {
    for (double& v : blk) v *= 2.0;
  }
  EXPECT_LE(max_abs_diff(summed, twice), 1e-14);
}

TEST(Backward, CacheMismatchRejected) {
  const auto p = LstmParams::initialized(4, 5, 2, 3);
  ForwardCache cache;
  forward(p, SequenceBatch::from_window(random_window(6, 4, 9)), Mode::kEval, 0.0, nullptr, &cache);
  const auto other = LstmParams::initialized(4, 6, 2, 3);
  EXPECT_THROW(backward(other, cache, Eigen::MatrixXd::Zero(2, 1)), ValidationError);
  EXPECT_THROW(backward(p, cache, Eigen::MatrixXd::Zero(2, 3)), ValidationError);
}

TEST(GradientCheck, TinyModelsWithinTolerance) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto p = LstmParams::initialized(4, 4, 2, 100 + seed);
    const auto w = random_window(6, 4, 200 + seed);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    const double err = gradient_check(p, w, {n(rng), n(rng)}, 1e-5);
    EXPECT_LT(err, 1e-4) << "seed " << seed;
  }
}

TEST(GradientCheck, LargeStepDegrades) {
  const auto p = LstmParams::initialized(4, 4, 2, 7);
  const auto w = random_window(6, 4, 8);
  const double fine = gradient_check(p, w, {0.5, -0.5}, 1e-5);
  const double coarse = gradient_check(p, w, {0.5, -0.5}, 1e-1);
  EXPECT_GT(coarse, fine);
  EXPECT_GT(coarse, 1e-4);
}

TEST(GradientCheck, HeadOnlyIsExactQuadratic) {
  const auto p = LstmParams::initialized(4, 4, 2, 7);
  const double err = gradient_check(p, random_window(6, 4, 8), {0.5, -0.5}, 1e-2,
                                    ParamSubset::kHeadOnly);
  EXPECT_LT(err, 1e-8);
}

TEST(GradientCheck, ThreeLayersAndLongerWindow) {
  const auto p = LstmParams::initialized(6, 5, 3, 21);
  EXPECT_LT(gradient_check(p, random_window(12, 6, 22), {1.0, 2.0}, 1e-5), 1e-4);
}

TEST(Backward, MatchesFiniteDifferencesUnderFixedDropoutMasks) {
  // Re-seeding the mask generator reproduces the same masks, so the
  // train-mode loss is a smooth function of the parameters.
  const auto p = LstmParams::initialized(4, 4, 2, 31);
  const auto b = SequenceBatch::from_window(random_window(6, 4, 32));
  Eigen::MatrixXd y(2, 1);
  y << 0.4, -0.2;
  const auto loss_at = [&](const LstmParams& q) {
    std::mt19937_64 rng(99);
    return mse_loss(forward(q, b, Mode::kTrain, 0.3, &rng, nullptr), y);
  };
  std::mt19937_64 rng(99);
  ForwardCache cache;
  forward(p, b, Mode::kTrain, 0.3, &rng, &cache);
  ASSERT_FALSE(cache.layers[0].mask.empty());
  const auto g = backward(p, cache, y);

  auto probe = p;
  auto blocks = probe.blocks();
  const auto gb = g.blocks();
  const double eps = 1e-5;
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    for (std::size_t i = 0; i < blocks[k].size(); i += 3) {
      const double saved = blocks[k][i];
      blocks[k][i] = saved + eps;
      const double up = loss_at(probe);
      blocks[k][i] = saved - eps;
      const double down = loss_at(probe);
      blocks[k][i] = saved;
      const double numeric = (up - down) / (2 * eps);
      const double denom = std::max({std::abs(numeric), std::abs(gb[k][i]), 1e-8});
      EXPECT_LT(std::abs(numeric - gb[k][i]) / denom, 1e-4) << "block " << k << " index " << i;
    }
  }
}

TEST(Adam, FirstStepMovesByLearningRate) {
  auto p = LstmParams::zeros(1, 1, 1);
  auto g = LstmParams::zeros(1, 1, 1);
  g.head_bias << 0.37, -250.0;
  auto state = AdamState::for_params(p);
  TrainHyper hyper;
  adam_step(p, g, state, hyper);
  EXPECT_NEAR(p.head_bias(0), -0.001, 1e-10);
  EXPECT_NEAR(p.head_bias(1), 0.001, 1e-10);
  EXPECT_EQ(p.layers[0].w_input(0, 0), 0.0);
  EXPECT_EQ(state.step, 1u);
}

TEST(Adam, ZeroGradientDecaysMomentsOnly) {
  auto p = LstmParams::initialized(2, 3, 1, 5);
  auto state = AdamState::for_params(p);
  auto g = LstmParams::initialized(2, 3, 1, 6);
  TrainHyper hyper;
  adam_step(p, g, state, hyper);
  const auto m_before = state.first_moment;
  const auto v_before = state.second_moment;
  adam_step(p, LstmParams::zeros(2, 3, 1), state, hyper);
  const auto mb = m_before.blocks();
  const auto ma = state.first_moment.blocks();
  const auto vb = v_before.blocks();
  const auto va = state.second_moment.blocks();
  for (std::size_t k = 0; k < mb.size(); ++k) {
    for (std::size_t i = 0; i < mb[k].size(); ++i) {
      EXPECT_DOUBLE_EQ(ma[k][i], 0.9 * mb[k][i]);
      EXPECT_DOUBLE_EQ(va[k][i], 0.999 * vb[k][i]);
    }
  }

  auto fresh = LstmParams::initialized(2, 3, 1, 5);
  auto fresh_state = AdamState::for_params(fresh);
  const auto copy = fresh;
  adam_step(fresh, LstmParams::zeros(2, 3, 1), fresh_state, hyper);
  EXPECT_EQ(fresh, copy);
}

TEST(Adam, Deterministic) {
  auto p1 = LstmParams::initialized(2, 3, 2, 5);
  auto p2 = p1;
  auto s1 = AdamState::for_params(p1);
  auto s2 = AdamState::for_params(p2);
  const auto g = LstmParams::initialized(2, 3, 2, 9);
  TrainHyper hyper;
  for (int i = 0; i < 3; ++i) {
    adam_step(p1, g, s1, hyper);
    adam_step(p2, g, s2, hyper);
  }
  EXPECT_EQ(p1, p2);
  EXPECT_EQ(s1.first_moment, s2.first_moment);
}

TEST(Adam, NonFiniteGradientIsTrainingError) {
  auto p = LstmParams::zeros(2, 3, 1);
  auto g = LstmParams::zeros(2, 3, 1);
  g.layers[0].bias(2) = std::nan("");
  auto s = AdamState::for_params(p);
  const auto copy = p;
  EXPECT_THROW(adam_step(p, g, s, TrainHyper{}), TrainingError);
  EXPECT_EQ(p, copy);
  EXPECT_EQ(s.step, 0u);
  EXPECT_THROW(adam_step(p, LstmParams::zeros(2, 4, 1), s, TrainHyper{}), ValidationError);
}

TEST(ClipGlobalNorm, ScalesDownOnly) {
  auto g = LstmParams::zeros(1, 1, 1);
  g.head_bias << 3.0, 4.0;
  EXPECT_DOUBLE_EQ(clip_global_norm(g, 10.0), 5.0);
  EXPECT_EQ(g.head_bias(0), 3.0);
  EXPECT_DOUBLE_EQ(clip_global_norm(g, 1.0), 5.0);
  EXPECT_NEAR(std::sqrt(g.squared_norm()), 1.0, 1e-15);
}

TEST(Training, FullBatchAdamReducesLoss) {
  auto p = LstmParams::initialized(4, 8, 2, 12);
  std::vector<Eigen::MatrixXd> ws;
  for (std::uint64_t k = 0; k < 8; ++k) ws.push_back(random_window(6, 4, 50 + k));
  const auto batch = stack(ws);
  Eigen::MatrixXd y(2, 8);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 1.0);
  for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] = n(rng);

  auto state = AdamState::for_params(p);
  TrainHyper hyper;
  hyper.learning_rate = 0.01;
  const double initial = mse_loss(forward(p, batch, Mode::kEval, 0.0, nullptr, nullptr), y);
  for (int step = 0; step < 200; ++step) {
    ForwardCache cache;
    forward(p, batch, Mode::kEval, 0.0, nullptr, &cache);
    auto g = backward(p, cache, y);
    clip_global_norm(g, hyper.clip_norm);
    adam_step(p, g, state, hyper);
    ASSERT_TRUE(p.all_finite());
  }
  const double final_loss = mse_loss(forward(p, batch, Mode::kEval, 0.0, nullptr, nullptr), y);
  EXPECT_LT(final_loss, 0.1 * initial);
}

TEST(Dropout, TrainOutputsAverageToEvalOutput) {
  const auto p = LstmParams::initialized(3, 6, 1, 77);
  const auto b = SequenceBatch::from_window(random_window(5, 3, 78));
  const auto eval = forward(p, b, Mode::kEval, 0.0, nullptr, nullptr);
  std::mt19937_64 rng(79);
  const int draws = 20000;
  Eigen::Vector2d sum = Eigen::Vector2d::Zero();
  Eigen::Vector2d sq = Eigen::Vector2d::Zero();
  for (int i = 0; i < draws; ++i) {
    const Eigen::Vector2d out = forward(p, b, Mode::kTrain, 0.266, &rng, nullptr).col(0);
    sum += out;
    sq += out.cwiseProduct(out);
  }
  const Eigen::Vector2d mean = sum / draws;
  for (int c = 0; c < 2; ++c) {
    const double var = sq(c) / draws - mean(c) * mean(c);
    const double se = std::sqrt(var / draws);
    EXPECT_LE(std::abs(mean(c) - eval(c, 0)), 3.0 * se) << "output " << c;
  }
}

TEST(TrainHyper, Validation) {
  TrainHyper h;
  EXPECT_NO_THROW(h.validate());
  h.dropout_rate = 1.0;
  EXPECT_THROW(h.validate(), ValidationError);
  h = TrainHyper{};
  h.learning_rate = 0.0;
  EXPECT_THROW(h.validate(), ValidationError);
  h = TrainHyper{};
  h.batch_size = 0;
  EXPECT_THROW(h.validate(), ValidationError);
}
