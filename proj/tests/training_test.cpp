#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "fredn/training.hpp"
#include "test_support.hpp"

namespace fredn {
namespace {

TEST(Adam, ZeroGradientLeavesParamsAndDecaysMoments) {
  Tensor w = Tensor::Constant(2, 2, 0.7);
  Tensor g = Tensor::Constant(2, 2, 1.0);
  AdamState st;
  adam_step({&w}, {&g}, st, 0.1);
  const Tensor after_first = w;
  const Tensor m1 = st.m[0], v1 = st.v[0];
  g.setZero();
  adam_step({&w}, {&g}, st, 0.0);
  EXPECT_TRUE(w == after_first);
  EXPECT_TRUE(st.m[0] == 0.9 * m1);
  EXPECT_TRUE(st.v[0] == 0.999 * v1);
}

TEST(Adam, FirstStepIsSignedLearningRate) {
  for (double g0 : {3.0, -0.02, 1e-3}) {
    Tensor w = Tensor::Zero(1, 1), g = Tensor::Constant(1, 1, g0);
    AdamState st;
    adam_step({&w}, {&g}, st, 0.01);
    // m_hat = g, v_hat = g^2 -> step = -lr g / (|g| + eps).
    EXPECT_NEAR(w(0, 0), -0.01 * g0 / (std::abs(g0) + 1e-8), 1e-15);
  }
}

TEST(Adam, ConvergesOnQuadratic) {
  Tensor w = Tensor::Ones(1, 1), g(1, 1);
  AdamState st;
  for (int i = 0; i < 100; ++i) {
    g(0, 0) = 2.0 * w(0, 0);
    adam_step({&w}, {&g}, st, 0.1);
  }
  EXPECT_LT(std::abs(w(0, 0)), 0.05);
}

TEST(Adam, ShapeMismatchThrows) {
  Tensor w = Tensor::Zero(2, 2), g = Tensor::Zero(2, 1);
  AdamState st;
  EXPECT_THROW(adam_step({&w}, {&g}, st, 0.1), DimensionError);
}

TEST(Schedule, Typ1Halves) {
  EXPECT_EQ(lr_schedule(Schedule::Typ1, 1e-3, 1, 20), 1e-3);
  EXPECT_DOUBLE_EQ(lr_schedule(Schedule::Typ1, 1e-3, 4, 20), 1.25e-4);
}

TEST(Schedule, CosineStrictlyDecreasingAndPositive) {
  for (long max_epochs : {1, 2, 5, 20, 100}) {
    double prev = std::numeric_limits<double>::infinity();
    for (long e = 1; e <= max_epochs; ++e) {
      const double lr = lr_schedule(Schedule::Cosine, 2e-3, e, max_epochs);
      EXPECT_LT(lr, prev);
      EXPECT_GT(lr, 0.0);
      prev = lr;
    }
    EXPECT_EQ(lr_schedule(Schedule::Cosine, 2e-3, 1, max_epochs), 2e-3);
  }
  EXPECT_THROW(lr_schedule(Schedule::Cosine, 1e-3, 0, 20), ConfigError);
  EXPECT_THROW(lr_schedule(Schedule::Cosine, 1e-3, 21, 20), ConfigError);
  EXPECT_EQ(parse_schedule("cosine"), Schedule::Cosine);
  EXPECT_THROW(parse_schedule("step"), ConfigError);
}

TEST(Evaluate, PerfectPredictionIsZero) {
  auto series = std::make_shared<const Eigen::MatrixXd>(Eigen::MatrixXd::Constant(40, 2, 1.5));
  const WindowSet w = make_windows(series, {0, 40}, 8, 4);
  const EvalReport r = naive_baseline(w);
  EXPECT_EQ(r.mse, 0.0);
  EXPECT_EQ(r.mae, 0.0);
  EXPECT_EQ(r.windows, w.count);
  EXPECT_EQ(r.mse_by_step.size(), 4u);
  EXPECT_EQ(r.mse_by_channel.size(), 2u);
}

TEST(Evaluate, MeanPredictionOnNoiseGivesVariance) {
  auto series = std::make_shared<const Eigen::MatrixXd>(testing::random_matrix(20000, 1, 3, 0.5));
  const WindowSet w = make_windows(series, {0, 20000}, 16, 8);
  // A zero network with RevIN predicts the lookback mean; for white noise
  // its error variance is sigma^2 (1 + 1/L).
  ModelConfig cfg;
  cfg.lookback = 16;
  cfg.horizon = 8;
  cfg.hidden_size = 8;
  ModelParams p = ModelParams::create(cfg, 1).zeros_like();
  p.revin_gamma.setOnes();
  const EvalReport r = evaluate(p, w);
  EXPECT_NEAR(r.mse, 0.25 * (1.0 + 1.0 / 16.0), 0.01);
  EXPECT_GT(r.param_count, 0);
  EXPECT_GE(r.mae, 0.0);
}

Dataset sinusoid_dataset(Eigen::Index rows, double period, std::uint64_t seed) {
  Eigen::MatrixXd v(rows, 1);
  const Eigen::MatrixXd noise = testing::random_matrix(rows, 1, seed, 0.05);
  for (Eigen::Index t = 0; t < rows; ++t) {
    v(t, 0) = std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / period) + noise(t, 0);
  }
  return dataset_from_matrix("sine", v);
}

TrainConfig small_config() {
  TrainConfig cfg;
  cfg.model.channels = 1;
  cfg.model.lookback = 48;
  cfg.model.horizon = 24;
  cfg.model.embed_dim = 4;
  cfg.model.hidden_size = 32;
  cfg.model.depth = 1;
  cfg.model.dropout = 0.1;
  cfg.batch_size = 16;
  cfg.learning_rate = 5e-3;
  cfg.epochs = 4;
  cfg.patience = 2;
  return cfg;
}

TEST(Train, SinusoidBeatsRepeatLastValue) {
  const Dataset ds = sinusoid_dataset(1200, 17.0, 5);
  TrainConfig cfg = small_config();
  cfg.epochs = 8;
  cfg.patience = 8;
  cfg.schedule = Schedule::Cosine;
  const PreparedData data = prepare(ds, cfg);
  // About 50 steps per epoch: 8 epochs > 200 optimizer steps.
  ASSERT_GT(data.train.count / cfg.batch_size * cfg.epochs, 200);
  const TrainResult res = train(data, cfg);
  const EvalReport model = evaluate(res.params, data.val);
  const EvalReport naive = naive_baseline(data.val);
  EXPECT_LT(model.mse, naive.mse);
}

TEST(Train, DeterministicGivenSeed) {
  const Dataset ds = sinusoid_dataset(600, 11.0, 6);
  const TrainConfig cfg = small_config();
  const PreparedData data = prepare(ds, cfg);
  const TrainResult a = train(data, cfg);
  const TrainResult b = train(data, cfg);
  ASSERT_EQ(a.history.size(), b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    EXPECT_EQ(a.history[i].val_loss, b.history[i].val_loss);
    EXPECT_EQ(a.history[i].train_loss, b.history[i].train_loss);
  }
  TrainConfig other = cfg;
  other.seed = cfg.seed + 1;
  EXPECT_NE(train(data, other).history[0].val_loss, a.history[0].val_loss);
}

TEST(Train, RestoresBestEpochAndStopsEarly) {
  const Dataset ds = sinusoid_dataset(600, 11.0, 7);
  TrainConfig cfg = small_config();
  cfg.epochs = 12;
  cfg.patience = 1;
  cfg.learning_rate = 0.05;  // large enough to overshoot and trigger stopping
  const PreparedData data = prepare(ds, cfg);
  const TrainResult res = train(data, cfg);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& rec : res.history) best = std::min(best, rec.val_loss);
  EXPECT_EQ(res.best_val_loss, best);
  EXPECT_EQ(res.history[static_cast<std::size_t>(res.best_epoch - 1)].val_loss, best);
  EXPECT_DOUBLE_EQ(validation_loss(res.params, data.val, cfg.loss), best);
  // Stopping: the run ends at most `patience` epochs after the best one.
  EXPECT_LE(static_cast<long>(res.history.size()), res.best_epoch + cfg.patience);
}

TEST(Train, ConfigPreconditions) {
  TrainConfig cfg = small_config();
  cfg.patience = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg.patience = 5;
  cfg.epochs = 3;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = small_config();
  cfg.model.channels = 2;
  EXPECT_THROW(prepare(sinusoid_dataset(600, 11.0, 1), cfg), ConfigError);
}

TEST(Train, DivergenceIsReported) {
  const Dataset ds = sinusoid_dataset(600, 11.0, 8);
  TrainConfig cfg = small_config();
  cfg.learning_rate = 1e300;
  cfg.loss = LossKind::TimeMSE;
  const PreparedData data = prepare(ds, cfg);
  try {
    train(data, cfg);
    FAIL() << "expected DivergenceError";
  } catch (const DivergenceError& e) {
    EXPECT_NE(std::string(e.what()).find("epoch"), std::string::npos);
  }
}

TEST(Prepare, StandardizesWithTrainStatistics) {
  const Dataset ds = sinusoid_dataset(1000, 13.0, 9);
  TrainConfig cfg = small_config();
  const PreparedData data = prepare(ds, cfg);
  EXPECT_EQ(data.splits.train.end, 700);
  const Eigen::MatrixXd train_rows = data.train.series->topRows(700);
  EXPECT_LT(std::abs(train_rows.mean()), 1e-12);
  cfg.max_rows = 500;
  EXPECT_EQ(prepare(ds, cfg).splits.test.end, 500);
}

}  // namespace
}  // namespace fredn
