#pragma once

// Optimization and evaluation: Adam, learning-rate schedules, the epoch loop
// with early stopping, and time-domain metrics.

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <numeric>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "fredn/data.hpp"
#include "fredn/errors.hpp"
#include "fredn/losses.hpp"
#include "fredn/model.hpp"

namespace fredn {

// ---------------------------------------------------------------------------
// Adam

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  long step = 0;
};

// One bias-corrected Adam update of every tensor in `params`.
inline void adam_step(const std::vector<Tensor*>& params, const std::vector<Tensor*>& grads, AdamState& state,
                      double lr, const AdamConfig& cfg = {}) {
  if (params.size() != grads.size()) throw DimensionError("adam: parameter and gradient lists differ in length");
  if (state.m.empty()) {
    for (const Tensor* p : params) {
      state.m.push_back(Tensor::Zero(p->rows(), p->cols()));
      state.v.push_back(Tensor::Zero(p->rows(), p->cols()));
    }
  }
  if (state.m.size() != params.size()) throw DimensionError("adam: state does not match parameters");
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Tensor& g = *grads[i];
    if (g.rows() != params[i]->rows() || g.cols() != params[i]->cols()) {
      throw DimensionError("adam: gradient shape mismatch for tensor " + std::to_string(i));
    }
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g.cwiseProduct(g);
    params[i]->array() -= lr * (state.m[i].array() / c1) / ((state.v[i].array() / c2).sqrt() + cfg.eps);
  }
}

// ---------------------------------------------------------------------------
// Schedules

enum class Schedule { Typ1, Cosine };

inline std::string to_string(Schedule s) { return s == Schedule::Typ1 ? "typ1" : "cosine"; }

inline Schedule parse_schedule(std::string_view s) {
  if (s == "typ1") return Schedule::Typ1;
  if (s == "cosine") return Schedule::Cosine;
  throw ConfigError("unknown schedule '" + std::string(s) + "'");
}

// Typ1 halves the rate every epoch; Cosine anneals towards zero over
// max_epochs. Epochs are 1-based.
inline double lr_schedule(Schedule kind, double base_lr, long epoch, long max_epochs) {
  if (epoch < 1 || epoch > max_epochs) throw ConfigError("lr_schedule: epoch must lie in [1, max_epochs]");
  const auto e = static_cast<double>(epoch - 1);
  if (kind == Schedule::Typ1) return base_lr * std::pow(0.5, e);
  return base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * e / static_cast<double>(max_epochs)));
}

// ---------------------------------------------------------------------------
// Configuration

struct TrainConfig {
  ModelConfig model;
  Eigen::Index batch_size = 32;
  double learning_rate = 1e-3;
  long epochs = 20;
  long patience = 5;
  Schedule schedule = Schedule::Typ1;
  LossKind loss = LossKind::FreqMAE;
  std::uint64_t seed = 2024;
  SplitRatios ratios;
  bool standardize = true;       // dataset-level z-score fitted on train rows
  bool borrow_context = true;    // val/test lookbacks may reach into the previous split
  Eigen::Index max_rows = 0;     // use only the first max_rows rows (0 = all)

  void validate() const {
    model.validate();
    if (batch_size < 1) throw ConfigError("train: batch size must be >= 1");
    if (!(learning_rate > 0.0)) throw ConfigError("train: learning rate must be positive");
    if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
    if (patience < 1) throw ConfigError("train: patience must be >= 1");
    if (patience > epochs) throw ConfigError("train: patience must not exceed epochs");
    if (max_rows < 0) throw ConfigError("train: max_rows must be >= 0");
  }
};

// ---------------------------------------------------------------------------
// Prepared data

struct PreparedData {
  Splits splits;
  Standardizer scaler;
  WindowSet train, val, test;
};

// `fixed_scaler` replaces the train-fitted standardization (e.g. the one
// stored with a checkpoint).
inline PreparedData prepare(const Dataset& ds, const TrainConfig& cfg, const Standardizer* fixed_scaler = nullptr) {
  if (ds.channels() != cfg.model.channels) {
    throw ConfigError("dataset has " + std::to_string(ds.channels()) + " channels, model expects " +
                      std::to_string(cfg.model.channels));
  }
  const Eigen::Index rows = cfg.max_rows > 0 ? std::min(cfg.max_rows, ds.rows()) : ds.rows();
  PreparedData p;
  p.splits = chronological_split(rows, cfg.ratios);
  const Eigen::MatrixXd raw = ds.values.topRows(rows);
  if (fixed_scaler) {
    if (fixed_scaler->mean.size() != raw.cols()) throw ConfigError("standardizer does not match the channel count");
    p.scaler = *fixed_scaler;
  } else {
    p.scaler = cfg.standardize ? Standardizer::fit(raw, p.splits.train) : Standardizer::identity(raw.cols());
  }
  auto series = std::make_shared<const Eigen::MatrixXd>(p.scaler.apply(raw));
  const Eigen::Index l = cfg.model.lookback, h = cfg.model.horizon;
  p.train = make_windows(series, p.splits.train, l, h);
  if (cfg.borrow_context) {
    p.val = make_windows_with_context(series, p.splits.val, l, h);
    p.test = make_windows_with_context(series, p.splits.test, l, h);
  } else {
    p.val = make_windows(series, p.splits.val, l, h);
    p.test = make_windows(series, p.splits.test, l, h);
  }
  return p;
}

// ---------------------------------------------------------------------------
// Evaluation

struct EvalReport {
  double mse = 0.0;
  double mae = 0.0;
  std::vector<double> mse_by_step;     // length tau
  std::vector<double> mae_by_step;
  std::vector<double> mse_by_channel;  // length C
  std::vector<double> mae_by_channel;
  Eigen::Index windows = 0;
  Eigen::Index param_count = 0;
  double seconds = 0.0;
};

// Receives one batch of forecasts: window indices, targets and predictions
// laid out as in WindowSet::gather.
using PredictionSink =
    std::function<void(std::span<const Eigen::Index> windows, const Tensor& y, const Tensor& y_hat)>;

namespace detail {

struct MetricAccumulator {
  Eigen::MatrixXd sq;   // tau x C
  Eigen::MatrixXd abs;  // tau x C
  Eigen::Index windows = 0;

  MetricAccumulator(Eigen::Index tau, Eigen::Index channels)
      : sq(Eigen::MatrixXd::Zero(tau, channels)), abs(Eigen::MatrixXd::Zero(tau, channels)) {}

  void add(const Tensor& y, const Tensor& y_hat, Eigen::Index channels) {
    const Eigen::MatrixXd e = y_hat - y;
    for (Eigen::Index s = 0; s < e.cols(); ++s) {
      sq.col(s % channels) += e.col(s).cwiseAbs2();
      abs.col(s % channels) += e.col(s).cwiseAbs();
    }
    windows += e.cols() / channels;
  }

  EvalReport report() const {
    EvalReport r;
    const auto w = static_cast<double>(windows);
    const auto tau = static_cast<double>(sq.rows());
    const auto c = static_cast<double>(sq.cols());
    r.windows = windows;
    r.mse = sq.sum() / (w * tau * c);
    r.mae = abs.sum() / (w * tau * c);
    for (Eigen::Index t = 0; t < sq.rows(); ++t) {
      r.mse_by_step.push_back(sq.row(t).sum() / (w * c));
      r.mae_by_step.push_back(abs.row(t).sum() / (w * c));
    }
    for (Eigen::Index ch = 0; ch < sq.cols(); ++ch) {
      r.mse_by_channel.push_back(sq.col(ch).sum() / (w * tau));
      r.mae_by_channel.push_back(abs.col(ch).sum() / (w * tau));
    }
    return r;
  }
};

template <class Predict>
EvalReport run_evaluation(const WindowSet& windows, Eigen::Index batch_size, Predict&& predict,
                          const PredictionSink& sink) {
  const auto start = std::chrono::steady_clock::now();
  const Eigen::Index channels = windows.channels();
  MetricAccumulator acc(windows.horizon, channels);
  std::vector<Eigen::Index> idx;
  Tensor x, y;
  for (Eigen::Index b = 0; b < windows.count; b += batch_size) {
    idx.resize(static_cast<std::size_t>(std::min(batch_size, windows.count - b)));
    std::iota(idx.begin(), idx.end(), b);
    windows.gather(idx, x, y);
    const Tensor y_hat = predict(x);
    acc.add(y, y_hat, channels);
    if (sink) sink(idx, y, y_hat);
  }
  EvalReport r = acc.report();
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

}  // namespace detail

// Time-domain MSE / MAE over every predicted point, channel and window, in
// the (standardized) space the windows were built in.
inline EvalReport evaluate(const ModelParams& params, const WindowSet& windows, Eigen::Index batch_size = 256,
                           const PredictionSink& sink = {}) {
  EvalReport r = detail::run_evaluation(
      windows, batch_size, [&](const Tensor& x) { return forward(params, x); }, sink);
  r.param_count = param_count(params).total();
  return r;
}

// Repeats the last lookback value across the horizon.
inline EvalReport naive_baseline(const WindowSet& windows, Eigen::Index batch_size = 256) {
  return detail::run_evaluation(
      windows, batch_size,
      [&](const Tensor& x) { return Tensor(x.row(x.rows() - 1).replicate(windows.horizon, 1)); }, {});
}

// Mean of `kind` over all windows, weighted by column count.
inline double validation_loss(const ModelParams& params, const WindowSet& windows, LossKind kind,
                              Eigen::Index batch_size = 256) {
  double total = 0.0;
  Eigen::Index columns = 0;
  std::vector<Eigen::Index> idx;
  Tensor x, y;
  for (Eigen::Index b = 0; b < windows.count; b += batch_size) {
    idx.resize(static_cast<std::size_t>(std::min(batch_size, windows.count - b)));
    std::iota(idx.begin(), idx.end(), b);
    windows.gather(idx, x, y);
    total += compute_loss(kind, forward(params, x), y) * static_cast<double>(y.cols());
    columns += y.cols();
  }
  return total / static_cast<double>(columns);
}

// ---------------------------------------------------------------------------
// Training loop

struct EpochRecord {
  long epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
};

struct TrainResult {
  ModelParams params;  // parameters of the best validation epoch
  std::vector<EpochRecord> history;
  long best_epoch = 0;
  double best_val_loss = std::numeric_limits<double>::infinity();
  double seconds = 0.0;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

namespace detail {

// Distinct, reproducible stream per (seed, epoch, purpose).
inline std::mt19937_64 keyed_rng(std::uint64_t seed, long epoch, std::uint64_t purpose) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), static_cast<std::uint32_t>(purpose)};
  return std::mt19937_64(seq);
}

}  // namespace detail

inline TrainResult train(const PreparedData& data, const TrainConfig& cfg, const EpochCallback& on_epoch = {}) {
  cfg.validate();
  if (data.train.lookback != cfg.model.lookback || data.train.horizon != cfg.model.horizon) {
    throw ConfigError("train: windows do not match the model's lookback / horizon");
  }
  const auto start = std::chrono::steady_clock::now();
  ModelParams params = ModelParams::create(cfg.model, cfg.seed);
  ModelParams grad = params.zeros_like();
  std::vector<Tensor*> param_ptrs, grad_ptrs;
  for (auto& [name, t] : params.tensors()) param_ptrs.push_back(t);
  for (auto& [name, t] : grad.tensors()) grad_ptrs.push_back(t);
  AdamState adam;

  TrainResult result;
  long stale = 0;
  std::vector<Eigen::Index> order(static_cast<std::size_t>(data.train.count));
  Tensor x, y;
  for (long epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const double lr = lr_schedule(cfg.schedule, cfg.learning_rate, epoch, cfg.epochs);
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::mt19937_64 shuffle_rng = detail::keyed_rng(cfg.seed, epoch, 1);
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    std::mt19937_64 dropout_rng = detail::keyed_rng(cfg.seed, epoch, 2);
    const nn::ForwardContext ctx{true, &dropout_rng};

    double loss_sum = 0.0;
    Eigen::Index loss_cols = 0;
    long step = 0;
    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(cfg.batch_size)) {
      ++step;
      const std::size_t n = std::min(order.size() - b, static_cast<std::size_t>(cfg.batch_size));
      data.train.gather(std::span<const Eigen::Index>(order).subspan(b, n), x, y);
      for (Tensor* g : grad_ptrs) g->setZero();
      const double loss = loss_and_gradient(params, x, y, cfg.loss, grad, ctx);
      if (!std::isfinite(loss)) {
        throw DivergenceError("non-finite training loss at epoch " + std::to_string(epoch) + ", step " +
                              std::to_string(step));
      }
      adam_step(param_ptrs, grad_ptrs, adam, lr);
      loss_sum += loss * static_cast<double>(y.cols());
      loss_cols += y.cols();
    }

    EpochRecord rec{epoch, loss_sum / static_cast<double>(loss_cols), validation_loss(params, data.val, cfg.loss), lr};
    if (!std::isfinite(rec.val_loss)) {
      throw DivergenceError("non-finite validation loss at epoch " + std::to_string(epoch));
    }
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (rec.val_loss < result.best_val_loss) {
      result.best_val_loss = rec.val_loss;
      result.best_epoch = epoch;
      result.params = params;
      stale = 0;
    } else if (++stale >= cfg.patience) {
      break;
    }
  }
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace fredn
