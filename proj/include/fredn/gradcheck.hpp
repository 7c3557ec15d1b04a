#pragma once

// Finite-difference check of model_backward, grouped by parameter tensor.

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "fredn/losses.hpp"
#include "fredn/model.hpp"

namespace fredn {

// C=2, L=16, tau=8, d=2, hidden=8, dropout 0.
inline ModelConfig tiny_model_config(Variant v) {
  ModelConfig cfg;
  cfg.channels = 2;
  cfg.lookback = 16;
  cfg.horizon = 8;
  cfg.embed_dim = 2;
  cfg.hidden_size = 8;
  cfg.depth = 2;
  cfg.dropout = 0.0;
  cfg.variant = v;
  cfg.ma_window = 5;
  return cfg;
}

struct GradCheckEntry {
  Variant variant;
  LossKind loss;
  std::string tensor;
  double rel_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double worst() const {
    double w = 0.0;
    for (const auto& e : entries) w = std::max(w, e.rel_error);
    return w;
  }
};

// ||a - n|| / max(||a||, ||n||, 1e-8) per tensor, central differences with
// step h. Parameters are perturbed away from their initial values so every
// path carries gradient.
inline GradCheckReport gradient_check(const ModelConfig& cfg, LossKind kind, std::uint64_t seed = 1,
                                      Eigen::Index batch = 3, double h = 1e-5) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  auto fill = [&](Eigen::Index r, Eigen::Index c, double scale) {
    Tensor t(r, c);
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = scale * normal(rng);
    return t;
  };
  ModelParams p = ModelParams::create(cfg, seed);
  p.visit([&](const std::string&, Tensor& t) { t += fill(t.rows(), t.cols(), 0.2); });
  p.revin_gamma.array() += 0.5;
  const Tensor x = fill(cfg.lookback, batch * cfg.channels, 1.0);
  const Tensor y = fill(cfg.horizon, batch * cfg.channels, 1.0);

  ModelParams grad = model_backward(p, x, y, kind);
  auto params = p.tensors();
  auto grads = grad.tensors();
  GradCheckReport report;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& t = *params[i].second;
    Tensor numeric(t.rows(), t.cols());
    for (Eigen::Index j = 0; j < t.size(); ++j) {
      const double orig = t.data()[j];
      t.data()[j] = orig + h;
      const double up = compute_loss(kind, forward(p, x), y);
      t.data()[j] = orig - h;
      const double down = compute_loss(kind, forward(p, x), y);
      t.data()[j] = orig;
      numeric.data()[j] = (up - down) / (2.0 * h);
    }
    const Tensor& a = *grads[i].second;
    const double denom = std::max({a.norm(), numeric.norm(), 1e-8});
    report.entries.push_back({cfg.variant, kind, params[i].first, (a - numeric).norm() / denom});
  }
  return report;
}

}  // namespace fredn
