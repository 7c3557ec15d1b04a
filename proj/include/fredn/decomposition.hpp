#pragma once

// Trend / seasonal decomposition mechanisms. All functions take series
// along columns: an L x S matrix holds S series of length L, and spectra are
// n_freq x S. When an embedding dimension d is involved the S columns are
// grouped as (series, embed) with the embed index varying fastest.

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <utility>
#include <vector>

#include "fredn/dft.hpp"
#include "fredn/errors.hpp"

namespace fredn {

enum class DecompositionMethod { FreD, MovingAverage, TopK };

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Learnable per-(bin, embed) gate. sigmoid(logits) is the trend share and
// 1 - sigmoid(logits) the seasonal share; the mask is shared by all channels.
struct DisentanglerMask {
  Eigen::MatrixXd logits;  // n_freq x embed_dim
  double init_order = 1.0;

  Eigen::Index n_freq() const { return logits.rows(); }
  Eigen::Index embed_dim() const { return logits.cols(); }
  Eigen::MatrixXd trend_share() const { return logits.unaryExpr([](double v) { return sigmoid(v); }); }
};

// Row k is -m * log(1 + k): the trend share starts at 1/2 for DC and falls
// off with frequency at a rate set by the assumed smoothness order m.
inline DisentanglerMask init_mask(Eigen::Index n_freq, Eigen::Index embed_dim, double order = 1.0) {
  if (order < 1.0) throw ConfigError("init_mask: smoothness order must be >= 1");
  DisentanglerMask mask;
  mask.init_order = order;
  mask.logits.resize(n_freq, embed_dim);
  for (Eigen::Index k = 0; k < n_freq; ++k) mask.logits.row(k).setConstant(-order * std::log1p(static_cast<double>(k)));
  return mask;
}

struct SpectralSplit {
  Spectrum trend;
  Spectrum season;
};

inline SpectralSplit fred_split(const Spectrum& x, const DisentanglerMask& mask) {
  const Eigen::Index d = mask.embed_dim();
  if (x.n_freq() != mask.n_freq() || d == 0 || x.series() % d != 0) {
    throw DimensionError("fred_split: spectrum " + std::to_string(x.n_freq()) + "x" + std::to_string(x.series()) +
                         " does not match mask " + std::to_string(mask.n_freq()) + "x" + std::to_string(d));
  }
  const Eigen::MatrixXd share = mask.trend_share();
  SpectralSplit out{x, x};
  for (Eigen::Index s = 0; s < x.series(); ++s) {
    const auto gate = share.col(s % d).array();
    out.trend.re.col(s).array() = x.re.col(s).array() * gate;
    out.trend.im.col(s).array() = x.im.col(s).array() * gate;
    out.season.re.col(s).array() = x.re.col(s).array() * (1.0 - gate);
    out.season.im.col(s).array() = x.im.col(s).array() * (1.0 - gate);
  }
  return out;
}

struct DecompositionResult {
  Eigen::MatrixXd trend;
  Eigen::MatrixXd seasonal;
  DecompositionMethod method = DecompositionMethod::MovingAverage;
};

inline void check_ma_window(Eigen::Index window, Eigen::Index length) {
  if (window < 1 || window > length) throw ConfigError("moving average: window must lie in [1, L]");
  if (window % 2 == 0) throw ConfigError("moving average: window must be odd");
}

// Centered moving average with edge-replication padding of (window-1)/2.
inline Eigen::MatrixXd moving_average(const Eigen::MatrixXd& x, Eigen::Index window) {
  const Eigen::Index len = x.rows();
  check_ma_window(window, len);
  const Eigen::Index half = (window - 1) / 2;
  Eigen::MatrixXd trend(len, x.cols());
  const double w = 1.0 / static_cast<double>(window);
  for (Eigen::Index s = 0; s < x.cols(); ++s) {
    for (Eigen::Index t = 0; t < len; ++t) {
      double sum = 0.0;
      for (Eigen::Index j = t - half; j <= t + half; ++j) sum += x(std::clamp<Eigen::Index>(j, 0, len - 1), s);
      trend(t, s) = window == 1 ? sum : sum * w;
    }
  }
  return trend;
}

// Transpose of the moving_average operator.
inline Eigen::MatrixXd moving_average_adjoint(const Eigen::MatrixXd& grad, Eigen::Index window) {
  const Eigen::Index len = grad.rows();
  check_ma_window(window, len);
  const Eigen::Index half = (window - 1) / 2;
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(len, grad.cols());
  const double w = 1.0 / static_cast<double>(window);
  for (Eigen::Index s = 0; s < grad.cols(); ++s) {
    for (Eigen::Index t = 0; t < len; ++t) {
      const double g = grad(t, s) * w;
      for (Eigen::Index j = t - half; j <= t + half; ++j) out(std::clamp<Eigen::Index>(j, 0, len - 1), s) += g;
    }
  }
  return out;
}

inline DecompositionResult moving_average_decomp(const Eigen::MatrixXd& x, Eigen::Index window) {
  DecompositionResult r;
  r.method = DecompositionMethod::MovingAverage;
  r.trend = moving_average(x, window);
  r.seasonal = x - r.trend;
  return r;
}

// floor(log2 L), the default number of retained bins.
inline Eigen::Index topk_heuristic(std::size_t lookback) {
  if (lookback == 0) throw ConfigError("topk: lookback must be positive");
  return static_cast<Eigen::Index>(std::bit_width(lookback) - 1);
}

// 0/1 keep-mask (n_freq x S) retaining, per group of `embed_dim` columns, the
// K bins with the largest embed-averaged magnitude. Ties go to the lower bin.
inline Eigen::MatrixXd topk_keep_mask(const Spectrum& spec, Eigen::Index k, Eigen::Index embed_dim = 1) {
  const Eigen::Index nf = spec.n_freq();
  if (k < 1 || k > nf) throw ConfigError("topk: K must lie in [1, n_freq]");
  if (embed_dim < 1 || spec.series() % embed_dim != 0) throw DimensionError("topk: series not divisible by embed_dim");
  Eigen::MatrixXd keep = Eigen::MatrixXd::Zero(nf, spec.series());
  std::vector<double> amp(static_cast<std::size_t>(nf));
  std::vector<Eigen::Index> order(static_cast<std::size_t>(nf));
  for (Eigen::Index g = 0; g < spec.series() / embed_dim; ++g) {
    for (Eigen::Index f = 0; f < nf; ++f) {
      double sum = 0.0;
      for (Eigen::Index i = 0; i < embed_dim; ++i) sum += spec.magnitude(f, g * embed_dim + i);
      amp[static_cast<std::size_t>(f)] = sum / static_cast<double>(embed_dim);
    }
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
      return amp[static_cast<std::size_t>(a)] > amp[static_cast<std::size_t>(b)];
    });
    for (Eigen::Index j = 0; j < k; ++j) {
      for (Eigen::Index i = 0; i < embed_dim; ++i) keep(order[static_cast<std::size_t>(j)], g * embed_dim + i) = 1.0;
    }
  }
  return keep;
}

inline DecompositionResult topk_decomp(const Eigen::MatrixXd& x, Eigen::Index k, Eigen::Index embed_dim = 1) {
  Spectrum spec = rfft(x);
  const Eigen::MatrixXd keep = topk_keep_mask(spec, k, embed_dim);
  spec.re.array() *= keep.array();
  spec.im.array() *= keep.array();
  DecompositionResult r;
  r.method = DecompositionMethod::TopK;
  r.seasonal = irfft(spec, static_cast<std::size_t>(x.rows()), HermitianPolicy::Project);
  r.trend = x - r.seasonal;
  return r;
}

// Frequency response of a length-k averaging filter at normalized frequency
// f (cycles per sample): (1/k) sin(pi f k) / sin(pi f) exp(-j pi f (k-1)).
inline Complex ma_frequency_response(double f, int k) {
  if (k < 1) throw ConfigError("ma_frequency_response: window must be >= 1");
  const double kk = static_cast<double>(k);
  const double denom = std::sin(std::numbers::pi * f);
  double gain;
  if (std::abs(denom) < 1e-12) {
    // Limit at integer f: k * (-1)^(f (k-1)).
    const long n = std::lround(f);
    gain = ((n * (k - 1)) % 2 == 0) ? 1.0 : -1.0;
  } else {
    gain = std::sin(std::numbers::pi * f * kk) / (kk * denom);
  }
  const double phase = -std::numbers::pi * f * (kk - 1.0);
  return gain * Complex(std::cos(phase), std::sin(phase));
}

// Empirical |trend spectrum| / |input spectrum| of the moving-average trend
// of white noise: |sum out*conj(in)| / sum |in|^2 over realizations, which
// averages out the part of the output uncorrelated with the input (edge padding).
// Entry k corresponds to frequency k / length.
inline std::vector<double> empirical_ma_response(Eigen::Index window, Eigen::Index length, int realizations,
                                                 std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd x(length, realizations);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = normal(rng);
  const Spectrum in = rfft(x);
  const Spectrum out = rfft(moving_average(x, window));
  std::vector<double> ratio(static_cast<std::size_t>(in.n_freq()));
  for (Eigen::Index k = 0; k < in.n_freq(); ++k) {
    Complex cross = 0.0;
    double den = 0.0;
    for (Eigen::Index s = 0; s < realizations; ++s) {
      cross += out.at(k, s) * std::conj(in.at(k, s));
      den += std::norm(in.at(k, s));
    }
    ratio[static_cast<std::size_t>(k)] = std::abs(cross) / den;
  }
  return ratio;
}

}  // namespace fredn
