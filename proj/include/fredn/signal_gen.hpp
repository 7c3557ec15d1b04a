#pragma once

// Synthetic trend + seasonal + noise signals and the spectral diagnostics
// used to study how their energy overlaps across DFT bins.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "fredn/dft.hpp"
#include "fredn/errors.hpp"

namespace fredn {

struct SeasonalComponent {
  double cycles = 0.0;  // cycles per window; need not be an integer
  double amplitude = 1.0;
  double phase = 0.0;  // radians
};

struct SyntheticSignal {
  std::vector<double> trend;
  std::vector<double> seasonal;
  std::vector<double> noise;
  std::vector<double> composite;
  std::size_t length = 0;
  std::uint64_t seed = 0;
};

namespace detail {

// Cardinal B-spline of degree p supported on [0, p+1].
inline double cardinal_bspline(int degree, double x) {
  if (x < 0.0 || x >= static_cast<double>(degree + 1)) return 0.0;
  if (degree == 0) return 1.0;
  const double p = static_cast<double>(degree);
  return (x * cardinal_bspline(degree - 1, x) + (p + 1.0 - x) * cardinal_bspline(degree - 1, x - 1.0)) / p;
}

}  // namespace detail

// Periodic uniform B-spline with `knot_count` control coefficients drawn
// uniformly from [-amplitude, amplitude], sampled at t = i / length.
// The spline is C^(degree-1) including across the wrap-around, so its
// periodic extension has a square-integrable degree-th derivative.
inline std::vector<double> bspline_from_coefficients(std::span<const double> coefficients, int degree,
                                                     std::size_t length) {
  const auto knots = static_cast<int>(coefficients.size());
  std::vector<double> out(length, 0.0);
  for (std::size_t s = 0; s < length; ++s) {
    const double u = static_cast<double>(knots) * static_cast<double>(s) / static_cast<double>(length);
    double value = 0.0;
    for (int i = 0; i < knots; ++i) {
      double x = u - static_cast<double>(i);
      // Wrap into [0, knots) so each basis function is evaluated on its
      // periodic copy nearest to the support.
      x = std::fmod(x, static_cast<double>(knots));
      if (x < 0.0) x += static_cast<double>(knots);
      value += coefficients[static_cast<std::size_t>(i)] * detail::cardinal_bspline(degree, x);
    }
    out[s] = value;
  }
  return out;
}

inline std::vector<double> gen_bspline_trend(int knot_count, int degree, std::size_t length, double amplitude,
                                             std::uint64_t seed) {
  if (degree < 1) throw ConfigError("bspline trend: degree must be >= 1");
  if (knot_count < degree + 1) throw ConfigError("bspline trend: knot_count must be >= degree + 1");
  if (length < 2) throw ConfigError("bspline trend: length must be >= 2");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coef(-amplitude, amplitude);
  std::vector<double> c(static_cast<std::size_t>(knot_count));
  for (auto& v : c) v = coef(rng);
  return bspline_from_coefficients(c, degree, length);
}

inline std::vector<double> gen_seasonal(std::span<const SeasonalComponent> components, std::size_t length) {
  std::vector<double> out(length, 0.0);
  const double nyquist = static_cast<double>(length) / 2.0;
  for (const auto& c : components) {
    if (c.amplitude < 0.0) throw ConfigError("seasonal: amplitude must be >= 0");
    if (c.cycles < 0.0 || c.cycles >= nyquist) throw ConfigError("seasonal: frequency must lie in [0, length/2)");
    for (std::size_t t = 0; t < length; ++t) {
      out[t] += c.amplitude * std::cos(2.0 * std::numbers::pi * c.cycles * static_cast<double>(t) /
                                           static_cast<double>(length) +
                                       c.phase);
    }
  }
  return out;
}

inline std::vector<double> gen_noise(double stddev, std::size_t length, std::uint64_t seed) {
  if (stddev < 0.0) throw ConfigError("noise: std must be >= 0");
  std::vector<double> out(length, 0.0);
  if (stddev == 0.0) return out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, stddev);
  for (auto& v : out) v = normal(rng);
  return out;
}

inline SyntheticSignal compose(std::vector<double> trend, std::vector<double> seasonal, std::vector<double> noise,
                               std::uint64_t seed = 0) {
  const std::size_t n = trend.size();
  if (seasonal.size() != n || noise.size() != n) throw DimensionError("compose: component lengths differ");
  SyntheticSignal s;
  s.length = n;
  s.seed = seed;
  s.composite.resize(n);
  for (std::size_t t = 0; t < n; ++t) s.composite[t] = trend[t] + seasonal[t] + noise[t];
  s.trend = std::move(trend);
  s.seasonal = std::move(seasonal);
  s.noise = std::move(noise);
  return s;
}

struct SyntheticConfig {
  std::size_t length = 720;
  int trend_degree = 3;
  int trend_knots = 8;
  double trend_amplitude = 1.0;
  std::vector<SeasonalComponent> seasonal{{8.5, 1.0, 0.0}};
  double noise_std = 0.1;
  std::uint64_t seed = 7;
};

inline SyntheticSignal make_synthetic(const SyntheticConfig& cfg) {
  return compose(gen_bspline_trend(cfg.trend_knots, cfg.trend_degree, cfg.length, cfg.trend_amplitude, cfg.seed),
                 gen_seasonal(cfg.seasonal, cfg.length), gen_noise(cfg.noise_std, cfg.length, cfg.seed + 1),
                 cfg.seed);
}

struct SpectralProportions {
  Eigen::MatrixXd shares;        // n_freq x 3: trend, seasonal, noise
  std::vector<bool> degenerate;  // bins with zero total magnitude, emitted as 1/3 each
};

inline SpectralProportions spectral_proportions(const SyntheticSignal& signal) {
  const Spectrum trend = rfft(std::span<const double>(signal.trend));
  const Spectrum seasonal = rfft(std::span<const double>(signal.seasonal));
  const Spectrum noise = rfft(std::span<const double>(signal.noise));
  SpectralProportions p;
  p.shares.resize(trend.n_freq(), 3);
  p.degenerate.assign(static_cast<std::size_t>(trend.n_freq()), false);
  for (Eigen::Index k = 0; k < trend.n_freq(); ++k) {
    const double parts[3] = {trend.magnitude(k), seasonal.magnitude(k), noise.magnitude(k)};
    const double total = parts[0] + parts[1] + parts[2];
    for (int c = 0; c < 3; ++c) p.shares(k, c) = total > 0.0 ? parts[c] / total : 1.0 / 3.0;
    p.degenerate[static_cast<std::size_t>(k)] = !(total > 0.0);
  }
  return p;
}

// Least-squares slope of log|X_k| against log k over [k_min, k_max] for the
// first series of `spectrum`; returns the negated slope. Bins below 1e-12 of
// the spectrum's peak magnitude count as zero and are skipped.
inline double spectral_decay_fit(const Spectrum& spectrum, Eigen::Index k_min, Eigen::Index k_max) {
  if (k_min < 1 || k_max <= k_min) throw ConfigError("decay fit: need k_max > k_min >= 1");
  k_max = std::min(k_max, spectrum.n_freq() - 1);
  double peak = 0.0;
  for (Eigen::Index k = 0; k < spectrum.n_freq(); ++k) peak = std::max(peak, spectrum.magnitude(k));
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int count = 0;
  for (Eigen::Index k = k_min; k <= k_max; ++k) {
    const double mag = spectrum.magnitude(k);
    if (!(mag > 1e-12 * peak)) continue;
    const double x = std::log(static_cast<double>(k));
    const double y = std::log(mag);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++count;
  }
  if (count < 2) throw FitError("decay fit: fewer than 2 usable bins");
  const double slope = (count * sxy - sx * sy) / (count * sxx - sx * sx);
  return -slope;
}

}  // namespace fredn
