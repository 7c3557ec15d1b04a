#pragma once

// Time- and frequency-domain forecasting losses with closed-form gradients.
//
// Inputs are tau x S matrices, one forecast series per column. Each loss is
// computed per series and averaged over columns:
//   time-mse  ||e||_2^2 / tau           time-mae  ||e||_1 / tau
//   freq-mse  ||F e||_2^2 / tau_freq    freq-mae  sum_k |(F e)_k| / tau_freq
// with e = y_hat - y and tau_freq = floor(tau/2) + 1. In the default
// one-sided mode F e is the unnormalized rfft of e; OrthonormalFull uses
// the full unitary DFT instead, under which freq-mse is Parseval-equivalent
// to time-mse.

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "fredn/dft.hpp"
#include "fredn/errors.hpp"

namespace fredn {

enum class LossKind { TimeMSE, TimeMAE, FreqMSE, FreqMAE };
enum class SpectrumMode { OneSided, OrthonormalFull };

inline constexpr LossKind kAllLossKinds[] = {LossKind::TimeMSE, LossKind::TimeMAE, LossKind::FreqMSE,
                                             LossKind::FreqMAE};

inline std::string to_string(LossKind k) {
  switch (k) {
    case LossKind::TimeMSE: return "time-mse";
    case LossKind::TimeMAE: return "time-mae";
    case LossKind::FreqMSE: return "freq-mse";
    case LossKind::FreqMAE: return "freq-mae";
  }
  return "?";
}

inline LossKind parse_loss_kind(std::string_view s) {
  for (LossKind k : kAllLossKinds) {
    if (to_string(k) == s) return k;
  }
  throw ConfigError("unknown loss kind '" + std::string(s) + "'");
}

namespace detail {

inline void check_same_shape(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError("loss: prediction " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                         " vs target " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
  if (a.size() == 0) throw DimensionError("loss: empty input");
}

// Full orthonormal DFT of each column, returned as (re, im) tau x S.
inline void full_spectrum(const Eigen::MatrixXd& x, Eigen::MatrixXd& re, Eigen::MatrixXd& im, bool inverse) {
  const auto n = static_cast<std::size_t>(x.rows());
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  re.resize(x.rows(), x.cols());
  im.resize(x.rows(), x.cols());
  std::vector<Complex> col(n);
  for (Eigen::Index s = 0; s < x.cols(); ++s) {
    for (std::size_t t = 0; t < n; ++t) col[t] = {x(static_cast<Eigen::Index>(t), s), 0.0};
    const auto spec = fft(col, inverse);
    for (std::size_t k = 0; k < n; ++k) {
      re(static_cast<Eigen::Index>(k), s) = spec[k].real() * scale;
      im(static_cast<Eigen::Index>(k), s) = spec[k].imag() * scale;
    }
  }
}

// Real part of F^H g for the orthonormal full DFT, g given as (re, im).
inline Eigen::MatrixXd full_adjoint(const Eigen::MatrixXd& g_re, const Eigen::MatrixXd& g_im) {
  const auto n = static_cast<std::size_t>(g_re.rows());
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  Eigen::MatrixXd out(g_re.rows(), g_re.cols());
  std::vector<Complex> col(n);
  for (Eigen::Index s = 0; s < g_re.cols(); ++s) {
    for (std::size_t k = 0; k < n; ++k) {
      col[k] = {g_re(static_cast<Eigen::Index>(k), s), g_im(static_cast<Eigen::Index>(k), s)};
    }
    const auto time = fft(col, /*inverse=*/true);
    for (std::size_t t = 0; t < n; ++t) out(static_cast<Eigen::Index>(t), s) = time[t].real() * scale;
  }
  return out;
}

}  // namespace detail

// Residual e = y_hat - y and its spectrum in the requested mode. For
// OrthonormalFull the spectrum holds all tau bins.
struct Residual {
  Eigen::MatrixXd eps;
  Eigen::MatrixXd spec_re;
  Eigen::MatrixXd spec_im;
  SpectrumMode mode = SpectrumMode::OneSided;
};

inline Residual make_residual(const Eigen::MatrixXd& y_hat, const Eigen::MatrixXd& y,
                              SpectrumMode mode = SpectrumMode::OneSided) {
  detail::check_same_shape(y_hat, y);
  Residual r;
  r.eps = y_hat - y;
  r.mode = mode;
  if (mode == SpectrumMode::OneSided) {
    Spectrum s = rfft(r.eps);
    r.spec_re = std::move(s.re);
    r.spec_im = std::move(s.im);
  } else {
    detail::full_spectrum(r.eps, r.spec_re, r.spec_im, false);
  }
  return r;
}

// e~ / |e~| elementwise, 0 where e~ = 0 (minimum-norm subgradient of |.|).
inline void unit_phase(const Eigen::MatrixXd& re, const Eigen::MatrixXd& im, Eigen::MatrixXd& out_re,
                       Eigen::MatrixXd& out_im) {
  out_re.resize(re.rows(), re.cols());
  out_im.resize(re.rows(), re.cols());
  for (Eigen::Index i = 0; i < re.size(); ++i) {
    const double mag = std::hypot(re.data()[i], im.data()[i]);
    out_re.data()[i] = mag > 0.0 ? re.data()[i] / mag : 0.0;
    out_im.data()[i] = mag > 0.0 ? im.data()[i] / mag : 0.0;
  }
}

inline double frequency_length(Eigen::Index tau) { return static_cast<double>(tau / 2 + 1); }

inline double compute_loss(LossKind kind, const Eigen::MatrixXd& y_hat, const Eigen::MatrixXd& y,
                           SpectrumMode mode = SpectrumMode::OneSided) {
  detail::check_same_shape(y_hat, y);
  const auto tau = static_cast<double>(y.rows());
  const auto series = static_cast<double>(y.cols());
  const double tau_freq = frequency_length(y.rows());
  switch (kind) {
    case LossKind::TimeMSE: return (y_hat - y).squaredNorm() / tau / series;
    case LossKind::TimeMAE: return (y_hat - y).cwiseAbs().sum() / tau / series;
    case LossKind::FreqMSE: {
      const Residual r = make_residual(y_hat, y, mode);
      return (r.spec_re.squaredNorm() + r.spec_im.squaredNorm()) / tau_freq / series;
    }
    case LossKind::FreqMAE: {
      const Residual r = make_residual(y_hat, y, mode);
      double total = 0.0;
      for (Eigen::Index i = 0; i < r.spec_re.size(); ++i) total += std::hypot(r.spec_re.data()[i], r.spec_im.data()[i]);
      return total / tau_freq / series;
    }
  }
  return 0.0;
}

// dL/dy_hat for compute_loss with the same arguments.
inline Eigen::MatrixXd loss_gradient(LossKind kind, const Eigen::MatrixXd& y_hat, const Eigen::MatrixXd& y,
                                     SpectrumMode mode = SpectrumMode::OneSided) {
  detail::check_same_shape(y_hat, y);
  const auto tau = static_cast<double>(y.rows());
  const auto series = static_cast<double>(y.cols());
  const double tau_freq = frequency_length(y.rows());
  switch (kind) {
    case LossKind::TimeMSE: return (2.0 / (tau * series)) * (y_hat - y);
    case LossKind::TimeMAE:
      return (y_hat - y).unaryExpr([](double e) { return e > 0.0 ? 1.0 : (e < 0.0 ? -1.0 : 0.0); }) /
             (tau * series);
    case LossKind::FreqMSE:
    case LossKind::FreqMAE: {
      const Residual r = make_residual(y_hat, y, mode);
      Eigen::MatrixXd g_re, g_im;
      if (kind == LossKind::FreqMSE) {
        g_re = 2.0 * r.spec_re;
        g_im = 2.0 * r.spec_im;
      } else {
        unit_phase(r.spec_re, r.spec_im, g_re, g_im);
      }
      const double scale = 1.0 / (tau_freq * series);
      if (mode == SpectrumMode::OneSided) {
        return rfft_adjoint(g_re, g_im, static_cast<std::size_t>(y.rows())) * scale;
      }
      return detail::full_adjoint(g_re, g_im) * scale;
    }
  }
  return {};
}

}  // namespace fredn
