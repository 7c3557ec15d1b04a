#pragma once

// Real-input discrete Fourier transform for arbitrary lengths.
//
// Conventions:
//   rfft   X_k = s * sum_t x_t exp(-j 2 pi k t / n),  k = 0 .. n/2
//   irfft  the inverse of rfft under the same normalization
// with s = 1 (Unnormalized) or s = 1/sqrt(n) (Orthonormal). Only the
// one-sided half of the spectrum is stored; bins k > n/2 are implied by
// Hermitian symmetry.
//
// Lengths whose prime factors are all <= 31 run through a recursive
// mixed-radix Cooley-Tukey transform; anything else uses Bluestein's chirp-z
// algorithm on a power-of-two convolution.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "fredn/errors.hpp"

namespace fredn {

using Complex = std::complex<double>;

enum class Normalization { Unnormalized, Orthonormal };

// What irfft does with imaginary parts at DC and Nyquist. Strict rejects
// them; Project discards them, which is what a real-output inverse
// transform of an arbitrary complex tensor has to do.
enum class HermitianPolicy { Strict, Project };

inline std::size_t one_sided_length(std::size_t n) { return n / 2 + 1; }

// One-sided spectrum of a batch of real series, one series per column.
struct Spectrum {
  Eigen::MatrixXd re;  // n_freq x series
  Eigen::MatrixXd im;  // n_freq x series
  std::size_t time_len = 0;
  Normalization norm = Normalization::Unnormalized;

  Spectrum() = default;
  Spectrum(std::size_t n, Eigen::Index series, Normalization normalization)
      : re(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(one_sided_length(n)), series)),
        im(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(one_sided_length(n)), series)),
        time_len(n),
        norm(normalization) {}

  Eigen::Index n_freq() const { return re.rows(); }
  Eigen::Index series() const { return re.cols(); }
  Complex at(Eigen::Index k, Eigen::Index s = 0) const { return {re(k, s), im(k, s)}; }
  double magnitude(Eigen::Index k, Eigen::Index s = 0) const { return std::hypot(re(k, s), im(k, s)); }
};

namespace detail {

inline double scale_for(std::size_t n, Normalization norm) {
  return norm == Normalization::Orthonormal ? 1.0 / std::sqrt(static_cast<double>(n)) : 1.0;
}

// exp(-j 2 pi i / n), exact at quarter turns so that purely real inputs give
// exactly real DC and Nyquist bins.
inline Complex unit_root(std::size_t i, std::size_t n) {
  i %= n;
  if (i == 0) return {1.0, 0.0};
  if (4 * i == n) return {0.0, -1.0};
  if (2 * i == n) return {-1.0, 0.0};
  if (4 * i == 3 * n) return {0.0, 1.0};
  const double angle = -2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n);
  return {std::cos(angle), std::sin(angle)};
}

class FftPlan {
 public:
  static constexpr std::size_t kMaxRadix = 31;

  explicit FftPlan(std::size_t n) : n_(n) {
    if (n == 0) throw DataError("fft: empty input");
    std::size_t rest = n;
    for (std::size_t p = 2; p * p <= rest; ++p) {
      while (rest % p == 0) {
        factors_.push_back(p);
        rest /= p;
      }
    }
    if (rest > 1) factors_.push_back(rest);
    const bool smooth = factors_.empty() || factors_.back() <= kMaxRadix;
    if (smooth) {
      twiddles_.resize(n);
      for (std::size_t i = 0; i < n; ++i) twiddles_[i] = unit_root(i, n);
    } else {
      init_bluestein();
    }
  }

  std::size_t size() const { return n_; }
  bool uses_bluestein() const { return conv_plan_ != nullptr; }

  // out[k] = sum_t in[t] exp(-j 2 pi k t / n). `in` and `out` must not alias.
  void forward(const Complex* in, Complex* out) const {
    if (conv_plan_) {
      bluestein(in, out);
    } else {
      recurse(in, 1, out, n_, 0);
    }
  }

  // out[k] = sum_t in[t] exp(+j 2 pi k t / n), unscaled.
  void backward(const Complex* in, Complex* out) const {
    std::vector<Complex> conj_in(n_);
    for (std::size_t i = 0; i < n_; ++i) conj_in[i] = std::conj(in[i]);
    forward(conj_in.data(), out);
    for (std::size_t i = 0; i < n_; ++i) out[i] = std::conj(out[i]);
  }

 private:
  void recurse(const Complex* in, std::size_t stride, Complex* out, std::size_t n, std::size_t level) const {
    if (n == 1) {
      out[0] = in[0];
      return;
    }
    const std::size_t p = factors_[level];
    const std::size_t m = n / p;
    for (std::size_t r = 0; r < p; ++r) recurse(in + r * stride, stride * p, out + r * m, m, level + 1);

    const std::size_t step = n_ / n;
    if (p == 2) {
      for (std::size_t k = 0; k < m; ++k) {
        const Complex a = out[k];
        const Complex b = out[m + k] * twiddles_[k * step];
        out[k] = a + b;
        out[m + k] = a - b;
      }
      return;
    }
    std::array<Complex, kMaxRadix> column{};
    for (std::size_t k = 0; k < m; ++k) {
      for (std::size_t r = 0; r < p; ++r) column[r] = out[r * m + k];
      for (std::size_t q = 0; q < p; ++q) {
        const std::size_t idx = q * m + k;
        Complex acc = column[0];
        for (std::size_t r = 1; r < p; ++r) acc += column[r] * twiddles_[((r * idx) % n) * step];
        out[idx] = acc;
      }
    }
  }

  void init_bluestein() {
    std::size_t m = 1;
    while (m < 2 * n_ - 1) m <<= 1;
    conv_plan_ = std::make_unique<FftPlan>(m);
    chirp_.resize(n_);
    const std::size_t period = 2 * n_;
    for (std::size_t k = 0; k < n_; ++k) {
      // exp(-j pi k^2 / n) with k^2 reduced modulo 2n before the angle is formed.
      const std::size_t k2 = static_cast<std::size_t>((static_cast<unsigned long long>(k) * k) % period);
      const double angle = -std::numbers::pi * static_cast<double>(k2) / static_cast<double>(n_);
      chirp_[k] = {std::cos(angle), std::sin(angle)};
    }
    std::vector<Complex> kernel(m, Complex{});
    kernel[0] = std::conj(chirp_[0]);
    for (std::size_t k = 1; k < n_; ++k) {
      kernel[k] = std::conj(chirp_[k]);
      kernel[m - k] = std::conj(chirp_[k]);
    }
    kernel_spectrum_.resize(m);
    conv_plan_->forward(kernel.data(), kernel_spectrum_.data());
  }

  void bluestein(const Complex* in, Complex* out) const {
    const std::size_t m = conv_plan_->size();
    std::vector<Complex> a(m, Complex{});
    for (std::size_t k = 0; k < n_; ++k) a[k] = in[k] * chirp_[k];
    std::vector<Complex> spec(m);
    conv_plan_->forward(a.data(), spec.data());
    for (std::size_t k = 0; k < m; ++k) spec[k] *= kernel_spectrum_[k];
    conv_plan_->backward(spec.data(), a.data());
    const double inv_m = 1.0 / static_cast<double>(m);
    for (std::size_t k = 0; k < n_; ++k) out[k] = a[k] * chirp_[k] * inv_m;
  }

  std::size_t n_;
  std::vector<std::size_t> factors_;
  std::vector<Complex> twiddles_;
  std::unique_ptr<FftPlan> conv_plan_;
  std::vector<Complex> chirp_;
  std::vector<Complex> kernel_spectrum_;
};

// Plans are built once per length and never mutated afterwards.
inline const FftPlan& plan_for(std::size_t n) {
  static std::mutex mutex;
  static std::map<std::size_t, std::unique_ptr<FftPlan>> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto& slot = cache[n];
  if (!slot) slot = std::make_unique<FftPlan>(n);
  return *slot;
}

// y_t = sum_{k one-sided} w_k Re(Z_k exp(+j 2 pi k t / n)), w_k = 2 on interior
// bins and 1 on DC / Nyquist. Imaginary parts at DC and Nyquist do not
// contribute. This is n * irfft(Z) for the unnormalized convention.
inline Eigen::MatrixXd hermitian_synthesis(const Eigen::MatrixXd& re, const Eigen::MatrixXd& im, std::size_t n) {
  const auto n_freq = static_cast<Eigen::Index>(one_sided_length(n));
  const FftPlan& plan = plan_for(n);
  Eigen::MatrixXd result(static_cast<Eigen::Index>(n), re.cols());
  std::vector<Complex> full(n), time(n);
  for (Eigen::Index s = 0; s < re.cols(); ++s) {
    full[0] = {re(0, s), 0.0};
    for (Eigen::Index k = 1; k < n_freq; ++k) {
      const auto uk = static_cast<std::size_t>(k);
      if (2 * uk == n) {
        full[uk] = {re(k, s), 0.0};
      } else {
        full[uk] = {re(k, s), im(k, s)};
        full[n - uk] = {re(k, s), -im(k, s)};
      }
    }
    plan.backward(full.data(), time.data());
    for (std::size_t t = 0; t < n; ++t) result(static_cast<Eigen::Index>(t), s) = time[t].real();
  }
  return result;
}

}  // namespace detail

// Unscaled complex DFT (or its conjugate when `inverse`).
inline std::vector<Complex> fft(std::span<const Complex> x, bool inverse = false) {
  if (x.empty()) throw DataError("fft: empty input");
  const auto& plan = detail::plan_for(x.size());
  std::vector<Complex> out(x.size());
  if (inverse) {
    plan.backward(x.data(), out.data());
  } else {
    plan.forward(x.data(), out.data());
  }
  return out;
}

// Column-wise one-sided transform of an n x series matrix.
inline Spectrum rfft(const Eigen::MatrixXd& x, Normalization norm = Normalization::Unnormalized) {
  const auto n = static_cast<std::size_t>(x.rows());
  if (n == 0) throw DataError("rfft: empty input");
  const auto& plan = detail::plan_for(n);
  const double scale = detail::scale_for(n, norm);
  Spectrum spec(n, x.cols(), norm);
  std::vector<Complex> in(n), out(n);
  for (Eigen::Index s = 0; s < x.cols(); ++s) {
    for (std::size_t t = 0; t < n; ++t) in[t] = {x(static_cast<Eigen::Index>(t), s), 0.0};
    plan.forward(in.data(), out.data());
    for (Eigen::Index k = 0; k < spec.n_freq(); ++k) {
      spec.re(k, s) = out[static_cast<std::size_t>(k)].real() * scale;
      spec.im(k, s) = out[static_cast<std::size_t>(k)].imag() * scale;
    }
    spec.im(0, s) = 0.0;
    if (n % 2 == 0) spec.im(spec.n_freq() - 1, s) = 0.0;
  }
  return spec;
}

inline Spectrum rfft(std::span<const double> x, Normalization norm = Normalization::Unnormalized) {
  Eigen::MatrixXd column(static_cast<Eigen::Index>(x.size()), 1);
  for (std::size_t t = 0; t < x.size(); ++t) column(static_cast<Eigen::Index>(t), 0) = x[t];
  return rfft(column, norm);
}

inline void check_hermitian(const Spectrum& spec, std::size_t n) {
  const double tol = 1e-9 * (1.0 + std::max(spec.re.cwiseAbs().maxCoeff(), spec.im.cwiseAbs().maxCoeff()));
  const Eigen::Index last = spec.n_freq() - 1;
  for (Eigen::Index s = 0; s < spec.series(); ++s) {
    if (std::abs(spec.im(0, s)) > tol) throw HermitianError("irfft: DC bin has a nonzero imaginary part");
    if (n % 2 == 0 && std::abs(spec.im(last, s)) > tol) {
      throw HermitianError("irfft: Nyquist bin has a nonzero imaginary part");
    }
  }
}

// Inverse of rfft; returns an n x series matrix.
inline Eigen::MatrixXd irfft(const Spectrum& spec, std::size_t n, HermitianPolicy policy = HermitianPolicy::Strict) {
  if (n == 0) throw DataError("irfft: empty output length");
  if (static_cast<std::size_t>(spec.n_freq()) != one_sided_length(n) || spec.im.rows() != spec.re.rows() ||
      spec.im.cols() != spec.re.cols()) {
    throw DimensionError("irfft: spectrum has " + std::to_string(spec.n_freq()) + " bins, length " +
                         std::to_string(n) + " needs " + std::to_string(one_sided_length(n)));
  }
  if (policy == HermitianPolicy::Strict) check_hermitian(spec, n);
  const double scale = spec.norm == Normalization::Orthonormal ? 1.0 / std::sqrt(static_cast<double>(n))
                                                               : 1.0 / static_cast<double>(n);
  return detail::hermitian_synthesis(spec.re, spec.im, n) * scale;
}

// Adjoint of rfft: given dL/dRe X_k and dL/dIm X_k for the one-sided bins,
// returns dL/dx. Interior bins enter once here because the one-sided map
// already counts each of them once.
inline Eigen::MatrixXd rfft_adjoint(const Eigen::MatrixXd& grad_re, const Eigen::MatrixXd& grad_im, std::size_t n,
                                    Normalization norm = Normalization::Unnormalized) {
  const auto n_freq = static_cast<Eigen::Index>(one_sided_length(n));
  if (grad_re.rows() != n_freq || grad_im.rows() != n_freq || grad_re.cols() != grad_im.cols()) {
    throw DimensionError("rfft_adjoint: gradient shape does not match length " + std::to_string(n));
  }
  Eigen::MatrixXd half_re = grad_re * 0.5;
  Eigen::MatrixXd half_im = grad_im * 0.5;
  half_re.row(0) = grad_re.row(0);
  if (n % 2 == 0) half_re.row(n_freq - 1) = grad_re.row(n_freq - 1);
  return detail::hermitian_synthesis(half_re, half_im, n) * detail::scale_for(n, norm);
}

// Adjoint of irfft (with the Project policy): given dL/dx for an n x series
// output, returns dL/dRe Z and dL/dIm Z of the one-sided input spectrum.
inline Spectrum irfft_adjoint(const Eigen::MatrixXd& grad, Normalization norm = Normalization::Unnormalized) {
  const auto n = static_cast<std::size_t>(grad.rows());
  Spectrum g = rfft(grad, Normalization::Unnormalized);
  const double base = norm == Normalization::Orthonormal ? 1.0 / std::sqrt(static_cast<double>(n))
                                                         : 1.0 / static_cast<double>(n);
  g.re *= 2.0 * base;
  g.im *= 2.0 * base;
  g.re.row(0) *= 0.5;
  g.im.row(0).setZero();
  if (n % 2 == 0) {
    g.re.row(g.n_freq() - 1) *= 0.5;
    g.im.row(g.n_freq() - 1).setZero();
  }
  g.norm = norm;
  return g;
}

// Dense n x n Fourier matrix, entry (k, t) = s * exp(-j 2 pi k t / n).
inline Eigen::MatrixXcd dft_matrix(std::size_t n, Normalization norm = Normalization::Unnormalized) {
  if (n == 0) throw DataError("dft_matrix: empty size");
  const double scale = detail::scale_for(n, norm);
  const auto size = static_cast<Eigen::Index>(n);
  Eigen::MatrixXcd f(size, size);
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t t = 0; t < n; ++t) {
      f(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(t)) = detail::unit_root(k * t, n) * scale;
    }
  }
  return f;
}

}  // namespace fredn
