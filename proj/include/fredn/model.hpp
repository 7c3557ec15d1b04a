#pragma once

// FreDN forward pass and its analytic backward pass.
//
// Batches are laid out with time along rows. The model input is L x S with
// S = batch * channels columns ordered (window, channel); internally the
// embedding expands each column into d consecutive columns, giving
// N = S * d series ordered (window, channel, embed).
//
// Forward, per column:
//   RevIN -> embed (x * phi) -> split into trend / season
//   trend:  time-domain ResMLP L -> tau, then a d -> 1 projection
//   season: spectral ResMLP L_freq -> tau_freq applied with one weight set
//           to the real and to the imaginary plane (ReIm block), irfft to
//           tau, then a d -> 1 projection
//   sum -> inverse RevIN
// The split is the learnable frequency disentangler (FreDN), a moving
// average (MovDN) or top-K spectral selection (TopKDN). The ComplexLinear
// variant keeps the disentangler but swaps the ReIm block for stacked
// complex linears.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fredn/decomposition.hpp"
#include "fredn/dft.hpp"
#include "fredn/errors.hpp"
#include "fredn/losses.hpp"
#include "fredn/nn.hpp"

namespace fredn {

using nn::Tensor;

enum class Variant { FreDN, MovDN, TopKDN, ComplexLinear };

inline constexpr Variant kAllVariants[] = {Variant::FreDN, Variant::MovDN, Variant::TopKDN, Variant::ComplexLinear};

inline std::string to_string(Variant v) {
  switch (v) {
    case Variant::FreDN: return "fredn";
    case Variant::MovDN: return "movdn";
    case Variant::TopKDN: return "topkdn";
    case Variant::ComplexLinear: return "complex-linear";
  }
  return "?";
}

inline Variant parse_variant(std::string_view s) {
  for (Variant v : kAllVariants) {
    if (to_string(v) == s) return v;
  }
  throw ConfigError("unknown variant '" + std::string(s) + "'");
}

inline bool uses_disentangler(Variant v) { return v == Variant::FreDN || v == Variant::ComplexLinear; }

struct ModelConfig {
  Eigen::Index channels = 1;
  Eigen::Index lookback = 96;
  Eigen::Index horizon = 96;
  Eigen::Index embed_dim = 8;
  Eigen::Index hidden_size = 128;
  Eigen::Index depth = 2;
  double dropout = 0.1;
  bool layer_norm = true;
  Variant variant = Variant::FreDN;
  Eigen::Index ma_window = 25;
  Eigen::Index topk = 0;  // 0 selects floor(log2 lookback)
  double mask_init_order = 1.0;
  double revin_eps = 1e-5;

  Eigen::Index lookback_freq() const { return lookback / 2 + 1; }
  Eigen::Index horizon_freq() const { return horizon / 2 + 1; }
  Eigen::Index effective_topk() const {
    return topk > 0 ? topk : topk_heuristic(static_cast<std::size_t>(lookback));
  }

  nn::ResMlpConfig season_mlp_config() const {
    return {lookback_freq(), horizon_freq(), hidden_size, depth, dropout, layer_norm};
  }
  nn::ResMlpConfig trend_mlp_config() const { return {lookback, horizon, hidden_size, depth, dropout, layer_norm}; }

  void validate() const {
    if (channels < 1) throw ConfigError("model: channels must be >= 1");
    if (lookback < 2) throw ConfigError("model: lookback must be >= 2");
    if (horizon < 1) throw ConfigError("model: horizon must be >= 1");
    if (embed_dim < 1) throw ConfigError("model: embed_dim must be >= 1");
    if (revin_eps <= 0.0) throw ConfigError("model: revin eps must be positive");
    season_mlp_config().validate();
    trend_mlp_config().validate();
    if (variant == Variant::MovDN) check_ma_window(ma_window, lookback);
    if (variant == Variant::TopKDN && (effective_topk() < 1 || effective_topk() > lookback_freq())) {
      throw ConfigError("model: top-K must lie in [1, L_freq]");
    }
    if (uses_disentangler(variant) && mask_init_order < 1.0) throw ConfigError("model: mask init order must be >= 1");
  }
};

// ---------------------------------------------------------------------------
// RevIN and embedding

// Per-column lookback statistics; scale = sqrt(var + eps).
struct RevInStats {
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd stddev;
  Eigen::RowVectorXd scale;
  double eps = 1e-5;
};

inline RevInStats revin_stats(const Tensor& x, double eps) {
  if (x.rows() < 2) throw DataError("revin: lookback must be >= 2");
  RevInStats st;
  st.eps = eps;
  const auto n = static_cast<double>(x.rows());
  st.mean = x.colwise().sum() / n;
  const Eigen::RowVectorXd var = (x.rowwise() - st.mean).array().square().colwise().sum() / n;
  st.stddev = var.array().sqrt();
  st.scale = (var.array() + eps).sqrt();
  return st;
}

// Column s belongs to channel s % gamma.size().
inline Tensor revin_normalize(const Tensor& x, const RevInStats& st, const Tensor& gamma, const Tensor& beta) {
  const Eigen::Index c = gamma.rows();
  Tensor out(x.rows(), x.cols());
  for (Eigen::Index s = 0; s < x.cols(); ++s) {
    out.col(s) = (gamma(s % c, 0) / st.scale(s)) * (x.col(s).array() - st.mean(s)).matrix();
    out.col(s).array() += beta(s % c, 0);
  }
  return out;
}

inline Tensor revin_denormalize(const Tensor& y, const RevInStats& st, const Tensor& gamma, const Tensor& beta) {
  const Eigen::Index c = gamma.rows();
  Tensor out(y.rows(), y.cols());
  for (Eigen::Index s = 0; s < y.cols(); ++s) {
    const double g = gamma(s % c, 0);
    if (g == 0.0) throw SingularError("revin: gamma is zero for channel " + std::to_string(s % c));
    out.col(s) = ((st.scale(s) / g) * (y.col(s).array() - beta(s % c, 0))).matrix();
    out.col(s).array() += st.mean(s);
  }
  return out;
}

// emb[:, s*d + i] = x[:, s] * phi[i].
inline Tensor embed(const Tensor& x, const Tensor& phi) {
  const Eigen::Index d = phi.rows();
  if (d < 1) throw ConfigError("embed: d must be >= 1");
  Tensor out(x.rows(), x.cols() * d);
  for (Eigen::Index s = 0; s < x.cols(); ++s) {
    for (Eigen::Index i = 0; i < d; ++i) out.col(s * d + i) = x.col(s) * phi(i, 0);
  }
  return out;
}

// out[:, s] = sum_i w[i] * x[:, s*d + i] + b.
inline Tensor collapse_embedding(const Tensor& x, const nn::Linear& head) {
  const Eigen::Index d = head.in();
  const Eigen::Index series = x.cols() / d;
  Tensor out(x.rows(), series);
  const Eigen::VectorXd w = head.weight.row(0).transpose();
  for (Eigen::Index s = 0; s < series; ++s) {
    out.col(s) = x.middleCols(s * d, d) * w;
    out.col(s).array() += head.bias(0, 0);
  }
  return out;
}

inline Tensor collapse_embedding_backward(const Tensor& x, const nn::Linear& head, const Tensor& dy,
                                          nn::Linear& grad) {
  const Eigen::Index d = head.in();
  Tensor dx(x.rows(), x.cols());
  for (Eigen::Index s = 0; s < dy.cols(); ++s) {
    grad.weight.row(0) += (dy.col(s).transpose() * x.middleCols(s * d, d));
    grad.bias(0, 0) += dy.col(s).sum();
    for (Eigen::Index i = 0; i < d; ++i) dx.col(s * d + i) = dy.col(s) * head.weight(0, i);
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Parameters

struct ModelParams {
  ModelConfig config;
  Tensor embedding;  // d x 1
  DisentanglerMask mask;
  nn::ResMlp season_mlp;
  nn::ComplexResMlp season_complex;
  nn::ResMlp trend_mlp;
  nn::Linear season_out;  // 1 x d
  nn::Linear trend_out;   // 1 x d
  Tensor revin_gamma;     // C x 1
  Tensor revin_beta;      // C x 1

  // Embedding starts at all-ones, the mask at -m log(1 + k), RevIN at the
  // identity affine map; linears draw U(-1/sqrt(in), 1/sqrt(in)).
  static ModelParams create(const ModelConfig& cfg, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return build(cfg, &rng);
  }

  // Same structure with every tensor zero.
  ModelParams zeros_like() const { return build(config, nullptr); }

  void visit(const nn::TensorVisitor& f) {
    if (embedding.size() == 0) return;
    f("embedding", embedding);
    if (uses_disentangler(config.variant)) f("mask.logits", mask.logits);
    if (config.variant == Variant::ComplexLinear) {
      season_complex.visit("season_complex", f);
    } else {
      season_mlp.visit("season_mlp", f);
    }
    trend_mlp.visit("trend_mlp", f);
    season_out.visit("season_out", f);
    trend_out.visit("trend_out", f);
    f("revin.gamma", revin_gamma);
    f("revin.beta", revin_beta);
  }

  std::vector<std::pair<std::string, Tensor*>> tensors() {
    std::vector<std::pair<std::string, Tensor*>> out;
    visit([&out](const std::string& name, Tensor& t) { out.emplace_back(name, &t); });
    return out;
  }

 private:
  static ModelParams build(const ModelConfig& cfg, std::mt19937_64* rng) {
    cfg.validate();
    ModelParams p;
    p.config = cfg;
    const Eigen::Index d = cfg.embed_dim;
    p.embedding = rng ? Tensor::Ones(d, 1) : Tensor::Zero(d, 1);
    if (uses_disentangler(cfg.variant)) {
      p.mask = init_mask(cfg.lookback_freq(), d, cfg.mask_init_order);
      if (!rng) p.mask.logits.setZero();
    }
    if (cfg.variant == Variant::ComplexLinear) {
      p.season_complex = nn::ComplexResMlp::create(cfg.season_mlp_config(), rng);
    } else {
      p.season_mlp = nn::ResMlp::create(cfg.season_mlp_config(), rng);
    }
    p.trend_mlp = nn::ResMlp::create(cfg.trend_mlp_config(), rng);
    p.season_out = rng ? nn::Linear::uniform(d, 1, *rng) : nn::Linear::zeros(d, 1);
    p.trend_out = rng ? nn::Linear::uniform(d, 1, *rng) : nn::Linear::zeros(d, 1);
    p.revin_gamma = rng ? Tensor::Ones(cfg.channels, 1) : Tensor::Zero(cfg.channels, 1);
    p.revin_beta = Tensor::Zero(cfg.channels, 1);
    return p;
  }
};

struct ParamCount {
  Eigen::Index spectral = 0;  // seasonal MLP (ReIm block or complex stack)
  Eigen::Index season_head = 0;
  Eigen::Index trend = 0;  // TimeMLP
  Eigen::Index trend_head = 0;
  Eigen::Index disentangler = 0;
  Eigen::Index embedding = 0;
  Eigen::Index revin = 0;
  Eigen::Index total() const {
    return spectral + season_head + trend + trend_head + disentangler + embedding + revin;
  }
};

inline ParamCount param_count(const ModelParams& p) {
  ParamCount c;
  if (p.embedding.size() == 0) return c;
  c.spectral = p.config.variant == Variant::ComplexLinear ? p.season_complex.param_count() : p.season_mlp.param_count();
  c.season_head = p.season_out.param_count();
  c.trend = p.trend_mlp.param_count();
  c.trend_head = p.trend_out.param_count();
  c.disentangler = uses_disentangler(p.config.variant) ? p.mask.logits.size() : 0;
  c.embedding = p.embedding.size();
  c.revin = p.revin_gamma.size() + p.revin_beta.size();
  return c;
}

// ---------------------------------------------------------------------------
// ReIm block

// One shared real ResMLP applied along the frequency axis to the real plane
// and, separately, to the imaginary plane of `season`.
inline Spectrum reim_forward(const Spectrum& season, const nn::ResMlp& mlp, std::size_t out_time_len,
                             const nn::ForwardContext& ctx = {}, nn::ResMlp::Cache* cache = nullptr) {
  const Eigen::Index n = season.series();
  Tensor planes(season.n_freq(), 2 * n);
  planes << season.re, season.im;
  const Tensor y = mlp.forward(planes, ctx, cache);
  Spectrum out;
  out.re = y.leftCols(n);
  out.im = y.rightCols(n);
  out.time_len = out_time_len;
  out.norm = season.norm;
  return out;
}

// Reachability of a complex target z by a real-weighted combination w^T x.
// Solves the 2 x d real system [Re x; Im x] w = [Re z; Im z] in the
// least-squares sense and returns the residual norm.
inline double reim_reachability_residual(const Eigen::VectorXcd& x, Complex z) {
  Eigen::MatrixXd a(2, x.size());
  a.row(0) = x.real().transpose();
  a.row(1) = x.imag().transpose();
  const Eigen::Vector2d b(z.real(), z.imag());
  const Eigen::VectorXd w = a.completeOrthogonalDecomposition().solve(b);
  return (a * w - b).norm();
}

// True when two entries have a phase difference outside pi * Z, i.e. the
// entries span the complex plane over the reals.
inline bool spans_complex_plane(const Eigen::VectorXcd& x, double tol = 1e-12) {
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    for (Eigen::Index j = i + 1; j < x.size(); ++j) {
      // Im(conj(x_i) x_j) = |x_i||x_j| sin(arg x_j - arg x_i)
      const double cross = (std::conj(x(i)) * x(j)).imag();
      if (std::abs(cross) > tol * std::abs(x(i)) * std::abs(x(j))) return true;
    }
  }
  return false;
}

// ---------------------------------------------------------------------------
// Forward / backward

struct ForwardCache {
  Tensor x;
  RevInStats stats;
  Tensor x_norm;
  Tensor emb;
  Spectrum spec;        // rfft(emb) for FreDN / ComplexLinear / TopKDN
  Tensor share;         // sigmoid(mask), L_freq x d
  Tensor keep;          // top-K keep mask
  Spectrum season;      // seasonal spectrum entering the spectral MLP
  Tensor trend_time;    // L x N
  nn::ResMlp::Cache season_cache;
  nn::ComplexResMlp::Cache complex_cache;
  Tensor season_time;  // tau x N
  nn::ResMlp::Cache trend_cache;
  Tensor trend_tau;  // tau x N
  Tensor y_norm;     // tau x S
};

inline Tensor forward(const ModelParams& p, const Tensor& x, const nn::ForwardContext& ctx = {},
                      ForwardCache* cache = nullptr) {
  const ModelConfig& cfg = p.config;
  if (x.rows() != cfg.lookback || x.cols() % cfg.channels != 0 || x.cols() == 0) {
    throw DimensionError("forward: input " + std::to_string(x.rows()) + "x" + std::to_string(x.cols()) +
                         " incompatible with lookback " + std::to_string(cfg.lookback) + " and " +
                         std::to_string(cfg.channels) + " channels");
  }
  if (!x.allFinite()) throw DataError("forward: input contains non-finite values");
  ForwardCache local;
  ForwardCache& c = cache ? *cache : local;
  const auto len = static_cast<std::size_t>(cfg.lookback);
  const auto tau = static_cast<std::size_t>(cfg.horizon);

  c.x = x;
  c.stats = revin_stats(x, cfg.revin_eps);
  c.x_norm = revin_normalize(x, c.stats, p.revin_gamma, p.revin_beta);
  c.emb = embed(c.x_norm, p.embedding);

  switch (cfg.variant) {
    case Variant::FreDN:
    case Variant::ComplexLinear: {
      c.spec = rfft(c.emb);
      c.share = p.mask.trend_share();
      SpectralSplit split = fred_split(c.spec, p.mask);
      c.trend_time = irfft(split.trend, len, HermitianPolicy::Project);
      c.season = std::move(split.season);
      break;
    }
    case Variant::MovDN: {
      c.trend_time = moving_average(c.emb, cfg.ma_window);
      c.season = rfft(c.emb - c.trend_time);
      break;
    }
    case Variant::TopKDN: {
      c.spec = rfft(c.emb);
      c.keep = topk_keep_mask(c.spec, cfg.effective_topk(), cfg.embed_dim);
      c.season = c.spec;
      c.season.re.array() *= c.keep.array();
      c.season.im.array() *= c.keep.array();
      c.trend_time = c.emb - irfft(c.season, len, HermitianPolicy::Project);
      break;
    }
  }

  Spectrum season_out;
  if (cfg.variant == Variant::ComplexLinear) {
    season_out = Spectrum(tau, c.season.series(), Normalization::Unnormalized);
    p.season_complex.forward(c.season.re, c.season.im, season_out.re, season_out.im,
                             cache ? &c.complex_cache : nullptr);
  } else {
    season_out = reim_forward(c.season, p.season_mlp, tau, ctx, cache ? &c.season_cache : nullptr);
  }
  c.season_time = irfft(season_out, tau, HermitianPolicy::Project);
  c.trend_tau = p.trend_mlp.forward(c.trend_time, ctx, cache ? &c.trend_cache : nullptr);
  c.y_norm = collapse_embedding(c.season_time, p.season_out) + collapse_embedding(c.trend_tau, p.trend_out);
  return revin_denormalize(c.y_norm, c.stats, p.revin_gamma, p.revin_beta);
}

// Accumulates dL/dparams into `grad` given dL/dy for the output of the
// forward pass recorded in `c`.
inline void backward(const ModelParams& p, const ForwardCache& c, const Tensor& dy, ModelParams& grad) {
  const ModelConfig& cfg = p.config;
  const Eigen::Index channels = cfg.channels;
  const Eigen::Index d = cfg.embed_dim;
  const auto len = static_cast<std::size_t>(cfg.lookback);
  const Eigen::Index n = c.emb.cols();

  // Inverse RevIN: y = scale * (y_norm - beta) / gamma + mean.
  Tensor dy_norm(dy.rows(), dy.cols());
  for (Eigen::Index s = 0; s < dy.cols(); ++s) {
    const Eigen::Index ch = s % channels;
    const double g = p.revin_gamma(ch, 0);
    const double b = p.revin_beta(ch, 0);
    const double scale = c.stats.scale(s);
    dy_norm.col(s) = dy.col(s) * (scale / g);
    grad.revin_gamma(ch, 0) -= scale / (g * g) * (dy.col(s).array() * (c.y_norm.col(s).array() - b)).sum();
    grad.revin_beta(ch, 0) -= scale / g * dy.col(s).sum();
  }

  const Tensor d_season_time = collapse_embedding_backward(c.season_time, p.season_out, dy_norm, grad.season_out);
  const Tensor d_trend_tau = collapse_embedding_backward(c.trend_tau, p.trend_out, dy_norm, grad.trend_out);

  // Seasonal branch back to the spectral input.
  const Spectrum d_season_out = irfft_adjoint(d_season_time);
  Tensor d_season_re, d_season_im;
  if (cfg.variant == Variant::ComplexLinear) {
    p.season_complex.backward(c.complex_cache, d_season_out.re, d_season_out.im, grad.season_complex, d_season_re,
                              d_season_im);
  } else {
    Tensor d_planes(d_season_out.n_freq(), 2 * n);
    d_planes << d_season_out.re, d_season_out.im;
    const Tensor dz = p.season_mlp.backward(c.season_cache, d_planes, grad.season_mlp);
    d_season_re = dz.leftCols(n);
    d_season_im = dz.rightCols(n);
  }

  const Tensor d_trend_time = p.trend_mlp.backward(c.trend_cache, d_trend_tau, grad.trend_mlp);

  Tensor d_emb;
  switch (cfg.variant) {
    case Variant::FreDN:
    case Variant::ComplexLinear: {
      const Spectrum d_trend_spec = irfft_adjoint(d_trend_time);
      Tensor dx_re(c.spec.n_freq(), n), dx_im(c.spec.n_freq(), n);
      for (Eigen::Index s = 0; s < n; ++s) {
        const Eigen::Index i = s % d;
        const auto share = c.share.col(i).array();
        dx_re.col(s).array() = d_trend_spec.re.col(s).array() * share + d_season_re.col(s).array() * (1.0 - share);
        dx_im.col(s).array() = d_trend_spec.im.col(s).array() * share + d_season_im.col(s).array() * (1.0 - share);
        const auto d_share = (d_trend_spec.re.col(s).array() - d_season_re.col(s).array()) * c.spec.re.col(s).array() +
                             (d_trend_spec.im.col(s).array() - d_season_im.col(s).array()) * c.spec.im.col(s).array();
        grad.mask.logits.col(i).array() += d_share * share * (1.0 - share);
      }
      d_emb = rfft_adjoint(dx_re, dx_im, len);
      break;
    }
    case Variant::MovDN: {
      const Tensor d_season_time_in = rfft_adjoint(d_season_re, d_season_im, len);
      d_emb = d_season_time_in + moving_average_adjoint(d_trend_time - d_season_time_in, cfg.ma_window);
      break;
    }
    case Variant::TopKDN: {
      const Spectrum d_from_trend = irfft_adjoint(d_trend_time);
      const Tensor ds_re = ((d_season_re - d_from_trend.re).array() * c.keep.array()).matrix();
      const Tensor ds_im = ((d_season_im - d_from_trend.im).array() * c.keep.array()).matrix();
      d_emb = d_trend_time + rfft_adjoint(ds_re, ds_im, len);
      break;
    }
  }

  // Embedding and RevIN normalization.
  const Eigen::Index series = c.x.cols();
  for (Eigen::Index s = 0; s < series; ++s) {
    Eigen::VectorXd dxn = Eigen::VectorXd::Zero(c.x.rows());
    for (Eigen::Index i = 0; i < d; ++i) {
      grad.embedding(i, 0) += d_emb.col(s * d + i).dot(c.x_norm.col(s));
      dxn += d_emb.col(s * d + i) * p.embedding(i, 0);
    }
    const Eigen::Index ch = s % channels;
    grad.revin_gamma(ch, 0) += dxn.dot(((c.x.col(s).array() - c.stats.mean(s)) / c.stats.scale(s)).matrix());
    grad.revin_beta(ch, 0) += dxn.sum();
  }
}

// Forward, loss and backward in one call. Returns the loss; gradients are
// accumulated into `grad`.
inline double loss_and_gradient(const ModelParams& p, const Tensor& x, const Tensor& y, LossKind kind,
                                ModelParams& grad, const nn::ForwardContext& ctx = {}) {
  ForwardCache cache;
  const Tensor y_hat = forward(p, x, ctx, &cache);
  const double loss = compute_loss(kind, y_hat, y);
  backward(p, cache, loss_gradient(kind, y_hat, y), grad);
  return loss;
}

// Gradients of `kind` w.r.t. every parameter, as a fresh zero-initialised
// ModelParams.
inline ModelParams model_backward(const ModelParams& p, const Tensor& x, const Tensor& y, LossKind kind) {
  ModelParams grad = p.zeros_like();
  loss_and_gradient(p, x, y, kind, grad);
  return grad;
}

}  // namespace fredn
