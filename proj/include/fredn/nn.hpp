#pragma once

// Dense layers with explicit backward passes. Every layer maps along the
// rows of its input: an `in x N` matrix holds N independent vectors, and the
// output is `out x N`. Backward functions accumulate parameter gradients into
// a same-shaped gradient object and return the gradient w.r.t. the input.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "fredn/errors.hpp"

namespace fredn::nn {

using Tensor = Eigen::MatrixXd;

// Callback receiving (qualified name, tensor) for every trainable tensor.
using TensorVisitor = std::function<void(const std::string&, Tensor&)>;

// Training-time state threaded through forward passes.
struct ForwardContext {
  bool training = false;
  std::mt19937_64* rng = nullptr;
};

inline void check_rows(const Tensor& x, Eigen::Index expected, const char* where) {
  if (x.rows() != expected) {
    throw DimensionError(std::string(where) + ": expected " + std::to_string(expected) + " rows, got " +
                         std::to_string(x.rows()));
  }
}

struct Linear {
  Tensor weight;  // out x in
  Tensor bias;    // out x 1

  static Linear zeros(Eigen::Index in, Eigen::Index out) { return {Tensor::Zero(out, in), Tensor::Zero(out, 1)}; }

  // U(-1/sqrt(in), 1/sqrt(in)) for weights and biases.
  static Linear uniform(Eigen::Index in, Eigen::Index out, std::mt19937_64& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Linear l = zeros(in, out);
    for (Eigen::Index i = 0; i < l.weight.size(); ++i) l.weight.data()[i] = dist(rng);
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias.data()[i] = dist(rng);
    return l;
  }

  Eigen::Index in() const { return weight.cols(); }
  Eigen::Index out() const { return weight.rows(); }
  Eigen::Index param_count() const { return weight.size() + bias.size(); }

  Tensor forward(const Tensor& x) const {
    check_rows(x, in(), "linear");
    Tensor y = weight * x;
    y.colwise() += bias.col(0);
    return y;
  }

  Tensor backward(const Tensor& x, const Tensor& dy, Linear& grad) const {
    grad.weight.noalias() += dy * x.transpose();
    grad.bias.col(0) += dy.rowwise().sum();
    return weight.transpose() * dy;
  }

  void visit(const std::string& prefix, const TensorVisitor& f) {
    f(prefix + ".weight", weight);
    f(prefix + ".bias", bias);
  }
};

// Normalizes each column to zero mean and unit variance (no affine terms).
struct LayerNorm {
  static constexpr double kEps = 1e-5;

  static Tensor forward(const Tensor& x, Eigen::RowVectorXd* inv_std = nullptr) {
    const auto n = static_cast<double>(x.rows());
    const Eigen::RowVectorXd mean = x.colwise().sum() / n;
    Tensor centered = x.rowwise() - mean;
    const Eigen::RowVectorXd var = centered.array().square().colwise().sum() / n;
    const Eigen::RowVectorXd inv = (var.array() + kEps).rsqrt();
    if (inv_std) *inv_std = inv;
    return centered.array().rowwise() * inv.array();
  }

  // y is the forward output; inv_std the per-column 1/sqrt(var + eps).
  static Tensor backward(const Tensor& y, const Eigen::RowVectorXd& inv_std, const Tensor& dy) {
    const auto n = static_cast<double>(y.rows());
    const Eigen::RowVectorXd mean_dy = dy.colwise().sum() / n;
    const Eigen::RowVectorXd mean_dy_y = (dy.array() * y.array()).colwise().sum() / n;
    Tensor dx = dy.rowwise() - mean_dy;
    dx -= (y.array().rowwise() * mean_dy_y.array()).matrix();
    return dx.array().rowwise() * inv_std.array();
  }
};

// Exact (erf-based) GELU.
struct Gelu {
  static Tensor forward(const Tensor& x) {
    return x.unaryExpr([](double v) { return 0.5 * v * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0)); });
  }
  static Tensor derivative(const Tensor& x) {
    const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
    return x.unaryExpr([inv_sqrt_2pi](double v) {
      return 0.5 * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0)) + v * inv_sqrt_2pi * std::exp(-0.5 * v * v);
    });
  }
};

// Inverted dropout; returns the scaling mask (0 or 1/(1-p)).
inline Tensor dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, const ForwardContext& ctx) {
  if (!ctx.training || rate <= 0.0) return {};
  if (!ctx.rng) throw ConfigError("dropout: training mode requires an RNG");
  std::bernoulli_distribution keep(1.0 - rate);
  const double scale = 1.0 / (1.0 - rate);
  Tensor mask(rows, cols);
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(*ctx.rng) ? scale : 0.0;
  return mask;
}

struct ResMlpConfig {
  Eigen::Index in_len = 0;
  Eigen::Index out_len = 0;
  Eigen::Index hidden_size = 128;
  Eigen::Index depth = 2;
  double dropout = 0.0;
  bool layer_norm = true;

  // Geometric interpolation from hidden_size towards out_len:
  // l_k = round(hidden * (out / hidden)^((k-1)/depth)), k = 1..depth.
  std::vector<Eigen::Index> widths() const {
    std::vector<Eigen::Index> w;
    const double h = static_cast<double>(hidden_size);
    const double ratio = static_cast<double>(out_len) / h;
    for (Eigen::Index k = 0; k < depth; ++k) {
      const double v = h * std::pow(ratio, static_cast<double>(k) / static_cast<double>(depth));
      w.push_back(std::max<Eigen::Index>(1, static_cast<Eigen::Index>(std::lround(v))));
    }
    return w;
  }

  // LayerNorm sits on even-indexed blocks (0, 2, ...).
  bool normalizes(std::size_t block) const { return layer_norm && block % 2 == 0; }

  void validate() const {
    if (in_len < 1 || out_len < 1) throw ConfigError("resmlp: lengths must be positive");
    if (depth < 0) throw ConfigError("resmlp: depth must be >= 0");
    if (depth > 0 && hidden_size < 1) throw ConfigError("resmlp: hidden_size must be positive");
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("resmlp: dropout must lie in [0, 1)");
  }
};

// Z_out = Linear_out(MLP(Z_in) + Linear_res(Z_in)), where MLP stacks
// `depth` blocks of linear -> [LayerNorm] -> GELU -> dropout. With depth 0
// the module collapses to the single linear in_len -> out_len.
struct ResMlp {
  ResMlpConfig config;
  std::vector<Linear> blocks;
  Linear residual;
  Linear output;

  struct Cache {
    Tensor input;
    std::vector<Tensor> block_inputs;
    std::vector<Tensor> pre_activation;  // after the optional LayerNorm
    std::vector<Eigen::RowVectorXd> inv_std;
    std::vector<Tensor> dropout;
    Tensor merged;  // MLP(z) + residual(z)
  };

  static ResMlp create(const ResMlpConfig& cfg, std::mt19937_64* rng) {
    cfg.validate();
    ResMlp m;
    m.config = cfg;
    auto make = [rng](Eigen::Index in, Eigen::Index out) {
      return rng ? Linear::uniform(in, out, *rng) : Linear::zeros(in, out);
    };
    if (cfg.depth == 0) {
      m.output = make(cfg.in_len, cfg.out_len);
      return m;
    }
    Eigen::Index prev = cfg.in_len;
    for (Eigen::Index w : cfg.widths()) {
      m.blocks.push_back(make(prev, w));
      prev = w;
    }
    m.residual = make(cfg.in_len, prev);
    m.output = make(prev, cfg.out_len);
    return m;
  }

  // Same shapes, all zeros; used as a gradient accumulator.
  ResMlp zeros_like() const { return create(config, nullptr); }

  Eigen::Index param_count() const {
    Eigen::Index n = output.param_count();
    for (const auto& b : blocks) n += b.param_count();
    if (!blocks.empty()) n += residual.param_count();
    return n;
  }

  Tensor forward(const Tensor& z, const ForwardContext& ctx, Cache* cache = nullptr) const {
    check_rows(z, config.in_len, "resmlp");
    if (blocks.empty()) {
      if (cache) cache->input = z;
      return output.forward(z);
    }
    Tensor h = z;
    if (cache) {
      cache->input = z;
      cache->block_inputs.clear();
      cache->pre_activation.clear();
      cache->inv_std.clear();
      cache->dropout.clear();
    }
    for (std::size_t j = 0; j < blocks.size(); ++j) {
      if (cache) cache->block_inputs.push_back(h);
      Tensor a = blocks[j].forward(h);
      Eigen::RowVectorXd inv;
      if (config.normalizes(j)) a = LayerNorm::forward(a, &inv);
      h = Gelu::forward(a);
      Tensor mask = dropout_mask(h.rows(), h.cols(), config.dropout, ctx);
      if (mask.size() > 0) h.array() *= mask.array();
      if (cache) {
        cache->pre_activation.push_back(std::move(a));
        cache->inv_std.push_back(std::move(inv));
        cache->dropout.push_back(std::move(mask));
      }
    }
    Tensor merged = h + residual.forward(z);
    Tensor out = output.forward(merged);
    if (cache) cache->merged = std::move(merged);
    return out;
  }

  Tensor backward(const Cache& cache, const Tensor& dout, ResMlp& grad) const {
    if (blocks.empty()) return output.backward(cache.input, dout, grad.output);
    const Tensor dmerged = output.backward(cache.merged, dout, grad.output);
    Tensor dz = residual.backward(cache.input, dmerged, grad.residual);
    Tensor dh = dmerged;
    for (std::size_t jj = blocks.size(); jj-- > 0;) {
      if (cache.dropout[jj].size() > 0) dh.array() *= cache.dropout[jj].array();
      Tensor da = (dh.array() * Gelu::derivative(cache.pre_activation[jj]).array()).matrix();
      if (config.normalizes(jj)) da = LayerNorm::backward(cache.pre_activation[jj], cache.inv_std[jj], da);
      dh = blocks[jj].backward(cache.block_inputs[jj], da, grad.blocks[jj]);
    }
    return dz + dh;
  }

  void visit(const std::string& prefix, const TensorVisitor& f) {
    for (std::size_t j = 0; j < blocks.size(); ++j) blocks[j].visit(prefix + ".blocks." + std::to_string(j), f);
    if (!blocks.empty()) residual.visit(prefix + ".residual", f);
    output.visit(prefix + ".output", f);
  }
};

// Complex matrix rule with real parameter blocks:
//   Re Y = Wr Xr - Wi Xi + br,  Im Y = Wi Xr + Wr Xi + bi.
struct ComplexLinear {
  Tensor weight_re, weight_im;  // out x in
  Tensor bias_re, bias_im;      // out x 1

  static ComplexLinear zeros(Eigen::Index in, Eigen::Index out) {
    return {Tensor::Zero(out, in), Tensor::Zero(out, in), Tensor::Zero(out, 1), Tensor::Zero(out, 1)};
  }

  static ComplexLinear uniform(Eigen::Index in, Eigen::Index out, std::mt19937_64& rng) {
    const Linear re = Linear::uniform(in, out, rng);
    const Linear im = Linear::uniform(in, out, rng);
    return {re.weight, im.weight, re.bias, im.bias};
  }

  Eigen::Index in() const { return weight_re.cols(); }
  Eigen::Index out() const { return weight_re.rows(); }
  Eigen::Index param_count() const {
    return weight_re.size() + weight_im.size() + bias_re.size() + bias_im.size();
  }

  void forward(const Tensor& xr, const Tensor& xi, Tensor& yr, Tensor& yi) const {
    check_rows(xr, in(), "complex linear");
    check_rows(xi, in(), "complex linear");
    if (xr.cols() != xi.cols()) throw DimensionError("complex linear: real and imaginary planes differ in width");
    yr = weight_re * xr - weight_im * xi;
    yr.colwise() += bias_re.col(0);
    yi = weight_im * xr + weight_re * xi;
    yi.colwise() += bias_im.col(0);
  }

  void backward(const Tensor& xr, const Tensor& xi, const Tensor& dyr, const Tensor& dyi, ComplexLinear& grad,
                Tensor& dxr, Tensor& dxi) const {
    grad.weight_re.noalias() += dyr * xr.transpose() + dyi * xi.transpose();
    grad.weight_im.noalias() += dyi * xr.transpose() - dyr * xi.transpose();
    grad.bias_re.col(0) += dyr.rowwise().sum();
    grad.bias_im.col(0) += dyi.rowwise().sum();
    dxr = weight_re.transpose() * dyr + weight_im.transpose() * dyi;
    dxi = weight_re.transpose() * dyi - weight_im.transpose() * dyr;
  }

  void visit(const std::string& prefix, const TensorVisitor& f) {
    f(prefix + ".weight_re", weight_re);
    f(prefix + ".weight_im", weight_im);
    f(prefix + ".bias_re", bias_re);
    f(prefix + ".bias_im", bias_im);
  }
};

// ResMlp topology with every linear replaced by a ComplexLinear and no
// LayerNorm, activation or dropout between them.
struct ComplexResMlp {
  ResMlpConfig config;
  std::vector<ComplexLinear> blocks;
  ComplexLinear residual;
  ComplexLinear output;

  struct Cache {
    Tensor input_re, input_im;
    std::vector<Tensor> block_re, block_im;
    Tensor merged_re, merged_im;
  };

  static ComplexResMlp create(const ResMlpConfig& cfg, std::mt19937_64* rng) {
    cfg.validate();
    ComplexResMlp m;
    m.config = cfg;
    auto make = [rng](Eigen::Index in, Eigen::Index out) {
      return rng ? ComplexLinear::uniform(in, out, *rng) : ComplexLinear::zeros(in, out);
    };
    if (cfg.depth == 0) {
      m.output = make(cfg.in_len, cfg.out_len);
      return m;
    }
    Eigen::Index prev = cfg.in_len;
    for (Eigen::Index w : cfg.widths()) {
      m.blocks.push_back(make(prev, w));
      prev = w;
    }
    m.residual = make(cfg.in_len, prev);
    m.output = make(prev, cfg.out_len);
    return m;
  }

  ComplexResMlp zeros_like() const { return create(config, nullptr); }

  Eigen::Index param_count() const {
    Eigen::Index n = output.param_count();
    for (const auto& b : blocks) n += b.param_count();
    if (!blocks.empty()) n += residual.param_count();
    return n;
  }

  void forward(const Tensor& xr, const Tensor& xi, Tensor& yr, Tensor& yi, Cache* cache = nullptr) const {
    if (cache) {
      cache->input_re = xr;
      cache->input_im = xi;
      cache->block_re.clear();
      cache->block_im.clear();
    }
    if (blocks.empty()) {
      output.forward(xr, xi, yr, yi);
      return;
    }
    Tensor hr = xr, hi = xi;
    for (const auto& b : blocks) {
      if (cache) {
        cache->block_re.push_back(hr);
        cache->block_im.push_back(hi);
      }
      Tensor nr, ni;
      b.forward(hr, hi, nr, ni);
      hr = std::move(nr);
      hi = std::move(ni);
    }
    Tensor rr, ri;
    residual.forward(xr, xi, rr, ri);
    hr += rr;
    hi += ri;
    output.forward(hr, hi, yr, yi);
    if (cache) {
      cache->merged_re = std::move(hr);
      cache->merged_im = std::move(hi);
    }
  }

  void backward(const Cache& cache, const Tensor& dyr, const Tensor& dyi, ComplexResMlp& grad, Tensor& dxr,
                Tensor& dxi) const {
    if (blocks.empty()) {
      output.backward(cache.input_re, cache.input_im, dyr, dyi, grad.output, dxr, dxi);
      return;
    }
    Tensor dmr, dmi;
    output.backward(cache.merged_re, cache.merged_im, dyr, dyi, grad.output, dmr, dmi);
    residual.backward(cache.input_re, cache.input_im, dmr, dmi, grad.residual, dxr, dxi);
    Tensor dhr = dmr, dhi = dmi;
    for (std::size_t jj = blocks.size(); jj-- > 0;) {
      Tensor pr, pi;
      blocks[jj].backward(cache.block_re[jj], cache.block_im[jj], dhr, dhi, grad.blocks[jj], pr, pi);
      dhr = std::move(pr);
      dhi = std::move(pi);
    }
    dxr += dhr;
    dxi += dhi;
  }

  void visit(const std::string& prefix, const TensorVisitor& f) {
    for (std::size_t j = 0; j < blocks.size(); ++j) blocks[j].visit(prefix + ".blocks." + std::to_string(j), f);
    if (!blocks.empty()) residual.visit(prefix + ".residual", f);
    output.visit(prefix + ".output", f);
  }
};

}  // namespace fredn::nn
