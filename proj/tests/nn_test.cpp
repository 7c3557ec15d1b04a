#include <gtest/gtest.h>

#include <complex>
#include <numbers>

#include "fredn/nn.hpp"
#include "test_support.hpp"

namespace fredn::nn {
namespace {

using fredn::testing::central_difference;
using fredn::testing::random_matrix;
using fredn::testing::relative_error;

double gelu_scalar(double v) { return 0.5 * v * (1.0 + std::erf(v / std::numbers::sqrt2)); }

// Loss = <probe, f(x)> so that dL/dy = probe.
double project(const Tensor& y, const Tensor& probe) { return (y.array() * probe.array()).sum(); }

TEST(Linear, BackwardMatchesFiniteDifferences) {
  std::mt19937_64 rng(3);
  Linear lin = Linear::uniform(5, 3, rng);
  Tensor x = random_matrix(5, 4, 1);
  const Tensor probe = random_matrix(3, 4, 2);
  Linear grad = Linear::zeros(5, 3);
  const Tensor dx = lin.backward(x, probe, grad);
  auto loss = [&] { return project(lin.forward(x), probe); };
  EXPECT_LT(relative_error(grad.weight, central_difference(lin.weight, loss)), 1e-8);
  EXPECT_LT(relative_error(grad.bias, central_difference(lin.bias, loss)), 1e-8);
  EXPECT_LT(relative_error(dx, central_difference(x, loss)), 1e-8);
}

TEST(Linear, WrongInputWidthThrows) {
  const Linear lin = Linear::zeros(4, 2);
  EXPECT_THROW(lin.forward(Tensor::Zero(3, 1)), DimensionError);
}

TEST(LayerNorm, BackwardMatchesFiniteDifferences) {
  Tensor x = random_matrix(7, 3, 4);
  const Tensor probe = random_matrix(7, 3, 5);
  Eigen::RowVectorXd inv;
  const Tensor y = LayerNorm::forward(x, &inv);
  const Tensor dx = LayerNorm::backward(y, inv, probe);
  EXPECT_LT(relative_error(dx, central_difference(x, [&] { return project(LayerNorm::forward(x), probe); })), 1e-7);
}

TEST(Gelu, DerivativeMatchesFiniteDifferences) {
  Tensor x = random_matrix(20, 1, 6, 2.0);
  const Tensor d = Gelu::derivative(x);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double v = x(i, 0);
    const double fd = (gelu_scalar(v + 1e-6) - gelu_scalar(v - 1e-6)) / 2e-6;
    EXPECT_NEAR(d(i, 0), fd, 1e-8);
  }
}

TEST(Dropout, OnlyActiveWhenTraining) {
  std::mt19937_64 rng(1);
  EXPECT_EQ(dropout_mask(4, 4, 0.5, {false, &rng}).size(), 0);
  EXPECT_EQ(dropout_mask(4, 4, 0.0, {true, &rng}).size(), 0);
  const Tensor m = dropout_mask(100, 100, 0.25, {true, &rng});
  for (Eigen::Index i = 0; i < m.size(); ++i) EXPECT_TRUE(m.data()[i] == 0.0 || std::abs(m.data()[i] - 4.0 / 3.0) < 1e-15);
  EXPECT_NEAR(m.mean(), 1.0, 0.02);
  EXPECT_THROW(dropout_mask(2, 2, 0.5, {true, nullptr}), ConfigError);
}

TEST(ResMlpConfig, GeometricWidths) {
  ResMlpConfig cfg{49, 8, 128, 3, 0.0, true};
  const auto w = cfg.widths();
  ASSERT_EQ(w.size(), 3u);
  EXPECT_EQ(w[0], 128);
  EXPECT_EQ(w[1], std::lround(128 * std::pow(8.0 / 128.0, 1.0 / 3.0)));
  EXPECT_EQ(w[2], std::lround(128 * std::pow(8.0 / 128.0, 2.0 / 3.0)));
  EXPECT_TRUE(cfg.normalizes(0));
  EXPECT_FALSE(cfg.normalizes(1));
  EXPECT_TRUE(cfg.normalizes(2));
}

TEST(ResMlpConfig, RejectsBadValues) {
  EXPECT_THROW((ResMlpConfig{0, 4, 8, 1, 0.0, true}.validate()), ConfigError);
  EXPECT_THROW((ResMlpConfig{4, 4, 8, -1, 0.0, true}.validate()), ConfigError);
  EXPECT_THROW((ResMlpConfig{4, 4, 8, 1, 1.0, true}.validate()), ConfigError);
}

TEST(ResMlp, ZeroWeightsGiveZero) {
  const ResMlp m = ResMlp::create({9, 5, 16, 2, 0.0, true}, nullptr);
  EXPECT_EQ(m.forward(random_matrix(9, 3, 7), {}).cwiseAbs().maxCoeff(), 0.0);
}

// Depth 1, every linear the identity: out = GELU(LN(z)) + z for z = e_1.
TEST(ResMlp, SingleBlockIdentityHandComputed) {
  const Eigen::Index n = 4;
  ResMlp m = ResMlp::create({n, n, n, 1, 0.0, true}, nullptr);
  m.blocks[0].weight.setIdentity();
  m.residual.weight.setIdentity();
  m.output.weight.setIdentity();
  Tensor z = Tensor::Zero(n, 1);
  z(0, 0) = 1.0;
  // e_1 centred is (3/4, -1/4, -1/4, -1/4) with population variance 3/16.
  const double inv = 1.0 / std::sqrt(3.0 / 16.0 + LayerNorm::kEps);
  const double expected[] = {gelu_scalar(0.75 * inv) + 1.0, gelu_scalar(-0.25 * inv), gelu_scalar(-0.25 * inv),
                             gelu_scalar(-0.25 * inv)};
  const Tensor y = m.forward(z, {});
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(y(i, 0), expected[i], 1e-14);
}

TEST(ResMlp, DeterministicWithoutDropout) {
  std::mt19937_64 rng(11);
  const ResMlp m = ResMlp::create({12, 6, 16, 2, 0.3, true}, &rng);
  const Tensor z = random_matrix(12, 5, 8);
  const Tensor a = m.forward(z, {});
  const Tensor b = m.forward(z, {});
  EXPECT_TRUE(a == b);
}

TEST(ResMlp, DepthZeroIsSingleLinear) {
  std::mt19937_64 rng(2);
  const ResMlp m = ResMlp::create({6, 3, 16, 0, 0.0, true}, &rng);
  EXPECT_EQ(m.param_count(), 6 * 3 + 3);
  const Tensor z = random_matrix(6, 2, 3);
  EXPECT_TRUE(m.forward(z, {}) == m.output.forward(z));
}

TEST(ResMlp, ShapeMismatchThrows) {
  const ResMlp m = ResMlp::create({6, 3, 8, 1, 0.0, true}, nullptr);
  EXPECT_THROW(m.forward(Tensor::Zero(5, 1), {}), DimensionError);
}

void check_resmlp_gradients(const ResMlpConfig& cfg, bool training) {
  std::mt19937_64 rng(21);
  ResMlp m = ResMlp::create(cfg, &rng);
  Tensor z = random_matrix(cfg.in_len, 4, 9);
  const Tensor probe = random_matrix(cfg.out_len, 4, 10);
  // Fix the dropout draw by replaying the same seed for every evaluation.
  auto run = [&](ResMlp::Cache* cache) {
    std::mt19937_64 drop(5);
    return m.forward(z, {training, &drop}, cache);
  };
  ResMlp::Cache cache;
  run(&cache);
  ResMlp grad = m.zeros_like();
  const Tensor dz = m.backward(cache, probe, grad);
  auto loss = [&] { return project(run(nullptr), probe); };
  EXPECT_LT(relative_error(dz, central_difference(z, loss)), 1e-6);
  std::vector<Tensor*> params, grads;
  m.visit("m", [&](const std::string&, Tensor& t) { params.push_back(&t); });
  grad.visit("m", [&](const std::string&, Tensor& t) { grads.push_back(&t); });
  ASSERT_EQ(params.size(), grads.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    EXPECT_LT(relative_error(*grads[i], central_difference(*params[i], loss)), 1e-6) << "tensor " << i;
  }
}

TEST(ResMlp, BackwardMatchesFiniteDifferences) {
  check_resmlp_gradients({9, 5, 8, 2, 0.0, true}, false);
  check_resmlp_gradients({9, 5, 8, 3, 0.0, false}, false);
  check_resmlp_gradients({9, 5, 8, 0, 0.0, true}, false);
}

TEST(ResMlp, BackwardThroughFixedDropoutMask) { check_resmlp_gradients({9, 5, 8, 2, 0.4, true}, true); }

TEST(ResMlp, VisitNames) {
  ResMlp m = ResMlp::create({4, 2, 4, 2, 0.0, true}, nullptr);
  std::vector<std::string> names;
  m.visit("mlp", [&](const std::string& n, Tensor&) { names.push_back(n); });
  const std::vector<std::string> expected = {"mlp.blocks.0.weight", "mlp.blocks.0.bias", "mlp.blocks.1.weight",
                                             "mlp.blocks.1.bias",   "mlp.residual.weight", "mlp.residual.bias",
                                             "mlp.output.weight",   "mlp.output.bias"};
  EXPECT_EQ(names, expected);
}

TEST(ComplexLinear, ImaginaryWeightZeroIsRealProduct) {
  std::mt19937_64 rng(4);
  ComplexLinear cl = ComplexLinear::uniform(5, 3, rng);
  cl.weight_im.setZero();
  cl.bias_re.setZero();
  cl.bias_im.setZero();
  const Tensor xr = random_matrix(5, 2, 1), xi = random_matrix(5, 2, 2);
  Tensor yr, yi;
  cl.forward(xr, xi, yr, yi);
  EXPECT_TRUE(yr == cl.weight_re * xr);
  EXPECT_TRUE(yi == cl.weight_re * xi);
}

TEST(ComplexLinear, MultiplicationByJ) {
  ComplexLinear cl = ComplexLinear::zeros(1, 1);
  cl.weight_im(0, 0) = 1.0;
  Tensor yr, yi;
  cl.forward(Tensor::Ones(1, 1), Tensor::Zero(1, 1), yr, yi);
  EXPECT_EQ(yr(0, 0), 0.0);
  EXPECT_EQ(yi(0, 0), 1.0);
}

TEST(ComplexLinear, MatchesComplexArithmetic) {
  std::mt19937_64 rng(8);
  const ComplexLinear cl = ComplexLinear::uniform(3, 3, rng);
  const Tensor xr = random_matrix(3, 1, 3), xi = random_matrix(3, 1, 4);
  Tensor yr, yi;
  cl.forward(xr, xi, yr, yi);
  for (int r = 0; r < 3; ++r) {
    std::complex<double> acc(cl.bias_re(r, 0), cl.bias_im(r, 0));
    for (int c = 0; c < 3; ++c) {
      acc += std::complex<double>(cl.weight_re(r, c), cl.weight_im(r, c)) * std::complex<double>(xr(c, 0), xi(c, 0));
    }
    EXPECT_NEAR(yr(r, 0), acc.real(), 1e-12);
    EXPECT_NEAR(yi(r, 0), acc.imag(), 1e-12);
  }
}

TEST(ComplexLinear, ShapeMismatchThrows) {
  const ComplexLinear cl = ComplexLinear::zeros(3, 2);
  Tensor yr, yi;
  EXPECT_THROW(cl.forward(Tensor::Zero(2, 1), Tensor::Zero(2, 1), yr, yi), DimensionError);
  EXPECT_THROW(cl.forward(Tensor::Zero(3, 1), Tensor::Zero(3, 2), yr, yi), DimensionError);
}

TEST(ComplexResMlp, BackwardMatchesFiniteDifferences) {
  for (Eigen::Index depth : {0, 2}) {
    std::mt19937_64 rng(30);
    ComplexResMlp m = ComplexResMlp::create({7, 4, 6, depth, 0.0, false}, &rng);
    Tensor xr = random_matrix(7, 3, 1), xi = random_matrix(7, 3, 2);
    const Tensor pr = random_matrix(4, 3, 3), pi = random_matrix(4, 3, 4);
    auto loss = [&] {
      Tensor yr, yi;
      m.forward(xr, xi, yr, yi);
      return project(yr, pr) + project(yi, pi);
    };
    ComplexResMlp::Cache cache;
    Tensor yr, yi;
    m.forward(xr, xi, yr, yi, &cache);
    ComplexResMlp grad = m.zeros_like();
    Tensor dxr, dxi;
    m.backward(cache, pr, pi, grad, dxr, dxi);
    EXPECT_LT(relative_error(dxr, central_difference(xr, loss)), 1e-7);
    EXPECT_LT(relative_error(dxi, central_difference(xi, loss)), 1e-7);
    std::vector<Tensor*> params, grads;
    m.visit("c", [&](const std::string&, Tensor& t) { params.push_back(&t); });
    grad.visit("c", [&](const std::string&, Tensor& t) { grads.push_back(&t); });
    for (std::size_t i = 0; i < params.size(); ++i) {
      EXPECT_LT(relative_error(*grads[i], central_difference(*params[i], loss)), 1e-7) << "depth " << depth << " #" << i;
    }
  }
}

// Matched topology: the complex stack holds exactly twice the parameters.
TEST(ComplexResMlp, TwiceTheParametersOfRealStack) {
  for (Eigen::Index depth : {0, 1, 2, 3}) {
    const ResMlpConfig cfg{49, 25, 32, depth, 0.0, true};
    EXPECT_EQ(ComplexResMlp::create(cfg, nullptr).param_count(), 2 * ResMlp::create(cfg, nullptr).param_count());
  }
}

}  // namespace
}  // namespace fredn::nn
