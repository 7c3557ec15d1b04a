#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "fredn/model.hpp"
#include "test_support.hpp"

namespace fredn {
namespace {

using testing::central_difference;
using testing::random_matrix;
using testing::relative_error;

ModelConfig tiny(Variant v) {
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

// Random parameters away from the symmetric initial point so every gradient
// path carries signal.
ModelParams jittered(const ModelConfig& cfg, std::uint64_t seed) {
  ModelParams p = ModelParams::create(cfg, seed);
  std::uint64_t k = seed * 100;
  p.visit([&](const std::string& name, Tensor& t) {
    t += random_matrix(t.rows(), t.cols(), ++k, 0.2);
    if (name == "revin.gamma") t.array() += 0.5;
  });
  return p;
}

TEST(RevIn, RoundTrip) {
  const Tensor x = random_matrix(32, 6, 1, 3.0).array() + 5.0;
  const Tensor gamma = random_matrix(3, 1, 2).array() + 2.0;
  const Tensor beta = random_matrix(3, 1, 3);
  const RevInStats st = revin_stats(x, 1e-5);
  const Tensor back = revin_denormalize(revin_normalize(x, st, gamma, beta), st, gamma, beta);
  EXPECT_LT((back - x).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_TRUE((st.stddev.array() >= 0.0).all());
}

TEST(RevIn, StandardizesWithUnitAffine) {
  const Tensor x = random_matrix(500, 2, 4);
  const RevInStats st = revin_stats(x, 1e-5);
  const Tensor xn = revin_normalize(x, st, Tensor::Ones(2, 1), Tensor::Zero(2, 1));
  for (Eigen::Index s = 0; s < 2; ++s) {
    EXPECT_NEAR(xn.col(s).mean(), 0.0, 1e-12);
    const double sd = std::sqrt(xn.col(s).array().square().mean());
    EXPECT_NEAR(sd, st.stddev(s) / st.scale(s), 1e-12);
    EXPECT_NEAR(sd, 1.0, 1e-4);
  }
}

TEST(RevIn, ConstantChannelNormalizesToZero) {
  const Tensor x = Tensor::Constant(10, 1, 4.2);
  const RevInStats st = revin_stats(x, 1e-5);
  const Tensor xn = revin_normalize(x, st, Tensor::Ones(1, 1), Tensor::Zero(1, 1));
  EXPECT_LT(xn.cwiseAbs().maxCoeff(), 1e-9);
  // Mean restored by the inverse map.
  const Tensor y = revin_denormalize(Tensor::Zero(3, 1), st, Tensor::Ones(1, 1), Tensor::Zero(1, 1));
  EXPECT_NEAR(y(0, 0), 4.2, 1e-12);
}

TEST(RevIn, BetaShiftInvertsExactly) {
  const Tensor x = random_matrix(8, 1, 5);
  const RevInStats st = revin_stats(x, 1e-5);
  const Tensor one = Tensor::Ones(1, 1), beta = Tensor::Constant(1, 1, 0.75);
  const Tensor shifted = revin_normalize(x, st, one, beta);
  const Tensor unshifted = revin_normalize(x, st, one, Tensor::Zero(1, 1));
  EXPECT_LT((shifted.array() - unshifted.array() - 0.75).abs().maxCoeff(), 1e-14);
  EXPECT_LT((revin_denormalize(shifted, st, one, beta) - x).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(RevIn, ZeroGammaIsSingular) {
  const Tensor x = random_matrix(8, 2, 6);
  const RevInStats st = revin_stats(x, 1e-5);
  Tensor gamma = Tensor::Ones(2, 1);
  gamma(1, 0) = 0.0;
  EXPECT_THROW(revin_denormalize(x, st, gamma, Tensor::Zero(2, 1)), SingularError);
}

TEST(Embed, RankOneFactor) {
  const Tensor x = random_matrix(12, 3, 7);
  const Tensor phi = random_matrix(4, 1, 8);
  const Tensor e = embed(x, phi);
  ASSERT_EQ(e.cols(), 12);
  for (Eigen::Index s = 0; s < 3; ++s) {
    for (Eigen::Index t = 0; t < 12; ++t) {
      for (Eigen::Index i = 0; i < 4; ++i) EXPECT_NEAR(e(t, s * 4 + i) / x(t, s), phi(i, 0), 1e-12);
    }
  }
  EXPECT_TRUE(embed(x, Tensor::Ones(1, 1)) == x);
  EXPECT_EQ(embed(Tensor::Zero(5, 2), phi).cwiseAbs().maxCoeff(), 0.0);
}

TEST(ReIm, SwappingPlanesSwapsOutputsExactly) {
  std::mt19937_64 rng(9);
  const nn::ResMlp mlp = nn::ResMlp::create({9, 5, 16, 2, 0.0, true}, &rng);
  Spectrum s(16, 3, Normalization::Unnormalized);
  s.re = random_matrix(9, 3, 1);
  s.im = random_matrix(9, 3, 2);
  Spectrum swapped = s;
  std::swap(swapped.re, swapped.im);
  const Spectrum a = reim_forward(s, mlp, 8);
  const Spectrum b = reim_forward(swapped, mlp, 8);
  EXPECT_TRUE(a.re == b.im);
  EXPECT_TRUE(a.im == b.re);
}

TEST(ReIm, RealInputGivesBiasPropagatedImaginaryPlane) {
  std::mt19937_64 rng(10);
  const nn::ResMlp mlp = nn::ResMlp::create({9, 5, 16, 2, 0.0, true}, &rng);
  Spectrum s(16, 2, Normalization::Unnormalized);
  s.re = random_matrix(9, 2, 3);
  const Spectrum out = reim_forward(s, mlp, 8);
  EXPECT_TRUE(out.im == mlp.forward(Tensor::Zero(9, 2), {}));
  EXPECT_TRUE(out.re == mlp.forward(s.re, {}));
}

TEST(ParamCount, SingleLinearSpectralPath) {
  ModelConfig cfg = tiny(Variant::FreDN);
  cfg.embed_dim = 1;
  cfg.depth = 0;
  const Eigen::Index lf = cfg.lookback_freq(), tf = cfg.horizon_freq();
  EXPECT_EQ(param_count(ModelParams::create(cfg, 1)).spectral, lf * tf + tf);
  cfg.variant = Variant::ComplexLinear;
  EXPECT_EQ(param_count(ModelParams::create(cfg, 1)).spectral, 2 * (lf * tf + tf));
}

TEST(ParamCount, HalfOfComplexLinearForMatchedShapes) {
  for (Eigen::Index lookback : {96, 336, 720}) {
    for (Eigen::Index horizon : {96, 720}) {
      ModelConfig cfg;
      cfg.lookback = lookback;
      cfg.horizon = horizon;
      const auto real = param_count(ModelParams::create(cfg, 1));
      cfg.variant = Variant::ComplexLinear;
      const auto cplx = param_count(ModelParams::create(cfg, 1));
      EXPECT_EQ(2 * real.spectral, cplx.spectral);
      EXPECT_EQ(static_cast<double>(real.spectral) / static_cast<double>(cplx.spectral), 0.5);
      EXPECT_EQ(real.total() - real.spectral, cplx.total() - cplx.spectral);
    }
  }
}

TEST(ParamCount, EmptyModelIsZero) { EXPECT_EQ(param_count(ModelParams{}).total(), 0); }

TEST(ParamCount, BreakdownSumsToVisitedScalars) {
  for (Variant v : kAllVariants) {
    ModelParams p = ModelParams::create(tiny(v), 3);
    Eigen::Index visited = 0;
    p.visit([&](const std::string&, Tensor& t) { visited += t.size(); });
    EXPECT_EQ(param_count(p).total(), visited) << to_string(v);
  }
}

TEST(Forward, ZeroNetworkReturnsLookbackMean) {
  for (Variant v : kAllVariants) {
    ModelParams p = ModelParams::create(tiny(v), 1).zeros_like();
    p.revin_gamma.setOnes();
    const Tensor x = random_matrix(16, 6, 2, 2.0).array() + 3.0;
    const Tensor y = forward(p, x);
    ASSERT_EQ(y.rows(), 8);
    ASSERT_EQ(y.cols(), 6);
    for (Eigen::Index s = 0; s < 6; ++s) {
      for (Eigen::Index t = 0; t < 8; ++t) EXPECT_NEAR(y(t, s), x.col(s).mean(), 1e-12) << to_string(v);
    }
  }
}

TEST(Forward, ShapeContract) {
  for (Eigen::Index lookback : {96, 192, 336, 512, 720}) {
    for (Eigen::Index horizon : {96, 192, 336, 720}) {
      ModelConfig cfg;
      cfg.channels = 7;
      cfg.lookback = lookback;
      cfg.horizon = horizon;
      cfg.embed_dim = 2;
      cfg.hidden_size = 16;
      cfg.depth = 1;
      const ModelParams p = ModelParams::create(cfg, 5);
      EXPECT_EQ(p.season_mlp.config.in_len, lookback / 2 + 1);
      EXPECT_EQ(p.season_mlp.config.out_len, horizon / 2 + 1);
      const Tensor y = forward(p, random_matrix(lookback, 7, 1));
      EXPECT_EQ(y.rows(), horizon);
      EXPECT_EQ(y.cols(), 7);
    }
  }
}

TEST(Forward, RejectsBadInput) {
  const ModelParams p = ModelParams::create(tiny(Variant::FreDN), 1);
  EXPECT_THROW(forward(p, random_matrix(15, 2, 1)), DimensionError);
  EXPECT_THROW(forward(p, random_matrix(16, 3, 1)), DimensionError);
  Tensor x = random_matrix(16, 2, 1);
  x(3, 1) = std::nan("");
  EXPECT_THROW(forward(p, x), DataError);
}

TEST(Forward, DeterministicInEvalMode) {
  ModelConfig cfg = tiny(Variant::FreDN);
  cfg.dropout = 0.3;
  const ModelParams p = ModelParams::create(cfg, 4);
  const Tensor x = random_matrix(16, 4, 5);
  EXPECT_TRUE(forward(p, x) == forward(p, x));
}

TEST(Config, Validation) {
  ModelConfig cfg = tiny(Variant::MovDN);
  cfg.ma_window = 4;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = tiny(Variant::TopKDN);
  cfg.topk = 100;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = tiny(Variant::FreDN);
  cfg.embed_dim = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  EXPECT_EQ(tiny(Variant::TopKDN).effective_topk(), 4);
  EXPECT_EQ(parse_variant("complex-linear"), Variant::ComplexLinear);
  EXPECT_THROW(parse_variant("fedformer"), ConfigError);
}

// Every analytic gradient against central differences (h = 1e-5).
TEST(Backward, MatchesFiniteDifferencesAllVariantsAllLosses) {
  for (Variant v : kAllVariants) {
    for (LossKind kind : kAllLossKinds) {
      ModelParams p = jittered(tiny(v), 17);
      const Tensor x = random_matrix(16, 6, 40);
      const Tensor y = random_matrix(8, 6, 41);
      ModelParams grad = model_backward(p, x, y, kind);
      auto loss = [&] { return compute_loss(kind, forward(p, x), y); };
      auto params = p.tensors();
      auto grads = grad.tensors();
      ASSERT_EQ(params.size(), grads.size());
      for (std::size_t i = 0; i < params.size(); ++i) {
        const Tensor numeric = central_difference(*params[i].second, loss, 1e-5);
        EXPECT_LT(relative_error(*grads[i].second, numeric), 1e-4)
            << to_string(v) << " " << to_string(kind) << " " << params[i].first;
      }
    }
  }
}

TEST(Backward, ZeroResidualGivesZeroProjectionGradients) {
  for (Variant v : kAllVariants) {
    const ModelParams p = jittered(tiny(v), 5);
    const Tensor x = random_matrix(16, 4, 6);
    const ModelParams grad = model_backward(p, x, forward(p, x), LossKind::TimeMSE);
    EXPECT_EQ(grad.season_out.weight.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(grad.trend_out.weight.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(grad.season_out.bias(0, 0), 0.0);
    EXPECT_EQ(grad.trend_out.bias(0, 0), 0.0);
  }
}

// A pure tone at bin 3 has no spectral content elsewhere, so the mask can
// only receive gradient on that row.
TEST(Backward, MaskGradientSupportFollowsSpectrum) {
  ModelParams p = jittered(tiny(Variant::FreDN), 8);
  p.revin_beta.setZero();  // a shift would put energy in the DC bin
  Tensor x(16, 2);
  for (Eigen::Index t = 0; t < 16; ++t) {
    x(t, 0) = std::cos(2.0 * std::numbers::pi * 3.0 * t / 16.0);
    x(t, 1) = 2.0 * std::sin(2.0 * std::numbers::pi * 3.0 * t / 16.0 + 0.4);
  }
  const ModelParams grad = model_backward(p, x, random_matrix(8, 2, 3), LossKind::FreqMAE);
  for (Eigen::Index k = 0; k < grad.mask.logits.rows(); ++k) {
    const double mag = grad.mask.logits.row(k).cwiseAbs().maxCoeff();
    if (k == 3) {
      EXPECT_GT(mag, 1e-6);
    } else {
      EXPECT_LT(mag, 1e-12) << "bin " << k;
    }
  }
}

TEST(Reachability, IndependentPhasesReachAnyTarget) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const Eigen::Index d = 2 + trial % 4;
    Eigen::VectorXcd x(d);
    for (Eigen::Index i = 0; i < d; ++i) x(i) = Complex(u(rng), u(rng));
    if (!spans_complex_plane(x, 1e-3)) continue;
    EXPECT_LT(reim_reachability_residual(x, Complex(u(rng), u(rng))), 1e-8);
  }
}

TEST(Reachability, CollinearPhasesMissOffLineTargets) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(-3.0, 3.0), ang(0.0, std::numbers::pi), dist(0.1, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const Eigen::Index d = 2 + trial % 4;
    const double theta = ang(rng);
    const Complex dir = std::polar(1.0, theta);
    Eigen::VectorXcd x(d);
    for (Eigen::Index i = 0; i < d; ++i) x(i) = u(rng) * dir;
    EXPECT_FALSE(spans_complex_plane(x));
    // Target at perpendicular distance `off` from the line through 0 along dir.
    const double off = dist(rng);
    const Complex z = u(rng) * dir + off * Complex(0.0, 1.0) * dir;
    EXPECT_NEAR(reim_reachability_residual(x, z), off, 1e-9);
  }
}

}  // namespace
}  // namespace fredn
