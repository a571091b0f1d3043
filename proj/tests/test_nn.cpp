#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "pcdgan/error.hpp"
#include "pcdgan/grad_check.hpp"
#include "pcdgan/nn.hpp"

using namespace pcdgan;
using ad::Tensor;

namespace {

Tensor noise(std::size_t b, std::size_t d, Rng& rng) {
  std::vector<double> v(b * d);
  for (auto& x : v) x = rng.normal();
  return Tensor::constant({b, d}, v);
}

Tensor labels(std::size_t b, Rng& rng) {
  std::vector<double> v(b);
  for (auto& x : v) x = rng.uniform();
  return Tensor::vector(v);
}

}  // namespace

TEST(Generator, MapsNoiseAndLabelToDesigns) {
  Rng rng(1);
  nn::Generator G(nn::NetworkConfig{}, rng);
  const Tensor out = G.forward(noise(32, 5, rng), labels(32, rng));
  EXPECT_EQ(out.shape(), (ad::Shape{32, 2}));
  for (double v : out.values()) EXPECT_TRUE(std::isfinite(v));
}

TEST(Generator, IdenticalInputsGiveIdenticalOutputs) {
  Rng rng(2);
  nn::Generator G(nn::NetworkConfig{}, rng);
  Rng a(9), b(9);
  const Tensor o1 = G.forward(noise(8, 5, a), labels(8, a));
  const Tensor o2 = G.forward(noise(8, 5, b), labels(8, b));
  for (std::size_t i = 0; i < o1.size(); ++i) EXPECT_EQ(o1[i], o2[i]);
}

TEST(Generator, RejectsLabelsOutsideUnitInterval) {
  Rng rng(3);
  nn::Generator G(nn::NetworkConfig{}, rng);
  EXPECT_THROW(G.forward(noise(2, 5, rng), Tensor::vector({0.5, 1.01})), ContractViolation);
  EXPECT_THROW(G.forward(noise(2, 5, rng), Tensor::vector({-1e-9, 0.5})), ContractViolation);
  EXPECT_THROW(G.forward(noise(2, 4, rng), Tensor::vector({0.1, 0.5})), ContractViolation);
  EXPECT_THROW(G.forward(noise(2, 5, rng), Tensor::vector({0.1, 0.5, 0.2})), ContractViolation);
}

TEST(Generator, LayerSizesMatchDeclaredArchitecture) {
  Rng rng(4);
  nn::Generator G(nn::NetworkConfig{}, rng);
  nn::Discriminator D(nn::NetworkConfig{}, rng);
  const auto gp = G.parameters();
  ASSERT_EQ(gp.size(), 8u);
  EXPECT_EQ(gp[0].tensor.shape(), (ad::Shape{6, 128}));
  EXPECT_EQ(gp[6].tensor.shape(), (ad::Shape{128, 2}));
  const auto dp = D.parameters();
  EXPECT_EQ(dp[0].tensor.shape(), (ad::Shape{3, 128}));
  EXPECT_EQ(dp[6].tensor.shape(), (ad::Shape{128, 1}));
  for (std::size_t l = 0; l + 2 < gp.size(); l += 2) {
    EXPECT_EQ(gp[l].tensor.shape()[1], gp[l + 2].tensor.shape()[0]);
  }
  for (const auto& p : gp) EXPECT_TRUE(p.tensor.requires_grad()) << p.name;
  EXPECT_EQ(G.architecture(), "G:[6,128,128,128,2]:leaky_relu:linear:0.2");
}

TEST(Generator, InitializationBoundsAndZeroBiases) {
  Rng rng(5);
  nn::Generator G(nn::NetworkConfig{}, rng);
  const auto p = G.parameters();
  for (double w : p[0].tensor.values()) EXPECT_LE(std::abs(w), std::sqrt(6.0 / 6.0));
  for (double w : p[2].tensor.values()) EXPECT_LE(std::abs(w), std::sqrt(6.0 / 128.0));
  for (double w : p[6].tensor.values()) EXPECT_LE(std::abs(w), 0.01);
  for (std::size_t l = 1; l < p.size(); l += 2) {
    for (double b : p[l].tensor.values()) EXPECT_EQ(b, 0.0);
  }
}

TEST(Discriminator, OutputsProbabilities) {
  Rng rng(6);
  nn::Discriminator D(nn::NetworkConfig{}, rng);
  const Tensor x = noise(32, 2, rng);
  const Tensor p = D.forward(x, labels(32, rng));
  EXPECT_EQ(p.shape(), (ad::Shape{32}));
  for (double v : p.values()) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
}

TEST(Discriminator, ZeroFinalLayerGivesExactlyHalf) {
  Rng rng(7);
  nn::Discriminator D(nn::NetworkConfig{}, rng);
  auto params = D.parameters();
  for (double& w : params[6].tensor.mutable_values()) w = 0.0;
  const Tensor p = D.forward(noise(16, 2, rng), labels(16, rng));
  for (double v : p.values()) EXPECT_EQ(v, 0.5);
}

TEST(Discriminator, LogProbabilityGradientInDesignMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(100 + seed);
    nn::Discriminator D(nn::NetworkConfig{}, rng);
    // Larger final weights so the gradient is not dominated by the floor.
    for (double& w : D.parameters()[6].tensor.mutable_values()) w *= 50.0;
    const Tensor y = labels(4, rng);
    auto f = [&](const Tensor& x) { return ad::sum(ad::log(D.forward(x, y))); };
    const auto rep = ad::grad_check(f, noise(4, 2, rng), 1e-5, 1e-4);
    EXPECT_TRUE(rep.passed) << "seed " << seed << " rel " << rep.max_rel_error;
  }
}

TEST(Adam, StaircaseLearningRate) {
  const nn::AdamConfig cfg;
  EXPECT_DOUBLE_EQ(nn::Adam::effective_lr(cfg, 0), 1e-4);
  EXPECT_DOUBLE_EQ(nn::Adam::effective_lr(cfg, 4999), 1e-4);
  EXPECT_NEAR(nn::Adam::effective_lr(cfg, 5000), 8e-5, 1e-18);
  EXPECT_NEAR(nn::Adam::effective_lr(cfg, 10000), 6.4e-5, 1e-18);
  double prev = INFINITY;
  for (std::int64_t t = 0; t <= 60000; t += 250) {
    const double lr = nn::Adam::effective_lr(cfg, t);
    EXPECT_LE(lr, prev);
    prev = lr;
  }
}

TEST(Adam, ConstantUnitGradientDecreasesMonotonically) {
  const Tensor w = Tensor::parameter({}, {1.0});
  nn::Adam adam({{"w", w}}, nn::AdamConfig{});
  double prev = w.item();
  for (int i = 0; i < 200; ++i) {
    w.node().grad[0] = 1.0;
    adam.step();
    EXPECT_LT(w.item(), prev);
    prev = w.item();
    EXPECT_EQ(w.grad()[0], 0.0);
  }
  EXPECT_EQ(adam.t(), 200);
}

TEST(Adam, QuadraticBowlConverges) {
  Rng rng(11);
  std::vector<double> init(4);
  for (auto& v : init) v = rng.uniform(-1, 1);
  const Tensor w = Tensor::parameter({4}, init);
  nn::AdamConfig cfg;
  cfg.base_lr = 1e-2;
  nn::Adam adam({{"w", w}}, cfg);
  double norm = INFINITY;
  for (int i = 0; i < 10000 && norm >= 1e-3; ++i) {
    ad::backward(ad::sum(ad::square(w)));
    adam.step();
    norm = 0.0;
    for (double v : w.values()) norm += v * v;
    norm = std::sqrt(norm);
  }
  EXPECT_LT(norm, 1e-3);
}

TEST(Adam, ZeroGradientLeavesParameterUnchanged) {
  const Tensor a = Tensor::parameter({2}, {0.3, -0.4});
  const Tensor b = Tensor::parameter({2}, {1.5, 2.5});
  nn::Adam adam({{"a", a}, {"b", b}}, nn::AdamConfig{});
  ad::backward(ad::sum(ad::square(a)));
  adam.step();
  EXPECT_NE(a[0], 0.3);
  EXPECT_NE(a[1], -0.4);
  EXPECT_EQ(b[0], 1.5);
  EXPECT_EQ(b[1], 2.5);
}

TEST(Adam, UpdateDependsOnlyOnSummedGradient) {
  // Two batch orderings that sum to the same gradient give the same update.
  const Tensor w1 = Tensor::parameter({3}, {0.1, 0.2, 0.3});
  const Tensor w2 = Tensor::parameter({3}, {0.1, 0.2, 0.3});
  nn::Adam a1({{"w", w1}}, nn::AdamConfig{});
  nn::Adam a2({{"w", w2}}, nn::AdamConfig{});
  const Tensor x1 = Tensor::vector({1.0, -2.0, 0.5}), x2 = Tensor::vector({0.25, 0.75, -1.0});
  ad::backward(ad::sum(ad::mul(w1, x1)));
  ad::backward(ad::sum(ad::mul(w1, x2)));
  ad::backward(ad::sum(ad::mul(w2, x2)));
  ad::backward(ad::sum(ad::mul(w2, x1)));
  a1.step();
  a2.step();
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(w1[i], w2[i]);
}

TEST(Adam, NonFiniteGradientNamesTheParameter) {
  const Tensor a = Tensor::parameter({2}, {0.3, -0.4});
  nn::Adam adam({{"G.2.weight", a}}, nn::AdamConfig{});
  a.node().grad[1] = NAN;
  try {
    adam.step();
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_EQ(e.tag(), "G.2.weight");
  }
  EXPECT_EQ(a[0], 0.3);
  EXPECT_EQ(adam.t(), 0);
}
