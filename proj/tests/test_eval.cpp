#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "pcdgan/error.hpp"
#include "pcdgan/eval.hpp"
#include "pcdgan/nn.hpp"
#include "pcdgan/synthetic.hpp"

using namespace pcdgan;

namespace {

std::vector<double> uniform_points(std::size_t n, double lo, double hi, Rng& rng) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

}  // namespace

TEST(LabelError, Examples) {
  const std::vector<double> c = {0.1, 0.5, 0.9};
  EXPECT_EQ(eval::label_error(c, c), 0.0);
  EXPECT_NEAR(eval::label_error(0.5, std::vector<double>{0.4, 0.6}), 0.1, 1e-15);
  EXPECT_THROW(eval::label_error(c, std::vector<double>{0.1}), ContractViolation);
  EXPECT_THROW(eval::label_error(0.5, std::vector<double>{}), ContractViolation);
}

TEST(LabelError, ExchangingEquidistantPredictionsIsInvariant) {
  const std::vector<double> c = {0.3, 0.3, 0.7};
  EXPECT_DOUBLE_EQ(eval::label_error(c, std::vector<double>{0.2, 0.35, 0.7}),
                   eval::label_error(c, std::vector<double>{0.4, 0.35, 0.7}));
}

TEST(Likelihood, AllLabelsAtTheConditionUseTheFloor) {
  const std::vector<double> labels(1000, 0.4);
  const auto r = eval::likelihood_score(0.4, labels);
  EXPECT_TRUE(r.degenerate);
  EXPECT_EQ(r.bandwidth, 1e-3);
  EXPECT_NEAR(r.density, 1.0 / (std::sqrt(2.0 * std::numbers::pi) * 1e-3), 1e-9);
}

TEST(Likelihood, DistantLabelsGiveNearZeroDensity) {
  Rng rng(1);
  const auto labels = uniform_points(500, 10.0, 11.0, rng);
  EXPECT_LT(eval::likelihood_score(0.0, labels).density, 1e-12);
}

TEST(Likelihood, GaussianSampleRecoversItsDensity) {
  Rng rng(2);
  std::vector<double> labels(2000);
  for (auto& v : labels) v = rng.normal(0.5, 0.1);
  const auto r = eval::likelihood_score(0.5, labels);
  EXPECT_FALSE(r.degenerate);
  // N(0.5, 0.1) density at its mean is 3.989.
  EXPECT_NEAR(r.density, 1.0 / (0.1 * std::sqrt(2.0 * std::numbers::pi)), 0.4);
  EXPECT_GT(r.bandwidth, 0.01);
  EXPECT_LT(r.bandwidth, 0.1);
}

TEST(Likelihood, PermutationInvariant) {
  Rng rng(3);
  auto labels = uniform_points(800, 0.0, 1.0, rng);
  const auto base = eval::likelihood_score(0.3, labels);
  std::mt19937_64 shuffle(4);
  for (int k = 0; k < 5; ++k) {
    std::shuffle(labels.begin(), labels.end(), shuffle);
    const auto r = eval::likelihood_score(0.3, labels);
    EXPECT_EQ(r.density, base.density);
    EXPECT_EQ(r.bandwidth, base.bandwidth);
  }
}

TEST(Likelihood, KdeDensityIntegratesToOne) {
  const std::vector<double> labels = {0.2, 0.25, 0.7};
  double integral = 0.0;
  const double dx = 1e-4;
  for (double x = -1.0; x <= 2.0; x += dx) integral += eval::kde_density(x, labels, 0.05) * dx;
  EXPECT_NEAR(integral, 1.0, 1e-6);
}

TEST(Diversity, IdenticalSamplesAreStronglyNegative) {
  const std::vector<double> pts(2 * 100, 0.25);
  Rng rng(5);
  const auto r = eval::diversity_score(pts, 2, 1.0, 10, 50, rng);
  EXPECT_EQ(r.degenerate_subsets, 50u);
  // All-ones kernel plus the first jitter: eigenvalues 10 + 1e-10 and nine of 1e-10.
  EXPECT_NEAR(r.score, std::log(10.0) + 9.0 * std::log(1e-10), 1e-3);
}

TEST(Diversity, DistantSamplesApproachZero) {
  std::vector<double> pts;
  for (int i = 0; i < 50; ++i) {
    pts.push_back(100.0 * i);
    pts.push_back(-50.0 * i);
  }
  Rng rng(6);
  const auto r = eval::diversity_score(pts, 2, 1.0, 10, 100, rng);
  EXPECT_NEAR(r.score, 0.0, 1e-12);
  EXPECT_EQ(r.degenerate_subsets, 0u);
}

TEST(Diversity, NeverPositive) {
  for (int seed = 0; seed < 20; ++seed) {
    Rng rng(100 + seed);
    const auto pts = uniform_points(2 * 200, -1.0, 1.0, rng);
    EXPECT_LE(eval::diversity_score(pts, 2, 1.0, 10, 100, rng).score, 0.0);
  }
}

TEST(Diversity, MonteCarloSpreadShrinksWithMoreSubsets) {
  Rng data(7);
  const auto pts = uniform_points(2 * 1000, -0.6, 0.6, data);
  auto spread = [&](std::size_t n_subsets) {
    std::vector<double> scores;
    for (int r = 0; r < 20; ++r) {
      Rng rng(1000 + r);
      scores.push_back(eval::diversity_score(pts, 2, 1.0, 10, n_subsets, rng).score);
    }
    return eval::stats(scores).std;
  };
  EXPECT_LT(spread(1000), spread(100));
}

TEST(Diversity, SubsetLargerThanSampleIsContractViolation) {
  const std::vector<double> pts(2 * 5, 0.0);
  Rng rng(8);
  EXPECT_THROW(eval::diversity_score(pts, 2, 1.0, 10, 10, rng), ContractViolation);
}

TEST(Protocol, ConditionSweep) {
  const eval::ProtocolConfig p;
  const auto c = p.conditions();
  ASSERT_EQ(c.size(), 10u);
  EXPECT_DOUBLE_EQ(c.front(), 0.05);
  EXPECT_DOUBLE_EQ(c.back(), 0.95);
  EXPECT_NEAR(c[1] - c[0], 0.1, 1e-15);
  const auto full = eval::ProtocolConfig::full();
  EXPECT_EQ(full.conditions().size(), 100u);
  EXPECT_EQ(full.repeats, 10u);
}

TEST(Protocol, ReportShapeAndDeterminism) {
  Rng init(9);
  nn::Generator G(nn::NetworkConfig{}, init);
  const auto ds = synthetic::generate_dataset(2, 10000, 2021);
  eval::ProtocolConfig p;
  p.n_samples = 200;
  p.n_subsets = 50;
  p.seed = 42;
  const auto a = eval::evaluate(G, ds, p);
  ASSERT_FALSE(a.failed) << a.diagnostics;
  ASSERT_EQ(a.cells.size(), 30u);
  ASSERT_EQ(a.per_condition.size(), 10u);
  for (const auto& cell : a.cells) {
    EXPECT_GE(cell.label_error, 0.0);
    EXPECT_LE(cell.diversity, 0.0);
  }
  p.threads = 3;
  const auto b = eval::evaluate(G, ds, p);
  for (std::size_t k = 0; k < a.cells.size(); ++k) {
    EXPECT_EQ(a.cells[k].label_error, b.cells[k].label_error);
    EXPECT_EQ(a.cells[k].likelihood, b.cells[k].likelihood);
    EXPECT_EQ(a.cells[k].diversity, b.cells[k].diversity);
  }
  EXPECT_EQ(a.likelihood.mean, b.likelihood.mean);
}

TEST(Protocol, PredictedLabelsUseTheExactEstimator) {
  const auto ds = synthetic::generate_dataset(1, 1000, 3);
  const auto mu = synthetic::mode_center(2);
  const std::vector<double> designs = {mu[0], mu[1], 0.0, 0.0};
  const auto y = eval::predict_labels(designs, ds);
  EXPECT_NEAR(y[0], (synthetic::quality_value(mu[0], mu[1]) - ds.label_min) /
                        (ds.label_max - ds.label_min), 1e-15);
  EXPECT_NEAR(y[1], (6.0 * std::exp(-8.0) - ds.label_min) / (ds.label_max - ds.label_min), 1e-15);
}

TEST(Stats, PopulationStandardDeviation) {
  const std::vector<double> v = {1.0, 2.0, 3.0, 4.0};
  const auto s = eval::stats(v);
  EXPECT_DOUBLE_EQ(s.mean, 2.5);
  EXPECT_DOUBLE_EQ(s.std, std::sqrt(1.25));
}
