#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "pcdgan/dpp.hpp"
#include "pcdgan/error.hpp"
#include "pcdgan/grad_check.hpp"
#include "pcdgan/llets.hpp"
#include "pcdgan/rng.hpp"
#include "pcdgan/synthetic.hpp"

using namespace pcdgan;
using ad::Tensor;

namespace {

using Matrix = std::vector<std::vector<double>>;

// Laplace expansion along the first row.
double cofactor_det(const Matrix& A) {
  const std::size_t n = A.size();
  if (n == 0) return 1.0;
  if (n == 1) return A[0][0];
  double det = 0.0;
  for (std::size_t c = 0; c < n; ++c) {
    Matrix minor;
    for (std::size_t r = 1; r < n; ++r) {
      std::vector<double> row;
      for (std::size_t k = 0; k < n; ++k) {
        if (k != c) row.push_back(A[r][k]);
      }
      minor.push_back(row);
    }
    det += ((c % 2 == 0) ? 1.0 : -1.0) * A[0][c] * cofactor_det(minor);
  }
  return det;
}

Matrix to_matrix(std::span<const double> v, std::size_t n) {
  Matrix m(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) m[i][j] = v[i * n + j];
  }
  return m;
}

Matrix submatrix(const Matrix& A, const std::vector<std::size_t>& idx) {
  Matrix s(idx.size(), std::vector<double>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) {
    for (std::size_t j = 0; j < idx.size(); ++j) s[i][j] = A[idx[i]][idx[j]];
  }
  return s;
}

// B B^T + 0.1 I for a random B.
std::vector<double> random_spd(std::size_t n, Rng& rng) {
  std::vector<double> B(n * n);
  for (auto& b : B) b = rng.uniform(-1.0, 1.0);
  std::vector<double> A(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t k = 0; k < n; ++k) A[i * n + j] += B[i * n + k] * B[j * n + k];
    }
    A[i * n + i] += 0.1;
  }
  return A;
}

Tensor random_points(std::size_t n, Rng& rng, double spread = 1.0) {
  std::vector<double> v(2 * n);
  for (auto& x : v) x = rng.uniform(-spread, spread);
  return Tensor::constant({n, 2}, v);
}

Tensor random_quality(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(0.2, 1.0);
  return Tensor::vector(v);
}

double rel_diff(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace

TEST(RbfKernel, IdenticalPointsGiveOnes) {
  const Tensor K = dpp::rbf_kernel(Tensor::constant({3, 2}, {0.2, 0.1, 0.2, 0.1, 0.2, 0.1}), 1.0);
  for (double v : K.values()) EXPECT_EQ(v, 1.0);
}

TEST(RbfKernel, TwoPointsAtDistance) {
  for (double d : {0.1, 0.5, 1.0, 2.5}) {
    const Tensor K = dpp::rbf_kernel(Tensor::constant({2, 2}, {0.0, 0.0, d * 0.6, d * 0.8}), 1.0);
    EXPECT_NEAR(K[1], std::exp(-d * d / 2.0), 1e-15);
    EXPECT_EQ(K[1], K[2]);
    EXPECT_EQ(K[0], 1.0);
  }
  const Tensor K = dpp::rbf_kernel(Tensor::constant({2, 2}, {0.0, 0.0, 1.0, 0.0}), 0.5);
  EXPECT_NEAR(K[1], std::exp(-2.0), 1e-15);
}

TEST(RbfKernel, RandomBatchIsPositiveSemiDefinite) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    const Tensor K = dpp::rbf_kernel(random_points(6, rng), 1.0);
    const Eigen::Map<const Eigen::Matrix<double, 6, 6, Eigen::RowMajor>> M(K.values().data());
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(M);
    EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-10);
  }
}

TEST(RbfKernel, BadInputsAreContractViolations) {
  EXPECT_THROW(dpp::rbf_kernel(Tensor::zeros({0, 2}), 1.0), ContractViolation);
  EXPECT_THROW(dpp::rbf_kernel(Tensor::zeros({3, 2}), 0.0), ContractViolation);
}

TEST(RbfKernel, GradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    auto f = [](const Tensor& x) {
      const Tensor K = dpp::rbf_kernel(x, 1.0);
      return ad::sum(ad::mul(K, Tensor::constant(K.shape(), [&] {
        std::vector<double> w(K.size());
        for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::sin(1.0 + static_cast<double>(i));
        return w;
      }())));
    };
    const auto rep = ad::grad_check(f, random_points(5, rng), 1e-5, 1e-4);
    EXPECT_TRUE(rep.passed) << "seed " << seed << " rel " << rep.max_rel_error;
  }
}

TEST(BuildKernel, UnitQualityGivesSimilarityPlusJitter) {
  Rng rng(1);
  const Tensor X = random_points(5, rng);
  const Tensor K = dpp::rbf_kernel(X, 1.0);
  for (double gamma0 : {0.5, 3.0, 7.0}) {
    const auto L = dpp::build_kernel(X, Tensor::full({5}, 1.0), gamma0, 1e-6);
    for (std::size_t i = 0; i < 5; ++i) {
      for (std::size_t j = 0; j < 5; ++j) {
        EXPECT_NEAR(L.L.at(i, j), K.at(i, j) + (i == j ? 1e-6 : 0.0), 1e-15);
      }
    }
  }
}

TEST(BuildKernel, SingleSample) {
  const auto L = dpp::build_kernel(Tensor::constant({1, 2}, {0.3, -0.2}), Tensor::vector({0.6}), 3.0, 1e-6);
  EXPECT_NEAR(L.L.item(), std::pow(0.6, 6.0) + 1e-6, 1e-15);
}

TEST(BuildKernel, HadamardStructureAndSymmetry) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const Tensor X = random_points(6, rng);
    const Tensor q = random_quality(6, rng);
    const double jitter = 1e-6;
    const auto L = dpp::build_kernel(X, q, 3.0, jitter);
    const Tensor K = dpp::rbf_kernel(X, 1.0);
    for (std::size_t i = 0; i < 6; ++i) {
      for (std::size_t j = 0; j < 6; ++j) {
        const double vi = std::pow(q[i], 3.0), vj = std::pow(q[j], 3.0);
        EXPECT_NEAR(L.L.at(i, j) - (i == j ? jitter : 0.0), K.at(i, j) * vi * vj, 1e-14);
        EXPECT_NEAR(L.L.at(i, j), L.L.at(j, i), 1e-12);
      }
      EXPECT_NEAR(L.L.at(i, i), std::pow(q[i], 6.0) + jitter, 1e-14);
    }
  }
}

TEST(BuildKernel, QualityIsFlooredAndRangeChecked) {
  const Tensor X = Tensor::constant({2, 2}, {0.0, 0.0, 1.0, 1.0});
  const auto L = dpp::build_kernel(X, Tensor::vector({0.0, 1.0}), 1.0, 0.0);
  EXPECT_NEAR(L.L.at(0, 0), dpp::kQualityFloor * dpp::kQualityFloor, 1e-25);
  EXPECT_THROW(dpp::build_kernel(X, Tensor::vector({0.5, 1.5}), 1.0), ContractViolation);
  EXPECT_THROW(dpp::build_kernel(X, Tensor::vector({0.5}), 1.0), ContractViolation);
}

TEST(Logdet, IdentityIsZero) {
  for (std::size_t n : {1u, 3u, 8u}) {
    std::vector<double> eye(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) eye[i * n + i] = 1.0;
    EXPECT_EQ(dpp::logdet_psd(Tensor::constant({n, n}, eye), 0.0).item(), 0.0);
  }
}

TEST(Logdet, TwoByTwoClosedForm) {
  for (double d : {0.05, 0.3, 1.0, 2.0}) {
    const double k = std::exp(-d * d / 2.0);
    const Tensor L = Tensor::constant({2, 2}, {1.0, k, k, 1.0});
    EXPECT_NEAR(dpp::logdet_psd(L, 0.0).item(), std::log(1.0 - std::exp(-d * d)), 1e-12);
  }
}

TEST(Logdet, MatchesCofactorExpansionAndEigenvalues) {
  for (std::size_t n = 2; n <= 5; ++n) {
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
      Rng rng(seed * 31 + n);
      const auto A = random_spd(n, rng);
      const double got = dpp::logdet_psd(Tensor::constant({n, n}, A), 0.0).item();
      EXPECT_NEAR(got, std::log(cofactor_det(to_matrix(A, n))), 1e-8) << "n " << n;
      const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> M(
          A.data(), n, n);
      const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(M);
      EXPECT_NEAR(got, eig.eigenvalues().array().log().sum(), 1e-8);
    }
  }
}

TEST(Logdet, GradientIsInverse) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    const auto A = random_spd(4, rng);
    auto f = [](const Tensor& L) {
      // Symmetrize so off-diagonal perturbations stay symmetric.
      return ad::neg(dpp::logdet_psd(ad::scale(ad::add(L, ad::transpose(L)), 0.5), 0.0));
    };
    const auto rep = ad::grad_check(f, Tensor::constant({4, 4}, A), 1e-5, 1e-4);
    EXPECT_TRUE(rep.passed) << "seed " << seed << " rel " << rep.max_rel_error;
  }
}

TEST(Logdet, JitterEscalationRescuesDuplicates) {
  const Tensor X = Tensor::constant({3, 2}, {0.1, 0.1, 0.1, 0.1, 0.1, 0.1});
  const auto L = dpp::build_kernel(X, Tensor::full({3}, 1.0), 3.0, 0.0);
  const double ld = dpp::logdet_psd(L).item();
  EXPECT_TRUE(std::isfinite(ld));
  EXPECT_LT(ld, 0.0);
}

TEST(Logdet, IndefiniteMatrixIsSingularKernelError) {
  const Tensor L = Tensor::constant({2, 2}, {1.0, 2.0, 2.0, 1.0});
  EXPECT_THROW(dpp::logdet_psd(L, 1e-6), SingularKernelError);
  EXPECT_THROW(dpp::logdet_psd(Tensor::zeros({2, 3}), 1e-6), ContractViolation);
}

TEST(DppIdentities, QualityFactorizationOverAllSubsets) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    const Tensor X = random_points(5, rng, 0.6);
    const Tensor q = random_quality(5, rng);
    const double gamma0 = 3.0;
    const Matrix L = to_matrix(dpp::build_kernel(X, q, gamma0, 0.0).L.values(), 5);
    const Matrix K = to_matrix(dpp::rbf_kernel(X, 1.0).values(), 5);
    for (unsigned mask = 1; mask < 32; ++mask) {
      std::vector<std::size_t> idx;
      double quality = 1.0;
      for (std::size_t i = 0; i < 5; ++i) {
        if (mask & (1u << i)) {
          idx.push_back(i);
          quality *= std::pow(q[i], 2.0 * gamma0);
        }
      }
      const double lhs = cofactor_det(submatrix(L, idx));
      const double rhs = quality * cofactor_det(submatrix(K, idx));
      EXPECT_LT(rel_diff(lhs, rhs), 1e-8) << "mask " << mask;
    }
  }
}

TEST(DppIdentities, SubsetDeterminantsSumToNormalizer) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed + 100);
    const Tensor X = random_points(5, rng, 0.6);
    const Matrix L = to_matrix(dpp::build_kernel(X, random_quality(5, rng), 3.0, 0.0).L.values(), 5);
    double total = 0.0;
    for (unsigned mask = 0; mask < 32; ++mask) {
      std::vector<std::size_t> idx;
      for (std::size_t i = 0; i < 5; ++i) {
        if (mask & (1u << i)) idx.push_back(i);
      }
      total += cofactor_det(submatrix(L, idx));
    }
    Matrix LI = L;
    for (std::size_t i = 0; i < 5; ++i) LI[i][i] += 1.0;
    EXPECT_LT(rel_diff(total, cofactor_det(LI)), 1e-8);
  }
}

TEST(PcdLoss, SingleUnitItemIsZero) {
  const auto L = dpp::build_kernel(Tensor::constant({1, 2}, {0.0, 0.0}), Tensor::vector({1.0}), 3.0, 0.0);
  EXPECT_EQ(dpp::pcd_loss(L).item(), 0.0);
}

TEST(PcdLoss, CollapsedBatchIsHeavilyPenalized) {
  const std::size_t n = 8;
  const Tensor X = Tensor::constant({n, 2}, std::vector<double>(2 * n, 0.25));
  const auto L = dpp::build_kernel(X, Tensor::full({n}, 1.0), 3.0, 1e-6);
  // Eigenvalues n + 1e-6 and 1e-6 (n - 1 times).
  const double expected = -(std::log(n + 1e-6) + (n - 1) * std::log(1e-6)) / n;
  EXPECT_NEAR(dpp::pcd_loss(L).item(), expected, 1e-6);
  EXPECT_GT(dpp::pcd_loss(L).item(), 10.0);
}

TEST(PcdLoss, DecreasesAsPointsSpreadApart) {
  double prev = INFINITY;
  for (int k = 1; k <= 20; ++k) {
    const double d = 0.1 * k;
    const auto L = dpp::build_kernel(Tensor::constant({2, 2}, {0.0, 0.0, d, 0.0}), Tensor::full({2}, 1.0), 3.0);
    const double loss = dpp::pcd_loss(L).item();
    EXPECT_LT(loss, prev) << "d = " << d;
    prev = loss;
  }
}

TEST(PcdLoss, DecreasesWhenAnyQualityIncreases) {
  Rng rng(5);
  const Tensor X = random_points(6, rng);
  const Tensor q = random_quality(6, rng);
  const double base = dpp::pcd_loss(dpp::build_kernel(X, q, 3.0)).item();
  for (std::size_t i = 0; i < 6; ++i) {
    std::vector<double> qv(q.values().begin(), q.values().end());
    qv[i] = std::min(1.0, qv[i] + 0.05);
    EXPECT_LT(dpp::pcd_loss(dpp::build_kernel(X, Tensor::vector(qv), 3.0)).item(), base);
  }
}

TEST(PcdLoss, GradientInDesignsAndQualities) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    const Tensor q = random_quality(5, rng);
    const Tensor X = random_points(5, rng);
    auto fx = [&](const Tensor& x) { return dpp::pcd_loss(dpp::build_kernel(x, q, 3.0)); };
    const auto rx = ad::grad_check(fx, X, 1e-5, 1e-4);
    EXPECT_TRUE(rx.passed) << "designs, seed " << seed << " rel " << rx.max_rel_error;
    auto fq = [&](const Tensor& qq) { return dpp::pcd_loss(dpp::build_kernel(X, qq, 3.0)); };
    const auto rq = ad::grad_check(fq, q, 1e-6, 1e-4);
    EXPECT_TRUE(rq.passed) << "qualities, seed " << seed << " rel " << rq.max_rel_error;
  }
}

TEST(PcdLoss, GradientThroughEstimatorAndScore) {
  // Designs reach the loss through the similarity kernel and through
  // quality -> LLETS -> kernel.
  const auto lp = llets::llets_params(4.7);
  int checked = 0;
  for (std::uint64_t seed = 0; checked < 50; ++seed) {
    Rng rng(seed);
    const Tensor X = random_points(4, rng, 0.6);
    std::vector<double> targets(4);
    for (auto& t : targets) t = rng.uniform(0.0, 0.3);
    auto eps_of = [&](const Tensor& x) {
      return ad::abs(ad::sub(Tensor::vector(targets), synthetic::quality(x)));
    };
    // Skip draws that sit on a kink of abs, clamp or the LLETS branch point,
    // and near-zero scores whose gradient is below finite-difference noise.
    bool near_kink = false;
    {
      const Tensor e = eps_of(X);
      for (double v : e.values()) near_kink = near_kink || v < 1e-3 || v > 0.9 || std::abs(v - lp.eps_star) < 1e-3;
    }
    if (near_kink) continue;
    auto f = [&](const Tensor& x) {
      const Tensor q = llets::llets_score(ad::clamp(eps_of(x), 0.0, 1.0), lp);
      return dpp::pcd_loss(dpp::build_kernel(x, q, 3.0));
    };
    const auto rep = ad::grad_check(f, X, 1e-5, 1e-4);
    EXPECT_TRUE(rep.passed) << "seed " << seed << " rel " << rep.max_rel_error;
    ++checked;
  }
}

TEST(SimilarityJitter, HadamardOfRegularizedSimilarity) {
  const auto sim = dpp::JitterPlacement::kSimilarity;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed + 200);
    const Tensor X = random_points(6, rng);
    const Tensor q = random_quality(6, rng);
    const double jitter = 1e-3;
    const auto L = dpp::build_kernel(X, q, 3.0, jitter, 1.0, sim);
    const Tensor K = dpp::rbf_kernel(X, 1.0);
    ASSERT_EQ(L.diag_scale.size(), 6u);
    for (std::size_t i = 0; i < 6; ++i) {
      const double vi = std::pow(q[i], 3.0);
      EXPECT_NEAR(L.diag_scale[i], vi * vi, 1e-15);
      EXPECT_NEAR(L.L.at(i, i), std::pow(q[i], 6.0) * (1.0 + jitter), 1e-14);
      for (std::size_t j = 0; j < 6; ++j) {
        if (i != j) EXPECT_NEAR(L.L.at(i, j), K.at(i, j) * vi * std::pow(q[j], 3.0), 1e-14);
      }
    }
  }
}

TEST(SimilarityJitter, LogdetSplitsIntoQualityAndSimilarity) {
  // A crowded batch, where an ensemble-placed jitter would swamp the
  // quality factor of most eigenvalues.
  const auto sim = dpp::JitterPlacement::kSimilarity;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed + 300);
    const std::size_t n = 32;
    const Tensor X = random_points(n, rng, 0.5);
    std::vector<double> qv(n);
    for (auto& v : qv) v = rng.uniform(0.01, 1.0);
    const double gamma0 = 3.0, jitter = 1e-6;
    const double got = dpp::logdet_psd(dpp::build_kernel(X, Tensor::vector(qv), gamma0, jitter, 1.0, sim)).item();

    const Tensor K = dpp::rbf_kernel(X, 1.0);
    Eigen::MatrixXd M(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) M(i, j) = K.at(i, j) + (i == j ? jitter : 0.0);
    }
    double expected = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(M).eigenvalues().array().log().sum();
    for (double v : qv) expected += 2.0 * gamma0 * std::log(v);
    EXPECT_LT(rel_diff(got, expected), 1e-8) << "seed " << seed;
  }
}

TEST(SimilarityJitter, EscalationRaisesTheSimilarityDiagonal) {
  // Three coincident points with no jitter: K is all ones, so the first
  // retry (1e-5 on K) is the one that succeeds.
  const Tensor X = Tensor::constant({3, 2}, {0.1, 0.1, 0.1, 0.1, 0.1, 0.1});
  const std::vector<double> qv = {0.5, 0.7, 0.9};
  const auto L = dpp::build_kernel(X, Tensor::vector(qv), 3.0, 0.0, 1.0, dpp::JitterPlacement::kSimilarity);
  double expected = std::log(3.0 + 1e-5) + 2.0 * std::log(1e-5);
  for (double v : qv) expected += 6.0 * std::log(v);
  EXPECT_NEAR(dpp::logdet_psd(L).item(), expected, 1e-8);
}

TEST(SimilarityJitter, GradientInDesignsAndQualities) {
  const auto sim = dpp::JitterPlacement::kSimilarity;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed + 400);
    const Tensor q = random_quality(5, rng);
    const Tensor X = random_points(5, rng);
    auto fx = [&](const Tensor& x) { return dpp::pcd_loss(dpp::build_kernel(x, q, 3.0, 1e-6, 1.0, sim)); };
    EXPECT_TRUE(ad::grad_check(fx, X, 1e-5, 1e-4).passed) << seed;
    auto fq = [&](const Tensor& qq) { return dpp::pcd_loss(dpp::build_kernel(X, qq, 3.0, 1e-6, 1.0, sim)); };
    EXPECT_TRUE(ad::grad_check(fq, q, 1e-6, 1e-4).passed) << seed;
  }
}

TEST(SimilarityJitter, PlacementNames) {
  for (auto p : {dpp::JitterPlacement::kEnsemble, dpp::JitterPlacement::kSimilarity}) {
    EXPECT_EQ(dpp::parse_jitter_placement(dpp::to_string(p)), p);
  }
  EXPECT_THROW(dpp::parse_jitter_placement("diagonal"), ContractViolation);
}
