#pragma once

// Performance-conditioned DPP kernel over a generated batch and the
// log-determinant diversity loss built from it.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pcdgan/autodiff.hpp"

namespace pcdgan::dpp {

inline constexpr double kQualityFloor = 1e-6;
inline constexpr double kDefaultJitter = 1e-6;
inline constexpr int kMaxJitterRetries = 3;

// Where the diagonal regularizer enters the kernel.
//   kEnsemble:   L = K o (v v^T) + jitter I
//   kSimilarity: L = (K + jitter I) o (v v^T), so that
//                logdet L = 2 sum log v_i + logdet(K + jitter I) exactly.
enum class JitterPlacement { kEnsemble, kSimilarity };

std::string to_string(JitterPlacement p);
JitterPlacement parse_jitter_placement(std::string_view text);

struct DppBatchKernel {
  ad::Tensor L;  // [B, B], symmetric
  double gamma0 = 3.0;
  double bandwidth = 1.0;
  double jitter = kDefaultJitter;  // already on the diagonal of L, times diag_scale
  JitterPlacement placement = JitterPlacement::kEnsemble;
  std::vector<double> diag_scale;  // per-row factor on the jitter; empty means 1
};

// K_ij = exp(-|x_i - x_j|^2 / (2 h^2)) for X of shape [B, d].
ad::Tensor rbf_kernel(const ad::Tensor& X, double bandwidth);

// L_ij = K_ij (v_i v_j) + jitter [i == j], v_i = max(q_i, kQualityFloor)^gamma0,
// with the jitter placed as `placement` says. q has shape [B] with entries in [0, 1].
DppBatchKernel build_kernel(const ad::Tensor& X, const ad::Tensor& q, double gamma0,
                            double jitter = kDefaultJitter, double bandwidth = 1.0,
                            JitterPlacement placement = JitterPlacement::kEnsemble);

// Lower Cholesky factor of the row-major n x n matrix A, or nullopt when A is
// not numerically positive definite.
std::optional<std::vector<double>> cholesky(std::span<const double> A, std::size_t n);

// log det(L) through a Cholesky factorization, with backward rule
// d logdet / dL = L^{-1}. On failure, retries with the diagonal jitter raised
// tenfold (up to kMaxJitterRetries times) before throwing SingularKernelError.
ad::Tensor logdet_psd(const ad::Tensor& L, double base_jitter = kDefaultJitter);
// Same, but retries raise the jitter where the kernel placed it.
ad::Tensor logdet_psd(const DppBatchKernel& kernel);

// -logdet(L) / |B|.
ad::Tensor pcd_loss(const DppBatchKernel& kernel);

}  // namespace pcdgan::dpp
