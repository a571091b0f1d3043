#include "pcdgan/dpp.hpp"

#include <cmath>
#include <fmt/format.h>

#include "pcdgan/error.hpp"

namespace pcdgan::dpp {

ad::Tensor rbf_kernel(const ad::Tensor& X, double bandwidth) {
  if (X.rank() != 2 || X.rows() == 0) {
    throw ContractViolation("rbf_kernel: expects a non-empty [B,d] batch, got " +
                            ad::shape_str(X.shape()));
  }
  if (!(bandwidth > 0.0)) throw ContractViolation("rbf_kernel: bandwidth must be positive");
  const std::size_t n = X.rows(), d = X.cols();
  const double inv_h2 = 1.0 / (bandwidth * bandwidth);
  auto x = X.values();
  std::vector<double> k(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    k[i * n + i] = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      double d2 = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        const double diff = x[i * d + c] - x[j * d + c];
        d2 += diff * diff;
      }
      k[i * n + j] = k[j * n + i] = std::exp(-0.5 * d2 * inv_h2);
    }
  }
  return ad::make_op("rbf_kernel", {n, n}, std::move(k), {X}, [n, d, inv_h2](ad::Node& self) {
    ad::Node& px = *self.parents[0];
    const auto& x = px.value;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        const double coeff = (self.grad[i * n + j] + self.grad[j * n + i]) * self.value[i * n + j];
        if (coeff == 0.0) continue;
        // Each unordered pair is visited twice; the i-side update only.
        for (std::size_t c = 0; c < d; ++c) {
          px.grad[i * d + c] -= coeff * (x[i * d + c] - x[j * d + c]) * inv_h2;
        }
      }
    }
  });
}

std::string to_string(JitterPlacement p) {
  return p == JitterPlacement::kEnsemble ? "ensemble" : "similarity";
}

JitterPlacement parse_jitter_placement(std::string_view text) {
  if (text == "ensemble") return JitterPlacement::kEnsemble;
  if (text == "similarity") return JitterPlacement::kSimilarity;
  throw ContractViolation(fmt::format("unknown jitter placement '{}'", text));
}

DppBatchKernel build_kernel(const ad::Tensor& X, const ad::Tensor& q, double gamma0,
                            double jitter, double bandwidth, JitterPlacement placement) {
  const std::size_t n = X.rows();
  if (q.size() != n) {
    throw ContractViolation(fmt::format("build_kernel: {} qualities for {} samples", q.size(), n));
  }
  for (double v : q.values()) {
    if (!(std::max(v, kQualityFloor) <= 1.0)) {
      throw ContractViolation(fmt::format("build_kernel: quality {} outside [0,1]", v));
    }
  }
  const ad::Tensor K = rbf_kernel(X, bandwidth);
  const ad::Tensor v = ad::exp(ad::scale(ad::log(ad::clamp(q, kQualityFloor, 1.0)), gamma0));
  const ad::Tensor outer = ad::matmul(ad::reshape(v, {n, 1}), ad::reshape(v, {1, n}));
  std::vector<double> eye(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) eye[i * n + i] = jitter;
  const ad::Tensor J = ad::Tensor::constant({n, n}, std::move(eye));
  DppBatchKernel out;
  if (placement == JitterPlacement::kSimilarity) {
    out.L = ad::mul(ad::add(K, J), outer);
    out.diag_scale.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.diag_scale[i] = v[i] * v[i];
  } else {
    out.L = ad::add(ad::mul(K, outer), J);
  }
  out.gamma0 = gamma0;
  out.bandwidth = bandwidth;
  out.jitter = jitter;
  out.placement = placement;
  return out;
}

std::optional<std::vector<double>> cholesky(std::span<const double> A, std::size_t n) {
  std::vector<double> L(n * n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    double diag = A[j * n + j];
    for (std::size_t k = 0; k < j; ++k) diag -= L[j * n + k] * L[j * n + k];
    if (!(diag > 0.0) || !std::isfinite(diag)) return std::nullopt;
    const double ljj = std::sqrt(diag);
    L[j * n + j] = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = A[i * n + j];
      for (std::size_t k = 0; k < j; ++k) s -= L[i * n + k] * L[j * n + k];
      L[i * n + j] = s / ljj;
    }
  }
  return L;
}

namespace {

// A^{-1} from its lower Cholesky factor, by solving L L^T X = I column-wise.
std::vector<double> inverse_from_cholesky(const std::vector<double>& L, std::size_t n) {
  std::vector<double> inv(n * n, 0.0);
  std::vector<double> y(n);
  for (std::size_t col = 0; col < n; ++col) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = i == col ? 1.0 : 0.0;
      for (std::size_t k = 0; k < i; ++k) s -= L[i * n + k] * y[k];
      y[i] = s / L[i * n + i];
    }
    for (std::size_t ii = n; ii-- > 0;) {
      double s = y[ii];
      for (std::size_t k = ii + 1; k < n; ++k) s -= L[k * n + ii] * inv[k * n + col];
      inv[ii * n + col] = s / L[ii * n + ii];
    }
  }
  return inv;
}

}  // namespace

namespace {

ad::Tensor logdet_impl(const ad::Tensor& L, double base_jitter, std::span<const double> scale) {
  if (L.rank() != 2 || L.rows() != L.cols() || L.rows() == 0) {
    throw ContractViolation("logdet_psd: expects a non-empty square matrix, got " +
                            ad::shape_str(L.shape()));
  }
  const std::size_t n = L.rows();
  std::vector<double> A(L.values().begin(), L.values().end());
  std::optional<std::vector<double>> chol = cholesky(A, n);
  // `added` is the jitter already on the diagonal; each retry raises the
  // total tenfold.
  double added = base_jitter;
  double jitter = base_jitter > 0.0 ? base_jitter : kDefaultJitter;
  for (int retry = 0; !chol && retry < kMaxJitterRetries; ++retry) {
    jitter *= 10.0;
    for (std::size_t i = 0; i < n; ++i) {
      A[i * n + i] += (jitter - added) * (scale.empty() ? 1.0 : scale[i]);
    }
    added = jitter;
    chol = cholesky(A, n);
  }
  if (!chol) {
    throw SingularKernelError(
        fmt::format("logdet_psd: Cholesky failed with diagonal jitter up to {}", jitter));
  }
  double logdet = 0.0;
  for (std::size_t i = 0; i < n; ++i) logdet += 2.0 * std::log((*chol)[i * n + i]);
  return ad::make_op("logdet", {}, {logdet}, {L}, [n, factor = std::move(*chol)](ad::Node& self) {
    ad::Node& pl = *self.parents[0];
    const std::vector<double> inv = inverse_from_cholesky(factor, n);
    const double g = self.grad[0];
    for (std::size_t i = 0; i < n * n; ++i) pl.grad[i] += g * inv[i];
  });
}

}  // namespace

ad::Tensor logdet_psd(const ad::Tensor& L, double base_jitter) {
  return logdet_impl(L, base_jitter, {});
}

ad::Tensor logdet_psd(const DppBatchKernel& kernel) {
  return logdet_impl(kernel.L, kernel.jitter, kernel.diag_scale);
}

ad::Tensor pcd_loss(const DppBatchKernel& kernel) {
  const double n = static_cast<double>(kernel.L.rows());
  return ad::scale(logdet_psd(kernel), -1.0 / n);
}

}  // namespace pcdgan::dpp
