#include "pcdgan/llets.hpp"

#include <cmath>
#include <fmt/format.h>
#include <numbers>

#include "pcdgan/error.hpp"

namespace pcdgan::llets {

namespace {

constexpr double kBranchX = -1.0 / std::numbers::e;

double initial_guess(double x) {
  if (x < -0.25) {
    // Series about the branch point in p = sqrt(2 (e x + 1)).
    const double p = std::sqrt(std::max(0.0, 2.0 * (std::numbers::e * x + 1.0)));
    return -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p;
  }
  if (x <= std::numbers::e) return std::log1p(x);
  const double l = std::log(x);
  return l - std::log(l);
}

}  // namespace

double lambert_w0(double x) {
  if (!(x >= kBranchX)) {
    throw DomainError(fmt::format("lambert_w0: argument {} is below -1/e", x));
  }
  if (x == kBranchX) return -1.0;
  if (x == 0.0) return 0.0;
  double w = initial_guess(x);
  for (int iter = 0; iter < 50; ++iter) {
    const double ew = std::exp(w);
    const double f = w * ew - x;
    const double wp1 = w + 1.0;
    if (wp1 == 0.0) break;
    const double denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
    const double dw = f / denom;
    w -= dw;
    if (std::abs(dw) <= 1e-16 * (1.0 + std::abs(w))) break;
  }
  return w;
}

LletsParams llets_params(double a) {
  if (!(a >= std::numbers::e / 2.0)) {
    throw DomainError(fmt::format("llets: cutoff a = {} is below e/2", a));
  }
  LletsParams p;
  p.a = a;
  p.w = lambert_w0(-1.0 / (2.0 * a));
  p.eps_star = std::exp(-a * std::exp(p.w));
  p.sigma = p.eps_star / std::sqrt(-2.0 * p.w);
  return p;
}

ad::Tensor llets_score(const ad::Tensor& eps, const LletsParams& p) {
  std::vector<double> mask(eps.size());
  for (std::size_t i = 0; i < eps.size(); ++i) {
    const double e = eps[i];
    if (!(e >= 0.0)) throw ContractViolation(fmt::format("llets: negative error {}", e));
    mask[i] = e > p.eps_star ? 1.0 : 0.0;
  }
  std::vector<double> inv(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) inv[i] = 1.0 - mask[i];
  const ad::Tensor log_branch = ad::scale(ad::log(eps), -1.0 / p.a);
  const ad::Tensor gauss_branch =
      ad::exp(ad::scale(ad::square(eps), -1.0 / (2.0 * p.sigma * p.sigma)));
  return ad::add(ad::mul(log_branch, ad::Tensor::constant(eps.shape(), std::move(mask))),
                 ad::mul(gauss_branch, ad::Tensor::constant(eps.shape(), std::move(inv))));
}

double llets_value(double eps, const LletsParams& p) {
  if (!(eps >= 0.0)) throw ContractViolation(fmt::format("llets: negative error {}", eps));
  if (eps > p.eps_star) return -std::log(eps) / p.a;
  return std::exp(-eps * eps / (2.0 * p.sigma * p.sigma));
}

double llets_slope(double eps, const LletsParams& p) {
  if (eps > p.eps_star) return -1.0 / (p.a * eps);
  const double s2 = p.sigma * p.sigma;
  return -(eps / s2) * std::exp(-eps * eps / (2.0 * s2));
}

}  // namespace pcdgan::llets
