#pragma once

// Lambert log exponential transition score: a conditioning-quality score on
// the L1 label error eps in [0, 1]. Large errors are scored logarithmically,
// small errors by a Gaussian bump; the two pieces meet at a branch point
// fixed by the Lambert W function so that value and slope are continuous.

#include "pcdgan/autodiff.hpp"

namespace pcdgan::llets {

inline constexpr double kDefaultCutoff = 4.7;

// Principal branch W0(x) for x >= -1/e via Halley iteration (at most 50
// steps). Throws DomainError for x < -1/e.
double lambert_w0(double x);

struct LletsParams {
  double a = 0.0;         // Lambert cutoff, a >= e/2
  double w = 0.0;         // W0(-1/(2a)), in [-1, 0)
  double eps_star = 0.0;  // branch point exp(-a e^w)
  double sigma = 0.0;     // Gaussian width eps_star / sqrt(-2w)
};

// Throws DomainError for a < e/2.
LletsParams llets_params(double a = kDefaultCutoff);

// Elementwise score. eps must be non-negative (ContractViolation otherwise).
// Log branch for eps > eps_star, Gaussian exp(-eps^2 / (2 sigma^2)) below.
ad::Tensor llets_score(const ad::Tensor& eps, const LletsParams& p);

// Scalar versions of the score and its derivative.
double llets_value(double eps, const LletsParams& p);
double llets_slope(double eps, const LletsParams& p);

}  // namespace pcdgan::llets
