#pragma once

#include <cstddef>
#include <functional>

#include "pcdgan/autodiff.hpp"

namespace pcdgan::ad {

struct GradCheckReport {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t worst_index = 0;
  bool passed = false;
};

// Compares backward() against central differences for every entry of `x`.
// The relative error of entry i is |analytic - numeric| / max(|analytic|,
// |numeric|, abs_floor); the floor keeps entries that are zero on both sides
// from dividing by rounding noise.
GradCheckReport grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                           double step, double tol, double abs_floor = 1e-6);

}  // namespace pcdgan::ad
