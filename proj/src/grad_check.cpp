#include "pcdgan/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "pcdgan/error.hpp"

namespace pcdgan::ad {

namespace {

double eval_scalar(const std::function<Tensor(const Tensor&)>& f, const Tensor& x) {
  NoGradGuard guard;
  const double v = f(x).item();
  if (!std::isfinite(v)) throw NumericError("grad_check", "f(x) is not finite");
  return v;
}

}  // namespace

GradCheckReport grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                           double step, double tol, double abs_floor) {
  if (!(step > 0.0)) throw ContractViolation("grad_check: step must be positive");
  std::vector<double> base(x.values().begin(), x.values().end());
  Tensor probe = Tensor::parameter(x.shape(), base);

  Tensor root = f(probe);
  if (!std::isfinite(root.item())) throw NumericError("grad_check", "f(x) is not finite");
  backward(root);
  std::vector<double> analytic(probe.grad().begin(), probe.grad().end());

  GradCheckReport report;
  for (std::size_t i = 0; i < base.size(); ++i) {
    std::vector<double> plus = base, minus = base;
    plus[i] += step;
    minus[i] -= step;
    const double fp = eval_scalar(f, Tensor::constant(x.shape(), plus));
    const double fm = eval_scalar(f, Tensor::constant(x.shape(), minus));
    const double numeric = (fp - fm) / (2.0 * step);
    const double abs_err = std::abs(analytic[i] - numeric);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), abs_floor});
    const double rel = abs_err / denom;
    report.max_abs_error = std::max(report.max_abs_error, abs_err);
    if (rel > report.max_rel_error) {
      report.max_rel_error = rel;
      report.worst_index = i;
    }
  }
  report.passed = report.max_rel_error <= tol;
  return report;
}

}  // namespace pcdgan::ad
