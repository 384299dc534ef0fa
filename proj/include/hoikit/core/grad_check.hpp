#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "hoikit/core/tensor.hpp"
#include "hoikit/errors.hpp"

namespace hoikit {

struct GradCheckReport {
  double max_rel_err = 0.0;
  int worst_index = -1;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
};

inline double grad_rel_err(double a, double n) {
  return std::abs(a - n) / std::max({1.0, std::abs(a), std::abs(n)});
}

// Central-difference check of d f / d x at the current value of x. f must
// rebuild its graph on every call and read x's data buffer fresh; x is a
// leaf with requires_grad. Runs in float64 only, where the default step of
// 1e-6 gives ~1e-10 truncation error on smooth maps.
template <class F>
inline GradCheckReport grad_check(F f, Tensor<double>& x, double step = 1e-6) {
  if (!x.requires_grad || !x.grad) throw ShapeError("grad_check: x must require grad");

  x.zero_grad();
  Tensor<double> y = f(x);
  if (y.numel() != 1) throw ShapeError("grad_check: objective must be scalar");
  if (!std::isfinite(y.value())) throw EvalError("grad_check: non-finite objective");
  backward(y);
  const std::vector<double> analytic = *x.grad;

  GradCheckReport rep;
  NoGradGuard ng;  // numeric probes do not need graphs
  auto& xd = *x.data;
  for (std::size_t i = 0; i < xd.size(); ++i) {
    const double saved = xd[i];
    xd[i] = saved + step;
    const double fp = f(x).value();
    xd[i] = saved - step;
    const double fm = f(x).value();
    xd[i] = saved;
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw EvalError("grad_check: non-finite probe value");
    const double numeric = (fp - fm) / (2.0 * step);
    const double err = grad_rel_err(analytic[i], numeric);
    if (err > rep.max_rel_err) {
      rep.max_rel_err = err;
      rep.worst_index = int(i);
      rep.analytic_at_worst = analytic[i];
      rep.numeric_at_worst = numeric;
    }
  }
  return rep;
}

}  // namespace hoikit
