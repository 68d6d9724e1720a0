// SPDX-License-Identifier: Apache-2.0
#include "uodr/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "uodr/error.hpp"
#include "uodr/kernels.hpp"

namespace uodr {

Matrix numeric_gradient(const ScalarFn& f, const Matrix& x, double eps) {
  if (!(eps > 0.0)) throw ValidationError("grad_check: eps must be positive");
  Matrix probe = x;
  Matrix grad(x.rows(), x.cols());
  auto p = probe.values();
  auto g = grad.values();
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double orig = p[k];
    p[k] = orig + eps;
    const double up = f(probe);
    p[k] = orig - eps;
    const double down = f(probe);
    p[k] = orig;
    g[k] = (up - down) / (2.0 * eps);
  }
  return grad;
}

double relative_error(const Matrix& analytic, const Matrix& numeric) {
  if (!analytic.same_shape(numeric)) {
    throw DimensionError("relative_error: gradient shapes differ");
  }
  const double denom =
      std::max({max_abs(analytic), max_abs(numeric), 1e-8});
  return max_abs(subtract(analytic, numeric)) / denom;
}

double grad_check(const ScalarFn& f, const Matrix& x, const Matrix& analytic,
                  double eps) {
  return relative_error(analytic, numeric_gradient(f, x, eps));
}

}  // namespace uodr
