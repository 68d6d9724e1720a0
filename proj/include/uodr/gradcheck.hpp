// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>

#include "uodr/matrix.hpp"

namespace uodr {

using ScalarFn = std::function<double(const Matrix&)>;

/// Central differences (f(x + eps e_k) - f(x - eps e_k)) / 2 eps per entry.
Matrix numeric_gradient(const ScalarFn& f, const Matrix& x, double eps);

/// max|a - n| / max(max|a|, max|n|, 1e-8). Scale-aware, so coordinates whose
/// gradient is near zero do not dominate through roundoff alone.
double relative_error(const Matrix& analytic, const Matrix& numeric);

/// relative_error(analytic, numeric_gradient(f, x, eps)).
double grad_check(const ScalarFn& f, const Matrix& x, const Matrix& analytic,
                  double eps = 1e-6);

}  // namespace uodr
