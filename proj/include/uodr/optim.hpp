// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "uodr/matrix.hpp"

namespace uodr {

/// Heavy-ball update: v <- momentum * v - lr * g; p <- p + v.
inline void momentum_step(Matrix& param, Matrix& velocity, const Matrix& grad,
                          double lr, double momentum) {
  auto p = param.values();
  auto v = velocity.values();
  auto g = grad.values();
  for (std::size_t i = 0; i < p.size(); ++i) {
    v[i] = momentum * v[i] - lr * g[i];
    p[i] += v[i];
  }
}

}  // namespace uodr
