// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>

#include "uodr/matrix.hpp"

namespace uodr {

// Dense kernels. The heavy ones are OpenMP-parallel over output rows; each
// output element is accumulated in a fixed order, so results are bit-identical
// to the serial reference versions below regardless of thread count.

/// a * b. Throws DimensionError when a.cols() != b.rows().
Matrix matmul(const Matrix& a, const Matrix& b);
/// a * b^T.
Matrix matmul_nt(const Matrix& a, const Matrix& b);
/// a^T * b.
Matrix matmul_tn(const Matrix& a, const Matrix& b);

/// Row-wise softmax with max subtraction.
Matrix softmax_rows(const Matrix& logits);
/// Gradient wrt logits given row-softmax output and gradient wrt it.
Matrix softmax_rows_backward(const Matrix& probs, const Matrix& grad_probs);

/// max(x, slope * x) elementwise. Slopes outside [0, 1] are rejected.
Matrix leaky_relu(const Matrix& m, double slope);
/// 1 where x > 0, slope where x <= 0 (the value at exactly 0 is the slope).
Matrix leaky_relu_derivative(const Matrix& pre_activation, double slope);

/// out(i, j) = sum_d |a(i, d) - b(j, d)|.
Matrix pairwise_l1(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& m);
Matrix gather_rows(const Matrix& m, std::span<const std::size_t> indices);
Matrix add(const Matrix& a, const Matrix& b);
Matrix subtract(const Matrix& a, const Matrix& b);
Matrix hadamard(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& m, double s);
/// y += alpha * x
void axpy(double alpha, const Matrix& x, Matrix& y);
/// Adds a 1 x cols row vector to every row.
Matrix add_row_vector(const Matrix& m, const Matrix& row);
/// 1 x cols matrix of column sums.
Matrix column_sums(const Matrix& m);
double sum(const Matrix& m);
double sum_squares(const Matrix& m);
double max_abs(const Matrix& m);

namespace serial {

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix matmul_nt(const Matrix& a, const Matrix& b);
Matrix matmul_tn(const Matrix& a, const Matrix& b);
Matrix softmax_rows(const Matrix& logits);
Matrix leaky_relu(const Matrix& m, double slope);
Matrix pairwise_l1(const Matrix& a, const Matrix& b);

}  // namespace serial

void check_slope(double slope);

/// Thread-count control for the parallel kernels; 0 restores the default.
void set_kernel_threads(int threads);

}  // namespace uodr
