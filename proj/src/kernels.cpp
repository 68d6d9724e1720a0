// SPDX-License-Identifier: Apache-2.0
#include "uodr/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "uodr/error.hpp"

namespace uodr {
namespace {

// Below this many multiply-adds the fork/join overhead dominates.
constexpr std::size_t kParallelWork = 1u << 15;

std::string shape(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void require(bool ok, const char* op, const Matrix& a, const Matrix& b) {
  if (!ok) {
    throw DimensionError(std::string(op) + ": incompatible shapes " + shape(a) +
                         " and " + shape(b));
  }
}

bool parallel_worthwhile(std::size_t work) { return work >= kParallelWork; }

}  // namespace

void set_kernel_threads(int threads) {
  omp_set_num_threads(threads > 0 ? threads : omp_get_num_procs());
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.rows(), "matmul", a, b);
  const std::size_t p = a.rows(), q = a.cols(), r = b.cols();
  std::vector<double> out(p * r, 0.0);
  const double* A = a.data();
  const double* B = b.data();
  double* C = out.data();
  const auto rows = static_cast<std::ptrdiff_t>(p);
#pragma omp parallel for schedule(static) if (parallel_worthwhile(p * q * r))
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    double* c_row = C + i * r;
    for (std::size_t k = 0; k < q; ++k) {
      const double aik = A[i * q + k];
      const double* b_row = B + k * r;
      for (std::size_t j = 0; j < r; ++j) c_row[j] += aik * b_row[j];
    }
  }
  return Matrix::adopt(p, r, std::move(out));
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.cols(), "matmul_nt", a, b);
  const std::size_t p = a.rows(), q = a.cols(), r = b.rows();
  std::vector<double> out(p * r, 0.0);
  const double* A = a.data();
  const double* B = b.data();
  double* C = out.data();
  const auto rows = static_cast<std::ptrdiff_t>(p);
#pragma omp parallel for schedule(static) if (parallel_worthwhile(p * q * r))
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    const double* a_row = A + i * q;
    for (std::size_t j = 0; j < r; ++j) {
      const double* b_row = B + j * q;
      double acc = 0.0;
      for (std::size_t k = 0; k < q; ++k) acc += a_row[k] * b_row[k];
      C[i * r + j] = acc;
    }
  }
  return Matrix::adopt(p, r, std::move(out));
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  require(a.rows() == b.rows(), "matmul_tn", a, b);
  const std::size_t p = a.cols(), q = a.rows(), r = b.cols();
  std::vector<double> out(p * r, 0.0);
  const double* A = a.data();
  const double* B = b.data();
  double* C = out.data();
  const auto rows = static_cast<std::ptrdiff_t>(p);
#pragma omp parallel for schedule(static) if (parallel_worthwhile(p * q * r))
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    double* c_row = C + i * r;
    for (std::size_t k = 0; k < q; ++k) {
      const double aki = A[k * p + i];
      const double* b_row = B + k * r;
      for (std::size_t j = 0; j < r; ++j) c_row[j] += aki * b_row[j];
    }
  }
  return Matrix::adopt(p, r, std::move(out));
}

Matrix softmax_rows(const Matrix& logits) {
  const std::size_t n = logits.rows(), m = logits.cols();
  std::vector<double> out(n * m);
  const double* Z = logits.data();
  double* P = out.data();
  const auto rows = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static) if (parallel_worthwhile(n * m * 16))
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    const double* z = Z + i * m;
    double* p = P + i * m;
    double mx = -INFINITY;
    for (std::size_t j = 0; j < m; ++j) mx = std::max(mx, z[j]);
    double total = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      p[j] = std::exp(z[j] - mx);
      total += p[j];
    }
    for (std::size_t j = 0; j < m; ++j) p[j] /= total;
  }
  return Matrix::adopt(n, m, std::move(out));
}

Matrix softmax_rows_backward(const Matrix& probs, const Matrix& grad_probs) {
  require(probs.same_shape(grad_probs), "softmax_rows_backward", probs,
          grad_probs);
  Matrix out(probs.rows(), probs.cols());
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    auto p = probs.row(i);
    auto g = grad_probs.row(i);
    double dot = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) dot += p[j] * g[j];
    auto o = out.row(i);
    for (std::size_t j = 0; j < p.size(); ++j) o[j] = p[j] * (g[j] - dot);
  }
  return out;
}

void check_slope(double slope) {
  if (!(slope >= 0.0 && slope <= 1.0)) {
    throw ValidationError("leaky_relu: slope must lie in [0, 1]");
  }
}

Matrix leaky_relu(const Matrix& m, double slope) {
  check_slope(slope);
  std::vector<double> out(m.size());
  const double* x = m.data();
  const auto count = static_cast<std::ptrdiff_t>(m.size());
#pragma omp parallel for schedule(static) if (parallel_worthwhile(m.size() * 4))
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    out[i] = x[i] > 0.0 ? x[i] : slope * x[i];
  }
  return Matrix::adopt(m.rows(), m.cols(), std::move(out));
}

Matrix leaky_relu_derivative(const Matrix& pre_activation, double slope) {
  check_slope(slope);
  Matrix out(pre_activation.rows(), pre_activation.cols());
  auto src = pre_activation.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] > 0.0 ? 1.0 : slope;
  return out;
}

Matrix pairwise_l1(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.cols(), "pairwise_l1", a, b);
  const std::size_t n = a.rows(), m = b.rows(), d = a.cols();
  std::vector<double> out(n * m);
  const double* A = a.data();
  const double* B = b.data();
  const auto rows = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static) if (parallel_worthwhile(n * m * d))
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < d; ++k) acc += std::abs(A[i * d + k] - B[j * d + k]);
      out[i * m + j] = acc;
    }
  }
  return Matrix::adopt(n, m, std::move(out));
}

Matrix transpose(const Matrix& m) {
  Matrix out(m.cols(), m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out(j, i) = m(i, j);
  return out;
}

Matrix gather_rows(const Matrix& m, std::span<const std::size_t> indices) {
  std::vector<double> out;
  out.reserve(indices.size() * m.cols());
  for (std::size_t idx : indices) {
    if (idx >= m.rows()) {
      throw DimensionError("gather_rows: index " + std::to_string(idx) +
                           " out of range for " + shape(m));
    }
    auto r = m.row(idx);
    out.insert(out.end(), r.begin(), r.end());
  }
  return Matrix::adopt(indices.size(), m.cols(), std::move(out));
}

namespace {

template <typename Op>
Matrix zip(const char* name, const Matrix& a, const Matrix& b, Op op) {
  require(a.same_shape(b), name, a, b);
  std::vector<double> out(a.size());
  auto x = a.values();
  auto y = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = op(x[i], y[i]);
  return Matrix::adopt(a.rows(), a.cols(), std::move(out));
}

}  // namespace

Matrix add(const Matrix& a, const Matrix& b) {
  return zip("add", a, b, [](double x, double y) { return x + y; });
}
Matrix subtract(const Matrix& a, const Matrix& b) {
  return zip("subtract", a, b, [](double x, double y) { return x - y; });
}
Matrix hadamard(const Matrix& a, const Matrix& b) {
  return zip("hadamard", a, b, [](double x, double y) { return x * y; });
}

Matrix scale(const Matrix& m, double s) {
  std::vector<double> out(m.values().begin(), m.values().end());
  for (double& v : out) v *= s;
  return Matrix::adopt(m.rows(), m.cols(), std::move(out));
}

void axpy(double alpha, const Matrix& x, Matrix& y) {
  require(x.same_shape(y), "axpy", x, y);
  auto xs = x.values();
  auto ys = y.values();
  for (std::size_t i = 0; i < ys.size(); ++i) ys[i] += alpha * xs[i];
}

Matrix add_row_vector(const Matrix& m, const Matrix& row) {
  require(row.rows() == 1 && row.cols() == m.cols(), "add_row_vector", m, row);
  Matrix out = m;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = out.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] += row(0, j);
  }
  return out;
}

Matrix column_sums(const Matrix& m) {
  Matrix out(1, m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out(0, j) += m(i, j);
  return out;
}

double sum(const Matrix& m) {
  double s = 0.0;
  for (double v : m.values()) s += v;
  return s;
}

double sum_squares(const Matrix& m) {
  double s = 0.0;
  for (double v : m.values()) s += v * v;
  return s;
}

double max_abs(const Matrix& m) {
  double s = 0.0;
  for (double v : m.values()) s = std::max(s, std::abs(v));
  return s;
}

namespace serial {

Matrix matmul(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.rows(), "matmul", a, b);
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) acc += a(i, k) * b(k, j);
      out(i, j) = acc;
    }
  }
  return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.cols(), "matmul_nt", a, b);
  Matrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.rows(); ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) acc += a(i, k) * b(j, k);
      out(i, j) = acc;
    }
  }
  return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  require(a.rows() == b.rows(), "matmul_tn", a, b);
  Matrix out(a.cols(), b.cols());
  for (std::size_t i = 0; i < a.cols(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < a.rows(); ++k) acc += a(k, i) * b(k, j);
      out(i, j) = acc;
    }
  }
  return out;
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    double mx = -INFINITY;
    for (std::size_t j = 0; j < logits.cols(); ++j) mx = std::max(mx, logits(i, j));
    double total = 0.0;
    for (std::size_t j = 0; j < logits.cols(); ++j) {
      out(i, j) = std::exp(logits(i, j) - mx);
      total += out(i, j);
    }
    for (std::size_t j = 0; j < logits.cols(); ++j) out(i, j) /= total;
  }
  return out;
}

Matrix leaky_relu(const Matrix& m, double slope) {
  check_slope(slope);
  Matrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j)
      out(i, j) = std::max(m(i, j), slope * m(i, j));
  return out;
}

Matrix pairwise_l1(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.cols(), "pairwise_l1", a, b);
  Matrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.rows(); ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) acc += std::abs(a(i, k) - b(j, k));
      out(i, j) = acc;
    }
  }
  return out;
}

}  // namespace serial
}  // namespace uodr
