// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "helpers.hpp"
#include "uodr/error.hpp"
#include "uodr/gradcheck.hpp"
#include "uodr/kernels.hpp"
#include "uodr/matrix.hpp"
#include "uodr/rng.hpp"

using namespace uodr;
using testing::random_matrix;

TEST_CASE("matrix construction enforces shape and finiteness") {
  CHECK_THROWS_AS(Matrix(2, 2, std::vector<double>{1, 2, 3}), DimensionError);
  CHECK_THROWS_AS(Matrix(1, 2, std::vector<double>{1, NAN}), ValidationError);
  CHECK_THROWS_AS(Matrix(1, 1, INFINITY), ValidationError);
  CHECK_THROWS_AS((Matrix{{1, 2}, {3}}), DimensionError);
  const Matrix m{{1, 2}, {3, 4}};
  CHECK(m.rows() == 2);
  CHECK(m(1, 0) == 3);
  CHECK(Matrix::identity(2) == Matrix{{1, 0}, {0, 1}});
}

TEST_CASE("matrix text round-trip is lossless") {
  Rng rng(5);
  Matrix m = random_matrix(4, 3, rng);
  m(0, 0) = 0.1;
  m(1, 1) = -1e-300;
  m(2, 2) = 1.0 / 3.0;
  std::stringstream ss;
  write_matrix(ss, m);
  CHECK(read_matrix(ss) == m);
}

TEST_CASE("matrix reader rejects malformed text") {
  std::istringstream missing_row("2 2\n1 2\n");
  CHECK_THROWS_AS(read_matrix(missing_row), ParseError);
  std::istringstream short_row("2 2\n1 2\n3\n");
  CHECK_THROWS_AS(read_matrix(short_row), ParseError);
  std::istringstream bad_header("two 2\n");
  CHECK_THROWS_AS(read_matrix(bad_header), ParseError);
  CHECK_THROWS_AS(load_matrix("/nonexistent/dir/m.txt"), IoError);
}

TEST_CASE("matmul examples") {
  CHECK(matmul(Matrix{{1, 2}, {3, 4}}, Matrix{{0}, {1}}) == Matrix{{2}, {4}});
  Rng rng(1);
  const Matrix m = random_matrix(3, 4, rng);
  CHECK(matmul(Matrix::identity(3), m) == m);
  CHECK_THROWS_AS(matmul(Matrix(2, 3), Matrix(2, 3)), DimensionError);
  CHECK_THROWS_AS(matmul_nt(Matrix(2, 3), Matrix(2, 4)), DimensionError);
  CHECK_THROWS_AS(matmul_tn(Matrix(2, 3), Matrix(3, 3)), DimensionError);
}

TEST_CASE("transposed products agree with explicit transposes") {
  Rng rng(2);
  const Matrix a = random_matrix(5, 3, rng);
  const Matrix b = random_matrix(4, 3, rng);
  const Matrix c = random_matrix(5, 2, rng);
  CHECK(matmul_nt(a, b) == matmul(a, transpose(b)));
  CHECK(matmul_tn(a, c) == matmul(transpose(a), c));
}

TEST_CASE("matmul is associative within 1e-9") {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix a = random_matrix(1 + rng.index(5), 1 + rng.index(5), rng);
    const Matrix b = random_matrix(a.cols(), 1 + rng.index(5), rng);
    const Matrix c = random_matrix(b.cols(), 1 + rng.index(5), rng);
    const Matrix lhs = matmul(matmul(a, b), c);
    const Matrix rhs = matmul(a, matmul(b, c));
    CHECK(max_abs(subtract(lhs, rhs)) <= 1e-9);
  }
}

TEST_CASE("softmax examples") {
  const Matrix p = softmax_rows(Matrix{{0.0, std::log(3.0)}, {2.0, 2.0}});
  CHECK(p(0, 0) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(p(0, 1) == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(p(1, 0) == 0.5);
  const Matrix big = softmax_rows(Matrix{{1000.0, 0.0, 0.0}});
  CHECK(big.all_finite());
  CHECK(std::abs(big(0, 0) - 1.0) <= 1e-12);
  CHECK(big(0, 1) <= 1e-12);
}

TEST_CASE("softmax rows sum to one") {
  Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const Matrix p = softmax_rows(random_matrix(3, 1 + rng.index(10), rng, 20.0));
    for (std::size_t r = 0; r < p.rows(); ++r) {
      double s = 0.0;
      for (double v : p.row(r)) {
        CHECK(v > 0.0);
        CHECK(v <= 1.0);
        s += v;
      }
      CHECK(std::abs(s - 1.0) <= 1e-12);
    }
  }
}

TEST_CASE("softmax backward matches finite differences") {
  Rng rng(6);
  const Matrix z = random_matrix(3, 5, rng);
  const Matrix weights = random_matrix(3, 5, rng);
  auto f = [&](const Matrix& logits) { return sum(hadamard(softmax_rows(logits), weights)); };
  const Matrix analytic = softmax_rows_backward(softmax_rows(z), weights);
  CHECK(grad_check(f, z, analytic) <= 1e-7);
}

TEST_CASE("leaky relu examples") {
  CHECK(leaky_relu(Matrix{{-1, -3}}, 0.0) == Matrix{{0, 0}});
  CHECK(leaky_relu(Matrix{{-2}}, 0.2)(0, 0) == doctest::Approx(-0.4).epsilon(1e-15));
  CHECK(leaky_relu(Matrix{{3}}, 0.2)(0, 0) == 3.0);
  const Matrix d = leaky_relu_derivative(Matrix{{2, -2, 0}}, 0.2);
  CHECK(d == Matrix{{1, 0.2, 0.2}});
  CHECK_THROWS_AS(leaky_relu(Matrix{{1}}, -0.1), ValidationError);
  CHECK_THROWS_AS(leaky_relu(Matrix{{1}}, 1.5), ValidationError);
}

TEST_CASE("parallel kernels equal serial references bit for bit") {
  Rng rng(7);
  // Large enough to cross the parallel threshold.
  const Matrix a = random_matrix(96, 80, rng);
  const Matrix b = random_matrix(80, 72, rng);
  const Matrix bt = random_matrix(72, 80, rng);
  const Matrix c = random_matrix(96, 72, rng);
  for (int threads : {1, 2, 4}) {
    set_kernel_threads(threads);
    CHECK(matmul(a, b) == serial::matmul(a, b));
    CHECK(matmul_nt(a, bt) == serial::matmul_nt(a, bt));
    CHECK(matmul_tn(a, c) == serial::matmul_tn(a, c));
    CHECK(softmax_rows(c) == serial::softmax_rows(c));
    CHECK(leaky_relu(c, 0.2) == serial::leaky_relu(c, 0.2));
  }
  const Matrix s = random_matrix(300, 16, rng);
  const Matrix t = random_matrix(280, 16, rng);
  set_kernel_threads(4);
  CHECK(pairwise_l1(s, t) == serial::pairwise_l1(s, t));
  set_kernel_threads(0);
}

TEST_CASE("pairwise l1 example") {
  const Matrix d = pairwise_l1(Matrix{{0, 0}, {1, 1}}, Matrix{{1, 2}, {0, 0}, {-1, 0}});
  CHECK(d == Matrix{{3, 0, 1}, {1, 2, 3}});
}

TEST_CASE("rng streams are reproducible") {
  Rng a(42), b(42);
  for (int i = 0; i < 10000; ++i) REQUIRE(a.next_u64() == b.next_u64());
  // The engine is the standard mt19937_64; its reference 10000th output for
  // the default seed 5489 pins the algorithm.
  Rng ref(5489);
  std::uint64_t last = 0;
  for (int i = 0; i < 10000; ++i) last = ref.next_u64();
  CHECK(last == 9981545732273789042ULL);
}

TEST_CASE("derived streams are distinct and deterministic") {
  const Rng root(9);
  Rng s1 = root.derive(1), s1b = root.derive(1), s2 = root.derive(2);
  const auto x = s1.next_u64();
  CHECK(x == s1b.next_u64());
  CHECK(x != s2.next_u64());
  CHECK(Rng(9).derive(1).seed() == root.derive(1).seed());
}

TEST_CASE("rng conversions stay in range") {
  Rng rng(11);
  double mean = 0.0, sq = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    const double z = rng.normal();
    mean += z / n;
    sq += z * z / n;
    CHECK(rng.index(7) < 7);
  }
  CHECK(std::abs(mean) < 0.05);
  CHECK(std::abs(sq - 1.0) < 0.05);
  auto p = rng.permutation(50);
  std::sort(p.begin(), p.end());
  for (std::size_t i = 0; i < p.size(); ++i) CHECK(p[i] == i);
}

TEST_CASE("grad_check examples") {
  Rng rng(12);
  const Matrix x = random_matrix(3, 4, rng);
  auto half_sq = [](const Matrix& m) { return 0.5 * sum_squares(m); };
  CHECK(grad_check(half_sq, x, x) <= 1e-7);
  auto total = [](const Matrix& m) { return sum(m); };
  // For a linear f only roundoff remains, about ulp(f) / eps, so the point
  // is kept small in magnitude.
  const Matrix small = random_matrix(3, 4, rng, 0.01);
  CHECK(grad_check(total, small, Matrix(3, 4, 1.0)) <= 1e-10);
  CHECK(grad_check(half_sq, x, scale(x, 2.0)) == doctest::Approx(0.5).epsilon(1e-6));
  CHECK_THROWS_AS(grad_check(total, x, x, 0.0), ValidationError);
}

TEST_CASE("elementwise helpers") {
  const Matrix a{{1, -2}, {3, 4}};
  CHECK(column_sums(a) == Matrix{{4, 2}});
  CHECK(add_row_vector(a, Matrix{{1, 1}}) == Matrix{{2, -1}, {4, 5}});
  CHECK(sum(a) == 6);
  CHECK(sum_squares(a) == 30);
  CHECK(max_abs(a) == 4);
  const std::vector<std::size_t> idx{1, 1, 0};
  CHECK(gather_rows(a, idx) == Matrix{{3, 4}, {3, 4}, {1, -2}});
  Matrix y{{1, 1}, {1, 1}};
  axpy(2.0, a, y);
  CHECK(y == Matrix{{3, -3}, {7, 9}});
  CHECK_THROWS_AS(add(a, Matrix(1, 2)), DimensionError);
}
