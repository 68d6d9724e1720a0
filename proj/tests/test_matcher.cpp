// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "helpers.hpp"
#include "uodr/error.hpp"
#include "uodr/kernels.hpp"
#include "uodr/matcher.hpp"

using namespace uodr;
using testing::random_matrix;

namespace {

// Exhaustive minimum over all injections of the smaller side into the larger.
double brute_force(const Matrix& c) {
  const bool wide = c.rows() <= c.cols();
  const std::size_t small = wide ? c.rows() : c.cols();
  const std::size_t large = wide ? c.cols() : c.rows();
  std::vector<std::size_t> perm(large);
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (std::size_t i = 0; i < small; ++i) total += wide ? c(i, perm[i]) : c(perm[i], i);
    best = std::min(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

Matrix random_costs(std::size_t r, std::size_t c, Rng& rng, bool integer) {
  Matrix m(r, c);
  for (double& v : m.values()) v = integer ? static_cast<double>(rng.index(5)) : rng.uniform() * 10;
  return m;
}

CostMatrix with_ids(const Matrix& costs) {
  std::vector<std::size_t> rows(costs.rows()), cols(costs.cols());
  std::iota(rows.begin(), rows.end(), 0);
  std::iota(cols.begin(), cols.end(), 0);
  return {costs, rows, cols};
}

void check_valid(const MatchedPairs& m, std::size_t expected_pairs) {
  CHECK(m.pairs.size() == expected_pairs);
  std::set<std::size_t> sources, targets;
  for (const auto& p : m.pairs) {
    sources.insert(p.source);
    targets.insert(p.target);
  }
  CHECK(sources.size() == m.pairs.size());
  CHECK(targets.size() == m.pairs.size());
  CHECK(std::is_sorted(m.pairs.begin(), m.pairs.end(),
                       [](const MatchedPair& a, const MatchedPair& b) { return a.source < b.source; }));
}

}  // namespace

TEST_CASE("hungarian examples") {
  const MatchedPairs m = hungarian(with_ids(Matrix{{4, 1, 3}, {2, 0, 5}, {3, 2, 2}}));
  CHECK(m.total_cost == 5);
  REQUIRE(m.pairs.size() == 3);
  CHECK(m.pairs[0].target == 1);
  CHECK(m.pairs[1].target == 0);
  CHECK(m.pairs[2].target == 2);
  const MatchedPairs one = hungarian(with_ids(Matrix{{7}}));
  CHECK(one.total_cost == 7);
  CHECK(hungarian(with_ids(Matrix(0, 0))).pairs.empty());
}

TEST_CASE("hungarian agrees with exhaustive search") {
  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.index(7);
    const Matrix c = random_costs(n, n, rng, trial % 2 == 0);
    const MatchedPairs m = hungarian(with_ids(c));
    check_valid(m, n);
    CHECK(m.total_cost == doctest::Approx(brute_force(c)).epsilon(1e-12));
  }
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t r = 1 + rng.index(6), c = 1 + rng.index(6);
    const Matrix costs = random_costs(r, c, rng, trial % 2 == 0);
    const MatchedPairs m = hungarian(with_ids(costs));
    check_valid(m, std::min(r, c));
    CHECK(m.total_cost == doctest::Approx(brute_force(costs)).epsilon(1e-12));
  }
}

TEST_CASE("adding a constant to a row leaves the assignment unchanged") {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + rng.index(6);
    Matrix c = random_costs(n, n, rng, false);
    const auto before = solve_assignment(c);
    const std::size_t row = rng.index(n);
    for (std::size_t j = 0; j < n; ++j) c(row, j) += 3.0;
    CHECK(solve_assignment(c) == before);
  }
}

TEST_CASE("hungarian reports pairs in id space") {
  const CostMatrix c{Matrix{{1, 0}, {0, 1}}, {10, 4}, {7, 3}};
  const MatchedPairs m = hungarian(c);
  REQUIRE(m.pairs.size() == 2);
  CHECK(m.pairs[0] == MatchedPair{4, 7, 0});
  CHECK(m.pairs[1] == MatchedPair{10, 3, 0});
}

TEST_CASE("hungarian rejects bad costs") {
  CHECK_THROWS_AS(hungarian(with_ids(Matrix{{1, -1}})), ValidationError);
  CHECK_THROWS_AS(hungarian(CostMatrix{Matrix{{1}}, {0, 1}, {0}}), DimensionError);
}

TEST_CASE("folds are disjoint, exhaustive and balanced") {
  Rng rng(3);
  const FoldPlan plan = partition_folds(23, 17, 5, rng);
  for (const auto* side : {&plan.source_folds, &plan.target_folds}) {
    REQUIRE(side->size() == 5);
    std::vector<std::size_t> all;
    std::size_t lo = SIZE_MAX, hi = 0;
    for (const auto& f : *side) {
      all.insert(all.end(), f.begin(), f.end());
      lo = std::min(lo, f.size());
      hi = std::max(hi, f.size());
    }
    std::sort(all.begin(), all.end());
    CHECK(std::adjacent_find(all.begin(), all.end()) == all.end());
    CHECK(hi - lo <= 1);
    CHECK(all.size() == (side == &plan.source_folds ? 23u : 17u));
  }
  CHECK_THROWS_AS(partition_folds(3, 10, 4, rng), ValidationError);
  CHECK_THROWS_AS(partition_folds(3, 10, 0, rng), ValidationError);
}

TEST_CASE("divide and conquer matching") {
  Rng rng(4);
  const Matrix s = random_matrix(40, 4, rng);
  const Matrix t = random_matrix(33, 4, rng);
  Rng a(9), b(9);
  const MatchedPairs m = match_domains(s, t, 5, a);
  check_valid(m, 33);
  CHECK(m == match_domains(s, t, 5, b));
  // A single fold is the global optimum, which no fold split can beat.
  Rng c(9);
  const MatchedPairs global = match_domains(s, t, 1, c);
  CHECK(global.total_cost <= m.total_cost + 1e-9);
  CHECK(global.total_cost ==
        doctest::Approx(hungarian(l1_cost_matrix(s, t)).total_cost).epsilon(1e-12));
  for (const auto& p : m.pairs) {
    double d = 0.0;
    for (std::size_t j = 0; j < 4; ++j) d += std::abs(s(p.source, j) - t(p.target, j));
    CHECK(p.cost == doctest::Approx(d).epsilon(1e-12));
  }
}

TEST_CASE("matching is identical across thread counts") {
  Rng rng(5);
  const Matrix s = random_matrix(60, 3, rng);
  const Matrix t = random_matrix(60, 3, rng);
  set_kernel_threads(1);
  Rng a(2);
  const MatchedPairs one = match_domains(s, t, 4, a);
  set_kernel_threads(4);
  Rng b(2);
  const MatchedPairs four = match_domains(s, t, 4, b);
  set_kernel_threads(0);
  CHECK(one == four);
}

TEST_CASE("identical domains match to themselves") {
  Rng rng(6);
  const Matrix s = random_matrix(12, 5, rng);
  Rng r(1);
  const MatchedPairs m = match_domains(s, s, 1, r);
  CHECK(m.total_cost == 0.0);
  for (const auto& p : m.pairs) CHECK(p.source == p.target);
}

TEST_CASE("pairs file round-trip") {
  Rng rng(7);
  Rng r(3);
  const MatchedPairs m = match_domains(random_matrix(9, 2, rng), random_matrix(11, 2, rng), 2, r);
  std::stringstream ss;
  write_pairs(ss, m);
  CHECK(read_pairs(ss) == m);
  std::istringstream truncated("pairs 2 total 1\n0 0 1\n");
  CHECK_THROWS_AS(read_pairs(truncated), ParseError);
  std::istringstream bad("pears 0 total 0\n");
  CHECK_THROWS_AS(read_pairs(bad), ParseError);
  CHECK_THROWS_AS(load_pairs("/nonexistent/pairs.txt"), IoError);
  testing::TempDir dir("pairs");
  save_pairs(dir.file("p.txt"), m);
  CHECK(load_pairs(dir.file("p.txt")) == m);
}
