// SPDX-License-Identifier: Apache-2.0
#include "uodr/matcher.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include "uodr/error.hpp"
#include "uodr/kernels.hpp"

namespace uodr {
namespace {

constexpr std::size_t npos = static_cast<std::size_t>(-1);

std::vector<std::size_t> iota_ids(std::size_t n) {
  std::vector<std::size_t> ids(n);
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  return ids;
}

// Requires rows <= cols. Returns the column matched to each row.
std::vector<std::size_t> solve_wide(const Matrix& a) {
  const std::size_t n = a.rows();
  const std::size_t m = a.cols();
  const double inf = std::numeric_limits<double>::infinity();
  // 1-based; column 0 is the virtual root of each augmenting tree.
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> owner(m + 1, 0), way(m + 1, 0);
  std::vector<double> min_slack(m + 1);
  std::vector<char> used(m + 1);

  for (std::size_t i = 1; i <= n; ++i) {
    owner[0] = i;
    std::size_t j0 = 0;
    std::fill(min_slack.begin(), min_slack.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = owner[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double slack = a(i0 - 1, j - 1) - u[i0] - v[j];
        if (slack < min_slack[j]) {
          min_slack[j] = slack;
          way[j] = j0;
        }
        if (min_slack[j] < delta) {
          delta = min_slack[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[owner[j]] += delta;
          v[j] -= delta;
        } else {
          min_slack[j] -= delta;
        }
      }
      j0 = j1;
    } while (owner[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      owner[j0] = owner[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<std::size_t> row_to_col(n, npos);
  for (std::size_t j = 1; j <= m; ++j) {
    if (owner[j] != 0) row_to_col[owner[j] - 1] = j - 1;
  }
  return row_to_col;
}

}  // namespace

CostMatrix l1_cost_matrix(const Matrix& source, const Matrix& target) {
  if (source.cols() != target.cols()) {
    throw DimensionError("l1_cost_matrix: feature dimensions " +
                         std::to_string(source.cols()) + " and " +
                         std::to_string(target.cols()) + " differ");
  }
  return {pairwise_l1(source, target), iota_ids(source.rows()),
          iota_ids(target.rows())};
}

std::vector<std::size_t> solve_assignment(const Matrix& costs) {
  if (!costs.all_finite()) throw ValidationError("assignment: non-finite cost");
  if (costs.rows() == 0 || costs.cols() == 0) {
    return std::vector<std::size_t>(costs.rows(), npos);
  }
  if (costs.rows() <= costs.cols()) return solve_wide(costs);
  const std::vector<std::size_t> col_to_row = solve_wide(transpose(costs));
  std::vector<std::size_t> row_to_col(costs.rows(), npos);
  for (std::size_t j = 0; j < col_to_row.size(); ++j) row_to_col[col_to_row[j]] = j;
  return row_to_col;
}

MatchedPairs hungarian(const CostMatrix& c) {
  if (c.row_ids.size() != c.costs.rows() || c.col_ids.size() != c.costs.cols()) {
    throw DimensionError("hungarian: id lists do not match cost matrix shape");
  }
  for (double v : c.costs.values()) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw ValidationError("hungarian: costs must be finite and non-negative");
    }
  }
  const auto assignment = solve_assignment(c.costs);
  MatchedPairs out;
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    if (assignment[i] == npos) continue;
    const double cost = c.costs(i, assignment[i]);
    out.pairs.push_back({c.row_ids[i], c.col_ids[assignment[i]], cost});
  }
  std::sort(out.pairs.begin(), out.pairs.end(),
            [](const MatchedPair& a, const MatchedPair& b) { return a.source < b.source; });
  for (const auto& p : out.pairs) out.total_cost += p.cost;
  return out;
}

FoldPlan partition_folds(std::size_t n_source, std::size_t n_target,
                         std::size_t k, Rng& rng) {
  if (k < 1 || k > std::min(n_source, n_target)) {
    throw ValidationError("partition_folds: fold count " + std::to_string(k) +
                          " must lie in [1, " +
                          std::to_string(std::min(n_source, n_target)) + "]");
  }
  auto slice = [&](std::size_t n) {
    const auto perm = rng.permutation(n);
    std::vector<std::vector<std::size_t>> folds(k);
    std::size_t pos = 0;
    for (std::size_t f = 0; f < k; ++f) {
      const std::size_t len = n / k + (f < n % k ? 1 : 0);
      folds[f].assign(perm.begin() + pos, perm.begin() + pos + len);
      std::sort(folds[f].begin(), folds[f].end());
      pos += len;
    }
    return folds;
  };
  FoldPlan plan;
  plan.source_folds = slice(n_source);
  plan.target_folds = slice(n_target);
  return plan;
}

MatchedPairs match_domains(const Matrix& source, const Matrix& target,
                           std::size_t k, Rng& rng) {
  if (source.cols() != target.cols()) {
    throw DimensionError("match_domains: feature dimensions differ");
  }
  // Nothing may throw inside the parallel region.
  if (!source.all_finite() || !target.all_finite()) {
    throw ValidationError("match_domains: features contain non-finite values");
  }
  const FoldPlan plan = partition_folds(source.rows(), target.rows(), k, rng);
  std::vector<MatchedPairs> per_fold(k);
  const auto folds = static_cast<std::ptrdiff_t>(k);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t f = 0; f < folds; ++f) {
    const auto& rows = plan.source_folds[f];
    const auto& cols = plan.target_folds[f];
    CostMatrix c{pairwise_l1(gather_rows(source, rows), gather_rows(target, cols)),
                 rows, cols};
    per_fold[f] = hungarian(c);
  }
  MatchedPairs out;
  for (const auto& fold : per_fold) {
    out.pairs.insert(out.pairs.end(), fold.pairs.begin(), fold.pairs.end());
    out.total_cost += fold.total_cost;
  }
  std::sort(out.pairs.begin(), out.pairs.end(),
            [](const MatchedPair& a, const MatchedPair& b) { return a.source < b.source; });
  return out;
}

void write_pairs(std::ostream& out, const MatchedPairs& m) {
  out << "pairs " << m.pairs.size() << " total " << format_double(m.total_cost) << '\n';
  for (const auto& p : m.pairs) {
    out << p.source << ' ' << p.target << ' ' << format_double(p.cost) << '\n';
  }
}

MatchedPairs read_pairs(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("pairs: missing header");
  std::istringstream header(line);
  std::string k1, k2;
  long long count = -1;
  MatchedPairs m;
  if (!(header >> k1 >> count >> k2 >> m.total_cost) || k1 != "pairs" ||
      k2 != "total" || count < 0) {
    throw ParseError("pairs: header must be `pairs <count> total <cost>`");
  }
  for (long long i = 0; i < count; ++i) {
    if (!std::getline(in, line)) throw ParseError("pairs: truncated after " + std::to_string(i));
    std::istringstream ls(line);
    long long s = -1, t = -1;
    double cost = 0;
    if (!(ls >> s >> t >> cost) || s < 0 || t < 0) {
      throw ParseError("pairs: malformed line " + std::to_string(i + 2));
    }
    m.pairs.push_back({static_cast<std::size_t>(s), static_cast<std::size_t>(t), cost});
  }
  return m;
}

void save_pairs(const std::string& path, const MatchedPairs& m) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  write_pairs(out, m);
}

MatchedPairs load_pairs(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  return read_pairs(in);
}

}  // namespace uodr
