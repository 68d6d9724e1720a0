// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "uodr/matrix.hpp"
#include "uodr/rng.hpp"

namespace uodr {

/// Non-negative pairwise distances between source rows and target columns.
/// row_ids / col_ids name the instances in the caller's full index space.
struct CostMatrix {
  Matrix costs;
  std::vector<std::size_t> row_ids;
  std::vector<std::size_t> col_ids;
};

struct MatchedPair {
  std::size_t source = 0;
  std::size_t target = 0;
  double cost = 0.0;
  friend bool operator==(const MatchedPair&, const MatchedPair&) = default;
};

struct MatchedPairs {
  std::vector<MatchedPair> pairs;
  double total_cost = 0.0;
  friend bool operator==(const MatchedPairs&, const MatchedPairs&) = default;
};

/// Disjoint, exhaustive folds per domain; fold sizes differ by at most one.
struct FoldPlan {
  std::vector<std::vector<std::size_t>> source_folds;
  std::vector<std::vector<std::size_t>> target_folds;
};

/// costs(i, j) = ||Fs_i - Ft_j||_1 with identity row/col ids.
CostMatrix l1_cost_matrix(const Matrix& source, const Matrix& target);

/// Minimum-cost assignment of min(rows, cols) pairs on any finite matrix.
/// Returns, for each row, the assigned column or npos. O(n^2 m) shortest
/// augmenting paths with dual potentials; ties go to the lowest column.
std::vector<std::size_t> solve_assignment(const Matrix& costs);

/// Exact minimum-weight matching; pairs are reported in id space and sorted
/// by source id. Throws ValidationError on non-finite or negative costs.
MatchedPairs hungarian(const CostMatrix& c);

FoldPlan partition_folds(std::size_t n_source, std::size_t n_target,
                         std::size_t k, Rng& rng);

/// Solves one assignment per aligned fold pair (fold i with fold i) and
/// returns the union, sorted by source index. Folds run in parallel; the
/// plan is drawn before any parallel work.
MatchedPairs match_domains(const Matrix& source, const Matrix& target,
                           std::size_t k, Rng& rng);

/// `pairs <count> total <cost>` then one `s t cost` line per pair.
void write_pairs(std::ostream& out, const MatchedPairs& m);
MatchedPairs read_pairs(std::istream& in);
void save_pairs(const std::string& path, const MatchedPairs& m);
MatchedPairs load_pairs(const std::string& path);

}  // namespace uodr
