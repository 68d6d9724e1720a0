// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "uodr/matrix.hpp"

namespace uodr {

using Edge = std::pair<std::size_t, std::size_t>;

/// Class taxonomy over all target categories plus auxiliary ancestor nodes.
///
/// Immutable once built. Every node carries an implicit self-loop; `edges()`
/// holds only the off-diagonal undirected edges, normalized to (lo, hi) and
/// sorted. Classes 0..known-1 are the source (known) categories.
class KnowledgeGraph {
 public:
  /// Validates and builds. Self-loop edges (i, i) are accepted and dropped;
  /// duplicate off-diagonal edges, out-of-range indices and a non-injective
  /// class map throw ValidationError.
  static KnowledgeGraph create(std::vector<std::string> node_names,
                               std::vector<Edge> edges,
                               std::vector<std::size_t> class_to_node,
                               std::size_t known_class_count);

  std::size_t num_nodes() const noexcept { return names_.size(); }
  const std::vector<std::string>& node_names() const noexcept { return names_; }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  const std::vector<std::size_t>& class_to_node() const noexcept {
    return class_to_node_;
  }
  std::size_t known_class_count() const noexcept { return known_; }
  std::size_t total_class_count() const noexcept { return class_to_node_.size(); }

  /// Node indices of the known classes, in class order.
  std::vector<std::size_t> known_nodes() const;

  /// Symmetric 0/1 adjacency with ones on the diagonal.
  Matrix adjacency() const;

  /// Neighbor lists including the node itself.
  std::vector<std::vector<std::size_t>> neighbors() const;

  friend bool operator==(const KnowledgeGraph&, const KnowledgeGraph&) = default;

 private:
  std::vector<std::string> names_;
  std::vector<Edge> edges_;
  std::vector<std::size_t> class_to_node_;
  std::size_t known_ = 0;
};

/// D^-1 A with D_ii = sum_j A_ij (row-stochastic).
Matrix normalized_adjacency(const KnowledgeGraph& g);

struct ReachabilityReport {
  std::vector<std::size_t> unreachable_classes;
  std::vector<std::size_t> unreachable_nodes;
  bool all_reachable() const noexcept { return unreachable_classes.empty(); }
};

/// BFS from every known-class node; lists the unknown classes it never reaches.
ReachabilityReport check_reachability(const KnowledgeGraph& g);

/// Edge-list text format:
///   nodes N known L_S classes L_T
///   node <index> <name>
///   class <class_index> <node_index>
///   edge <i> <j>
/// '#' starts a comment line.
KnowledgeGraph read_graph(std::istream& in);
void write_graph(std::ostream& out, const KnowledgeGraph& g);
KnowledgeGraph load_graph(const std::string& path);
void save_graph(const std::string& path, const KnowledgeGraph& g);

}  // namespace uodr
