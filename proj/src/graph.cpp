// SPDX-License-Identifier: Apache-2.0
#include "uodr/graph.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>

#include "uodr/error.hpp"

namespace uodr {

KnowledgeGraph KnowledgeGraph::create(std::vector<std::string> node_names,
                                      std::vector<Edge> edges,
                                      std::vector<std::size_t> class_to_node,
                                      std::size_t known_class_count) {
  const std::size_t n = node_names.size();
  const std::size_t total = class_to_node.size();
  if (!(known_class_count < total)) {
    throw ValidationError("graph: need known classes < total classes, got " +
                          std::to_string(known_class_count) + " and " +
                          std::to_string(total));
  }
  if (total > n) {
    throw ValidationError("graph: more classes (" + std::to_string(total) +
                          ") than nodes (" + std::to_string(n) + ")");
  }

  std::vector<bool> mapped(n, false);
  for (std::size_t c = 0; c < total; ++c) {
    const std::size_t node = class_to_node[c];
    if (node >= n) {
      throw ValidationError("graph: class " + std::to_string(c) +
                            " maps to out-of-range node " + std::to_string(node));
    }
    if (mapped[node]) {
      throw ValidationError("graph: node " + std::to_string(node) +
                            " is mapped by more than one class");
    }
    mapped[node] = true;
  }

  std::set<Edge> unique;
  for (auto [a, b] : edges) {
    if (a >= n || b >= n) {
      throw ValidationError("graph: edge (" + std::to_string(a) + ", " +
                            std::to_string(b) + ") out of range");
    }
    if (a == b) continue;
    Edge e{std::min(a, b), std::max(a, b)};
    if (!unique.insert(e).second) {
      throw ValidationError("graph: duplicate edge (" + std::to_string(e.first) +
                            ", " + std::to_string(e.second) + ")");
    }
  }

  KnowledgeGraph g;
  g.names_ = std::move(node_names);
  g.edges_.assign(unique.begin(), unique.end());
  g.class_to_node_ = std::move(class_to_node);
  g.known_ = known_class_count;
  return g;
}

std::vector<std::size_t> KnowledgeGraph::known_nodes() const {
  return {class_to_node_.begin(), class_to_node_.begin() + known_};
}

Matrix KnowledgeGraph::adjacency() const {
  Matrix a = Matrix::identity(num_nodes());
  for (auto [i, j] : edges_) {
    a(i, j) = 1.0;
    a(j, i) = 1.0;
  }
  return a;
}

std::vector<std::vector<std::size_t>> KnowledgeGraph::neighbors() const {
  std::vector<std::vector<std::size_t>> adj(num_nodes());
  for (std::size_t i = 0; i < num_nodes(); ++i) adj[i].push_back(i);
  for (auto [i, j] : edges_) {
    adj[i].push_back(j);
    adj[j].push_back(i);
  }
  for (auto& list : adj) std::sort(list.begin(), list.end());
  return adj;
}

Matrix normalized_adjacency(const KnowledgeGraph& g) {
  Matrix p = g.adjacency();
  for (std::size_t i = 0; i < p.rows(); ++i) {
    auto row = p.row(i);
    double degree = 0.0;
    for (double v : row) degree += v;
    for (double& v : row) v /= degree;
  }
  return p;
}

ReachabilityReport check_reachability(const KnowledgeGraph& g) {
  const auto adj = g.neighbors();
  std::vector<bool> seen(g.num_nodes(), false);
  std::deque<std::size_t> frontier;
  for (std::size_t node : g.known_nodes()) {
    seen[node] = true;
    frontier.push_back(node);
  }
  while (!frontier.empty()) {
    const std::size_t u = frontier.front();
    frontier.pop_front();
    for (std::size_t v : adj[u]) {
      if (!seen[v]) {
        seen[v] = true;
        frontier.push_back(v);
      }
    }
  }
  ReachabilityReport report;
  const auto& map = g.class_to_node();
  for (std::size_t c = g.known_class_count(); c < map.size(); ++c) {
    if (!seen[map[c]]) {
      report.unreachable_classes.push_back(c);
      report.unreachable_nodes.push_back(map[c]);
    }
  }
  return report;
}

namespace {

[[noreturn]] void parse_fail(std::size_t line_no, const std::string& msg) {
  throw ParseError("graph line " + std::to_string(line_no) + ": " + msg);
}

std::size_t read_index(std::istringstream& ls, std::size_t line_no,
                       const char* what) {
  long long v = -1;
  if (!(ls >> v) || v < 0) parse_fail(line_no, std::string("expected ") + what);
  return static_cast<std::size_t>(v);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

KnowledgeGraph read_graph(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  std::optional<std::size_t> n, known, total;
  std::vector<std::optional<std::string>> names;
  std::vector<std::optional<std::size_t>> classes;
  std::vector<Edge> edges;

  while (std::getline(in, line)) {
    ++line_no;
    const std::string body = trim(line);
    if (body.empty() || body[0] == '#') continue;
    std::istringstream ls(body);
    std::string keyword;
    ls >> keyword;
    if (!n) {
      std::string k1, k2;
      if (keyword != "nodes") parse_fail(line_no, "expected header `nodes N known L_S classes L_T`");
      n = read_index(ls, line_no, "node count");
      if (!(ls >> k1) || k1 != "known") parse_fail(line_no, "expected `known`");
      known = read_index(ls, line_no, "known class count");
      if (!(ls >> k2) || k2 != "classes") parse_fail(line_no, "expected `classes`");
      total = read_index(ls, line_no, "class count");
      names.resize(*n);
      classes.resize(*total);
    } else if (keyword == "node") {
      const std::size_t idx = read_index(ls, line_no, "node index");
      if (idx >= *n) parse_fail(line_no, "node index out of range");
      std::string rest;
      std::getline(ls, rest);
      rest = trim(rest);
      if (rest.empty()) parse_fail(line_no, "node needs a name");
      if (names[idx]) parse_fail(line_no, "node " + std::to_string(idx) + " declared twice");
      names[idx] = rest;
    } else if (keyword == "class") {
      const std::size_t c = read_index(ls, line_no, "class index");
      const std::size_t node = read_index(ls, line_no, "node index");
      if (c >= *total) {
        throw ValidationError("graph line " + std::to_string(line_no) +
                              ": class index " + std::to_string(c) + " out of range");
      }
      if (classes[c]) {
        throw ValidationError("graph line " + std::to_string(line_no) +
                              ": class " + std::to_string(c) + " mapped twice");
      }
      classes[c] = node;
    } else if (keyword == "edge") {
      const std::size_t a = read_index(ls, line_no, "edge endpoint");
      const std::size_t b = read_index(ls, line_no, "edge endpoint");
      edges.emplace_back(a, b);
    } else {
      parse_fail(line_no, "unknown keyword `" + keyword + "`");
    }
    std::string extra;
    if (keyword != "node" && ls >> extra) parse_fail(line_no, "trailing tokens");
  }
  if (!n) throw ParseError("graph: missing header");

  std::vector<std::string> node_names;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (!names[i]) throw ParseError("graph: node " + std::to_string(i) + " never declared");
    node_names.push_back(*names[i]);
  }
  std::vector<std::size_t> class_to_node;
  for (std::size_t c = 0; c < classes.size(); ++c) {
    if (!classes[c]) throw ValidationError("graph: class " + std::to_string(c) + " has no node");
    class_to_node.push_back(*classes[c]);
  }
  return KnowledgeGraph::create(std::move(node_names), std::move(edges),
                                std::move(class_to_node), *known);
}

void write_graph(std::ostream& out, const KnowledgeGraph& g) {
  out << "nodes " << g.num_nodes() << " known " << g.known_class_count()
      << " classes " << g.total_class_count() << '\n';
  for (std::size_t i = 0; i < g.num_nodes(); ++i) {
    out << "node " << i << ' ' << g.node_names()[i] << '\n';
  }
  for (std::size_t c = 0; c < g.total_class_count(); ++c) {
    out << "class " << c << ' ' << g.class_to_node()[c] << '\n';
  }
  for (auto [a, b] : g.edges()) out << "edge " << a << ' ' << b << '\n';
}

KnowledgeGraph load_graph(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open graph file: " + path);
  return read_graph(in);
}

void save_graph(const std::string& path, const KnowledgeGraph& g) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  write_graph(out, g);
}

}  // namespace uodr
