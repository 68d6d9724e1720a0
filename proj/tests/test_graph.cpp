// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "helpers.hpp"
#include "uodr/error.hpp"
#include "uodr/graph.hpp"
#include "uodr/kernels.hpp"

using namespace uodr;

namespace {

KnowledgeGraph parse(const std::string& text) {
  std::istringstream in(text);
  return read_graph(in);
}

const char* kChain =
    "# five node chain\n"
    "nodes 5 known 2 classes 3\n"
    "node 0 a\nnode 1 b\nnode 2 c\nnode 3 d\nnode 4 e\n"
    "class 0 0\nclass 1 4\nclass 2 2\n"
    "edge 0 1\nedge 1 2\nedge 2 3\nedge 3 4\n";

KnowledgeGraph random_graph(Rng& rng) {
  const std::size_t n = 2 + rng.index(9);
  std::vector<std::string> names(n);
  for (std::size_t i = 0; i < n; ++i) names[i] = "n" + std::to_string(i);
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (rng.uniform() < 0.3) edges.emplace_back(i, j);
  const std::size_t total = 2 + rng.index(n - 1);
  auto perm = rng.permutation(n);
  perm.resize(total);
  return KnowledgeGraph::create(names, edges, perm, 1 + rng.index(total - 1));
}

}  // namespace

TEST_CASE("smallest graph gets a self-loop") {
  const KnowledgeGraph g = parse("nodes 1 known 0 classes 1\nnode 0 only\nclass 0 0\n");
  CHECK(g.adjacency() == Matrix{{1}});
  CHECK(normalized_adjacency(g) == Matrix{{1.0}});
}

TEST_CASE("chain fixture counts") {
  const KnowledgeGraph g = parse(kChain);
  CHECK(g.num_nodes() == 5);
  CHECK(g.edges().size() == 4);
  CHECK(g.known_class_count() == 2);
  CHECK(g.total_class_count() == 3);
  const Matrix a = g.adjacency();
  double diagonal = 0.0, total = 0.0;
  for (std::size_t i = 0; i < 5; ++i) diagonal += a(i, i);
  for (double v : a.values()) total += v;
  CHECK(diagonal == 5);
  CHECK(total == 5 + 2 * 4);
}

TEST_CASE("normalized adjacency examples") {
  const KnowledgeGraph two =
      KnowledgeGraph::create({"a", "b"}, {{0, 1}}, {0, 1}, 1);
  CHECK(normalized_adjacency(two) == Matrix{{0.5, 0.5}, {0.5, 0.5}});
  const KnowledgeGraph path =
      KnowledgeGraph::create({"a", "b", "c"}, {{0, 1}, {1, 2}}, {0, 2}, 1);
  const Matrix p = normalized_adjacency(path);
  const Matrix expected{{0.5, 0.5, 0}, {1.0 / 3, 1.0 / 3, 1.0 / 3}, {0, 0.5, 0.5}};
  CHECK(max_abs(subtract(p, expected)) <= 1e-15);
}

TEST_CASE("normalized adjacency rows sum to one on random graphs") {
  Rng rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    const KnowledgeGraph g = random_graph(rng);
    const Matrix p = normalized_adjacency(g);
    const Matrix a = g.adjacency();
    for (std::size_t i = 0; i < p.rows(); ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < p.cols(); ++j) {
        s += p(i, j);
        CHECK((p(i, j) > 0.0) == (a(i, j) == 1.0));
      }
      CHECK(std::abs(s - 1.0) <= 1e-12);
    }
  }
}

TEST_CASE("explicit self-loops change nothing") {
  const KnowledgeGraph plain = KnowledgeGraph::create({"a", "b"}, {{0, 1}}, {0, 1}, 1);
  const KnowledgeGraph looped =
      KnowledgeGraph::create({"a", "b"}, {{0, 1}, {0, 0}, {1, 1}}, {0, 1}, 1);
  CHECK(normalized_adjacency(plain) == normalized_adjacency(looped));
  CHECK(plain == looped);
}

TEST_CASE("graph validation errors") {
  CHECK_THROWS_AS(KnowledgeGraph::create({"a", "b"}, {}, {0, 0}, 1), ValidationError);
  CHECK_THROWS_AS(KnowledgeGraph::create({"a", "b"}, {}, {0, 5}, 1), ValidationError);
  CHECK_THROWS_AS(KnowledgeGraph::create({"a", "b"}, {{0, 1}, {1, 0}}, {0, 1}, 1),
                  ValidationError);
  CHECK_THROWS_AS(KnowledgeGraph::create({"a", "b"}, {{0, 2}}, {0, 1}, 1), ValidationError);
  CHECK_THROWS_AS(KnowledgeGraph::create({"a", "b"}, {}, {0, 1}, 2), ValidationError);
  CHECK_THROWS_AS(parse("nodes 2 known 1 classes 2\nnode 0 a\nnode 1 b\nclass 0 1\nclass 1 1\n"),
                  ValidationError);
}

TEST_CASE("graph parse errors name the line") {
  try {
    parse("nodes 2 known 1 classes 2\nnode 0 a\nnode 1 b\nclass 0 0\nclass 1 1\nedge 0 x\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("line 6") != std::string::npos);
  }
  CHECK_THROWS_AS(parse("nodes 2 known 1 classes 2\nnode 0 a\nclass 0 0\nclass 1 1\n"),
                  ParseError);
  CHECK_THROWS_AS(parse("vertices 2\n"), ParseError);
  CHECK_THROWS_AS(parse(""), ParseError);
  CHECK_THROWS_AS(load_graph("/nonexistent/graph.txt"), IoError);
}

TEST_CASE("graph file round-trip") {
  const KnowledgeGraph g = parse(kChain);
  testing::TempDir dir("graph");
  save_graph(dir.file("g.txt"), g);
  const KnowledgeGraph back = load_graph(dir.file("g.txt"));
  CHECK(back == g);
  save_graph(dir.file("g2.txt"), back);
  CHECK(load_graph(dir.file("g2.txt")) == g);
}

TEST_CASE("node names may contain spaces") {
  const KnowledgeGraph g =
      parse("nodes 2 known 1 classes 2\nnode 0 polar bear\nnode 1 grizzly bear\n"
            "class 0 0\nclass 1 1\nedge 0 1\n");
  CHECK(g.node_names()[0] == "polar bear");
  std::stringstream ss;
  write_graph(ss, g);
  CHECK(read_graph(ss) == g);
}

TEST_CASE("reachability") {
  const KnowledgeGraph chain = parse(kChain);
  CHECK(check_reachability(chain).all_reachable());
  // Unknown class 2 sits on an isolated node.
  const KnowledgeGraph split =
      KnowledgeGraph::create({"a", "b", "c"}, {{0, 1}}, {0, 1, 2}, 1);
  const ReachabilityReport r = check_reachability(split);
  CHECK_FALSE(r.all_reachable());
  REQUIRE(r.unreachable_classes.size() == 1);
  CHECK(r.unreachable_classes[0] == 2);
  CHECK(r.unreachable_nodes == std::vector<std::size_t>{2});
}

TEST_CASE("shipped example graph loads") {
  const KnowledgeGraph g = load_graph(UODR_SOURCE_DIR "/data/tiny_graph.txt");
  CHECK(g.num_nodes() == 6);
  CHECK(g.known_class_count() == 2);
  CHECK(check_reachability(g).all_reachable());
}
