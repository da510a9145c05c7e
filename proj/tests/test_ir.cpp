// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "graphs.hpp"
#include "layoutforge/ir.hpp"

using namespace lf;
using namespace lf::testing;

TEST_CASE("well-formed conv graph validates") {
  Graph g = conv_chain(1, 3, 4, 8, 3, 1, 1);
  CHECK(validate_graph(g).empty());
}

TEST_CASE("consumption before production is a cycle/order violation") {
  Graph g;
  g.tensors = {
      tensor("a", {{"X", 4}}, Role::Intermediate),
      tensor("b", {{"X", 4}}, Role::Intermediate),
  };
  // ReLU consumes b which is produced by the later node.
  g.nodes = {
      node(OpKind::ReLU, {"b"}, "a"),
      node(OpKind::ReLU, {"a"}, "b"),
  };
  auto v = validate_graph(g);
  REQUIRE(!v.empty());
  CHECK(v.front().find("cycle/order") != std::string::npos);
}

TEST_CASE("EwAdd with one input is an arity violation") {
  Graph g;
  g.tensors = {
      tensor("a", {{"X", 4}}, Role::Input),
      tensor("b", {{"X", 4}}, Role::Output),
  };
  OperatorNode n = node(OpKind::EwAdd, {"a"}, "b");
  g.nodes = {n};
  auto v = validate_graph(g);
  REQUIRE(!v.empty());
  CHECK(v.front().find("arity") != std::string::npos);
}

TEST_CASE("dangling tensor reported") {
  Graph g;
  g.tensors = {tensor("a", {{"X", 4}}, Role::Input)};
  g.nodes = {node(OpKind::ReLU, {"missing"}, "a2")};
  auto v = validate_graph(g);
  CHECK(v.size() >= 2);  // unknown input and unknown output
}

TEST_CASE("R18 first layer shapes: 230x230 k7 s2 -> 112x112") {
  Graph g;
  g.tensors = {
      tensor("x", {{"N", 1}, {"I", 3}, {"H", 230}, {"W", 230}}, Role::Input),
      tensor("ker", {{"O", 64}, {"I", 3}, {"KH", 7}, {"KW", 7}}, Role::Constant),
      tensor("y", {{"N", 1}, {"O", 0}, {"H", 0}, {"W", 0}}, Role::Output),
  };
  g.nodes = {node(OpKind::C2D, {"x", "ker"}, "y", {{"stride", 2}})};
  Graph r = infer_shapes(g);
  CHECK(r.tensor("y").dims[1].extent == 64);
  CHECK(r.tensor("y").dims[2].extent == 112);
  CHECK(r.tensor("y").dims[3].extent == 112);
}

TEST_CASE("GMM shape rule") {
  Graph g;
  g.tensors = {
      tensor("a", {{"M", 8}, {"K", 4}}, Role::Input),
      tensor("b", {{"K", 4}, {"N", 6}}, Role::Input),
      tensor("c", {{"M", 0}, {"N", 0}}, Role::Output),
  };
  g.nodes = {node(OpKind::GMM, {"a", "b"}, "c")};
  Graph r = infer_shapes(g);
  CHECK(r.tensor("c").dims[0].extent == 8);
  CHECK(r.tensor("c").dims[1].extent == 6);
}

TEST_CASE("ReLU copies shape") {
  Graph g;
  g.tensors = {
      tensor("x", {{"A", 2}, {"B", 3}, {"C", 4}}, Role::Input),
      tensor("y", {{"A", 0}, {"B", 0}, {"C", 0}}, Role::Output),
  };
  g.nodes = {node(OpKind::ReLU, {"x"}, "y")};
  Graph r = infer_shapes(g);
  CHECK(r.tensor("y").dims[0].extent == 2);
  CHECK(r.tensor("y").dims[1].extent == 3);
  CHECK(r.tensor("y").dims[2].extent == 4);
}

TEST_CASE("inconsistent extents raise naming the node") {
  Graph g;
  g.tensors = {
      tensor("a", {{"M", 8}, {"K", 4}}, Role::Input),
      tensor("b", {{"K", 5}, {"N", 6}}, Role::Input),
      tensor("c", {{"M", 0}, {"N", 0}}, Role::Output),
  };
  g.nodes = {node(OpKind::GMM, {"a", "b"}, "c")};
  CHECK_THROWS_WITH_AS(infer_shapes(g), doctest::Contains("node#0"), Error);
}

TEST_CASE("infer_shapes is idempotent") {
  Graph g = conv_chain(1, 3, 4, 8, 3, 1, 1);
  Graph once = infer_shapes(g);
  Graph twice = infer_shapes(once);
  for (size_t i = 0; i < once.tensors.size(); ++i)
    for (size_t d = 0; d < once.tensors[i].dims.size(); ++d)
      CHECK(once.tensors[i].dims[d].extent == twice.tensors[i].dims[d].extent);
}

TEST_CASE("topo_order keeps chains in order") {
  Graph g = conv_chain(1, 3, 4, 8, 3, 1, 1);
  auto order = topo_order(g);
  CHECK(order == std::vector<int>{0, 1, 2, 3});
}

TEST_CASE("diamond: producer first, join last") {
  Graph g;
  g.tensors = {
      tensor("x", {{"X", 4}}, Role::Input),
      tensor("p", {{"X", 4}}, Role::Intermediate),
      tensor("l", {{"X", 4}}, Role::Intermediate),
      tensor("r", {{"X", 4}}, Role::Intermediate),
      tensor("y", {{"X", 4}}, Role::Output),
  };
  g.nodes = {
      node(OpKind::ReLU, {"x"}, "p"),
      node(OpKind::ReLU, {"p"}, "l"),
      node(OpKind::ReLU, {"p"}, "r"),
      node(OpKind::EwAdd, {"l", "r"}, "y"),
  };
  auto order = topo_order(g);
  CHECK(order.front() == 0);
  CHECK(order.back() == 3);
}

namespace {

// Brute-force enumeration of all valid topological orders (n <= 8).
void all_topo_orders(const Graph& g, std::vector<int>& cur, std::set<std::string>& done,
                     std::vector<std::vector<int>>& out) {
  if (cur.size() == g.nodes.size()) {
    out.push_back(cur);
    return;
  }
  for (size_t i = 0; i < g.nodes.size(); ++i) {
    if (std::find(cur.begin(), cur.end(), static_cast<int>(i)) != cur.end()) continue;
    bool ready = true;
    for (const auto& in : g.nodes[i].inputs) {
      int p = g.producer_of(in);
      if (p >= 0 && std::find(cur.begin(), cur.end(), p) == cur.end()) ready = false;
    }
    if (!ready) continue;
    cur.push_back(static_cast<int>(i));
    all_topo_orders(g, cur, done, out);
    cur.pop_back();
  }
}

}  // namespace

TEST_CASE("independent chains interleave deterministically and validly") {
  Graph g;
  g.tensors = {
      tensor("x1", {{"X", 4}}, Role::Input),
      tensor("x2", {{"X", 4}}, Role::Input),
      tensor("a1", {{"X", 4}}, Role::Intermediate),
      tensor("a2", {{"X", 4}}, Role::Intermediate),
      tensor("y1", {{"X", 4}}, Role::Output),
      tensor("y2", {{"X", 4}}, Role::Output),
  };
  g.nodes = {
      node(OpKind::ReLU, {"x1"}, "a1"),
      node(OpKind::ReLU, {"x2"}, "a2"),
      node(OpKind::ReLU, {"a1"}, "y1"),
      node(OpKind::ReLU, {"a2"}, "y2"),
  };
  auto order = topo_order(g);
  std::vector<int> cur;
  std::set<std::string> done;
  std::vector<std::vector<int>> valid;
  all_topo_orders(g, cur, done, valid);
  CHECK(std::find(valid.begin(), valid.end(), order) != valid.end());
  // Deterministic across runs.
  CHECK(topo_order(g) == order);
  // Insertion-order tie break: node 0 before node 1.
  CHECK(order == std::vector<int>{0, 1, 2, 3});
}

TEST_CASE("topo_order permutation property on small random DAGs") {
  std::mt19937_64 rng(11);
  for (int iter = 0; iter < 50; ++iter) {
    Graph g;
    int n = 2 + static_cast<int>(rng() % 6);
    g.tensors.push_back(tensor("in", {{"X", 2}}, Role::Input));
    for (int i = 0; i < n; ++i)
      g.tensors.push_back(tensor("t" + std::to_string(i), {{"X", 2}}, Role::Intermediate));
    for (int i = 0; i < n; ++i) {
      std::string src = i == 0 ? "in" : "t" + std::to_string(rng() % i);
      g.nodes.push_back(node(OpKind::ReLU, {src}, "t" + std::to_string(i)));
    }
    auto order = topo_order(g);
    CHECK(order.size() == g.nodes.size());
    std::vector<int> cur;
    std::set<std::string> done;
    std::vector<std::vector<int>> valid;
    all_topo_orders(g, cur, done, valid);
    CHECK(std::find(valid.begin(), valid.end(), order) != valid.end());
  }
}
