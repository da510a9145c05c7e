// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "graphs.hpp"
#include "layoutforge/lower.hpp"

using namespace lf;
using namespace lf::testing;

namespace {

// N(H/4) W O 4 output layout: split H by 4, reorder.
std::vector<LayoutPrimitive> nh4wo4_seq() {
  return {LayoutPrimitive::split(2, {2, 4}), LayoutPrimitive::reorder({0, 2, 4, 1, 3})};
}

Graph conv_relu_graph() {
  Graph g;
  g.tensors = {
      tensor("inp", {{"N", 1}, {"I", 2}, {"H", 10}, {"W", 10}}, Role::Input),
      tensor("ker", {{"O", 4}, {"I", 2}, {"KH", 3}, {"KW", 3}}, Role::Constant),
      tensor("conv", {{"N", 1}, {"O", 4}, {"H", 8}, {"W", 8}}, Role::Intermediate),
      tensor("relu", {{"N", 1}, {"O", 4}, {"H", 8}, {"W", 8}}, Role::Output),
  };
  g.nodes = {
      node(OpKind::C2D, {"inp", "ker"}, "conv", {{"stride", 1}}),
      node(OpKind::ReLU, {"conv"}, "relu"),
  };
  return g;
}

}  // namespace

TEST_CASE("rewrite pass transforms declarations") {
  Graph g = conv_relu_graph();
  SeqMap seqs{{"conv", nh4wo4_seq()}};
  PassResult pr = rewrite_accesses_pass(g, seqs);
  const TensorDecl& t = pr.transformed.tensor("conv");
  REQUIRE(t.dims.size() == 5);
  CHECK(t.dims[0].extent == 1);
  CHECK(t.dims[1].extent == 2);  // H/4
  CHECK(t.dims[2].extent == 8);  // W
  CHECK(t.dims[3].extent == 4);  // O
  CHECK(t.dims[4].extent == 4);  // 4
}

TEST_CASE("all-empty sequences leave the graph unchanged") {
  Graph g = conv_relu_graph();
  PassResult pr = rewrite_accesses_pass(g, {});
  for (size_t i = 0; i < g.tensors.size(); ++i) {
    REQUIRE(pr.transformed.tensors[i].dims.size() == g.tensors[i].dims.size());
    for (size_t d = 0; d < g.tensors[i].dims.size(); ++d)
      CHECK(pr.transformed.tensors[i].dims[d].extent == g.tensors[i].dims[d].extent);
  }
}

TEST_CASE("unpropagated consumer reads the tiled layout: Conv[n][h//4][w][o][h%4]") {
  Graph g = conv_relu_graph();
  SeqMap seqs{{"conv", nh4wo4_seq()}};
  PassResult pr = rewrite_accesses_pass(g, seqs);
  int counter = 0;
  build_loop_nest(g, pr, 0, &counter);  // conv nest allocates its ids first
  LoopNest relu = build_loop_nest(g, pr, 1, &counter);

  REQUIRE(relu.loops.size() == 4);  // n, o, h, w -- untransformed output
  REQUIRE(relu.in_idxs.size() == 1);
  const auto& a = relu.in_idxs[0];
  REQUIRE(a.size() == 5);
  CHECK(expr_str(a[0]) == "n");
  CHECK(expr_str(a[1]) == "h // 4");
  CHECK(expr_str(a[2]) == "w");
  CHECK(expr_str(a[3]) == "o");
  CHECK(expr_str(a[4]) == "h % 4");
}

TEST_CASE("store_at on a non-constant tensor is rejected as offline-only") {
  Graph g = conv_relu_graph();
  SeqMap seqs{{"conv", {LayoutPrimitive::store_at("relu", 0)}}};
  CHECK_THROWS_WITH_AS(rewrite_accesses_pass(g, seqs), doctest::Contains("offline only"), Error);
}

TEST_CASE("propagated split+reorder aligns the ReLU nest for fusion") {
  Graph g = conv_relu_graph();
  SeqMap seqs{{"conv", nh4wo4_seq()}, {"relu", nh4wo4_seq()}};
  PassResult pr = rewrite_accesses_pass(g, seqs);
  int counter = 0;
  LoopNest conv = build_loop_nest(g, pr, 0, &counter);
  LoopNest relu = build_loop_nest(g, pr, 1, &counter);

  CHECK(alignment_depth(conv, relu) == 5);
  FusedGroup fg = compute_at(conv, relu, 5);
  auto stmts = emit_group(fg);
  REQUIRE(stmts.size() == 1);

  // Five shared loops, then init, reductions, and the ReLU store.
  const Stmt* cur = &stmts[0];
  std::vector<int64_t> extents;
  for (int depth = 0; depth < 5; ++depth) {
    REQUIRE(cur->kind == StmtKind::For);
    extents.push_back(cur->extent);
    REQUIRE(!cur->body.empty());
    if (depth < 4) cur = &cur->body[0];
  }
  CHECK(extents == std::vector<int64_t>{1, 2, 8, 4, 4});
  // Innermost shared loop hosts: init store, reduction loop, relu store.
  REQUIRE(cur->body.size() == 3);
  CHECK(cur->body[0].kind == StmtKind::Store);
  CHECK(cur->body[1].kind == StmtKind::For);
  CHECK(cur->body[2].kind == StmtKind::Store);
  // The ReLU body is max(conv load, 0) over identical indices.
  CHECK(cur->body[2].value->kind == ValKind::Max);
}

TEST_CASE("unpropagated tiled conv + plain relu is a fusion conflict") {
  Graph g = conv_relu_graph();
  SeqMap seqs{{"conv", nh4wo4_seq()}};
  PassResult pr = rewrite_accesses_pass(g, seqs);
  int counter = 0;
  LoopNest conv = build_loop_nest(g, pr, 0, &counter);
  LoopNest relu = build_loop_nest(g, pr, 1, &counter);
  CHECK(alignment_depth(conv, relu) == 1);  // only the batch loop agrees
  CHECK_THROWS_WITH_AS(compute_at(conv, relu, 5), doctest::Contains("fusion-conflict"), Error);
}

TEST_CASE("compute_at depth 0 concatenates trivially") {
  Graph g = conv_relu_graph();
  PassResult pr = rewrite_accesses_pass(g, {});
  int counter = 0;
  LoopNest conv = build_loop_nest(g, pr, 0, &counter);
  LoopNest relu = build_loop_nest(g, pr, 1, &counter);
  FusedGroup fg = compute_at(conv, relu, 0);
  auto stmts = emit_group(fg);
  CHECK(stmts.size() == 2);
}

TEST_CASE("loop_split strip-mines and preserves o extent product") {
  Graph g = conv_relu_graph();
  PassResult pr = rewrite_accesses_pass(g, {});
  int counter = 0;
  LoopNest conv = build_loop_nest(g, pr, 0, &counter);
  loop_split(&conv, "o", 2);
  const LoopVar* oo = conv.find("oo");
  const LoopVar* oi = conv.find("oi");
  REQUIRE(oo != nullptr);
  REQUIRE(oi != nullptr);
  CHECK(oo->extent == 2);
  CHECK(oi->extent == 2);
  CHECK_THROWS_AS(loop_split(&conv, "w", 3), Error);  // 3 does not divide 8
}

TEST_CASE("vectorize must target the innermost loop") {
  Graph g = conv_relu_graph();
  PassResult pr = rewrite_accesses_pass(g, {});
  int counter = 0;
  LoopNest conv = build_loop_nest(g, pr, 0, &counter);
  CHECK_THROWS_AS(annotate(&conv, "o", Annotation::Vectorize), Error);
  annotate(&conv, "rw", Annotation::Vectorize);  // innermost by default order
  CHECK(conv.loops.back().ann == Annotation::Vectorize);
}

TEST_CASE("motivating-figure program: overlapped tiles and sunken channel") {
  // Bare C2D 10x10 -> 8x8, O=4, tiled into 2x2 spatial blocks with o_t=2.
  Graph g = bare_conv(1, 2, 4, 10, 3, 1);
  SeqMap seqs;
  // Output NOHW -> N 2 2 (O/ot) (H/2) (W/2) ot.
  seqs["y"] = {
      LayoutPrimitive::split(1, {2, 2}),
      LayoutPrimitive::split(3, {2, 4}),
      LayoutPrimitive::split(5, {2, 4}),
      LayoutPrimitive::reorder({0, 3, 5, 1, 4, 6, 2}),
  };
  // Input NIHW with overlapped tiling: B = H/2 + KH - 1 = 6, S = 4.
  seqs["x"] = {
      LayoutPrimitive::unfold(2, 6, 4),
      LayoutPrimitive::unfold(4, 6, 4),
      LayoutPrimitive::reorder({0, 2, 4, 1, 3, 5}),
  };
  // Weight OIKK -> (O/ot) I KH KW ot.
  seqs["ker"] = {
      LayoutPrimitive::split(0, {2, 2}),
      LayoutPrimitive::reorder({0, 2, 3, 4, 1}),
  };
  // Schedule: sink the channel tile o1 innermost, past the reductions.
  std::vector<LoopSchedule> scheds(1);
  scheds[0].node = 0;
  LoopSchedPrim reorder;
  reorder.kind = LoopSchedPrim::Kind::Reorder;
  reorder.order = {"n", "h0", "w0", "o0", "h1", "w1", "ri", "rh", "rw", "o1"};
  scheds[0].prims = {reorder};

  Program prog = lower(g, seqs, scheds);
  std::string got = dump_program(prog);
  std::string want =
      "for n in range(1):\n"
      "  for h0 in range(2):\n"
      "    for w0 in range(2):\n"
      "      for o0 in range(2):\n"
      "        for h1 in range(4):\n"
      "          for w1 in range(4):\n"
      "            for o1 in range(2):\n"
      "              y[n][h0][w0][o0][h1][w1][o1] = 0\n"
      "            for ri in range(2):\n"
      "              for rh in range(3):\n"
      "                for rw in range(3):\n"
      "                  for o1 in range(2):\n"
      "                    y[n][h0][w0][o0][h1][w1][o1] += "
      "x[n][h0][w0][ri][h1 + rh][w1 + rw]*ker[o0][ri][rh][rw][o1]\n";
  CHECK(got == want);
}

TEST_CASE("empty schedules lower to naive back-to-back nests") {
  Graph g = conv_chain(1, 2, 4, 6, 3, 1, 1);
  Program prog = lower(g, {}, {});
  CHECK(prog.stmts.size() == 4);  // padding, conv, bias, relu
  for (const auto& s : prog.stmts) CHECK(s.kind == StmtKind::For);
}

TEST_CASE("padding lowers to a guarded interior copy") {
  Graph g = conv_chain(1, 2, 4, 6, 3, 1, 1);
  Program prog = lower(g, {}, {});
  // Walk to the innermost statement of the first nest.
  const Stmt* cur = &prog.stmts[0];
  while (cur->kind == StmtKind::For) cur = &cur->body[0];
  REQUIRE(cur->kind == StmtKind::IfElse);
  CHECK(cur->conds.size() == 2);
  REQUIRE(cur->then_body.size() == 1);
  CHECK(cur->then_body[0].value->kind == ValKind::Load);
  REQUIRE(cur->else_body.size() == 1);
  CHECK(cur->else_body[0].value->kind == ValKind::Imm);
}
