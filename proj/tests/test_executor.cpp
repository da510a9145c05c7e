// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <numeric>
#include <random>
#include <set>

#include "graphs.hpp"
#include "layoutforge/cachesim.hpp"
#include "layoutforge/features.hpp"
#include "layoutforge/interp.hpp"
#include "layoutforge/space.hpp"
#include "layoutforge/surrogate.hpp"

using namespace lf;
using namespace lf::testing;

namespace {

double tolerance_for(const Graph& g) {
  for (const auto& t : g.tensors)
    if (t.dtype == DType::Float32) return 1e-5;
  return 0.0;
}

void check_oracle(const Graph& g, const SeqMap& seqs, const std::vector<LoopSchedule>& scheds,
                  uint64_t seed) {
  BufferMap inputs = random_inputs(g, seed);
  BufferMap ref = reference_eval(g, inputs);
  Program prog = lower(g, seqs, scheds);
  InterpResult got = interpret(prog, inputs);
  for (const auto& [id, vr] : ref) {
    auto it = got.outputs.find(id);
    REQUIRE(it != got.outputs.end());
    REQUIRE(it->second.size() == vr.size());
    for (size_t i = 0; i < vr.size(); ++i) {
      double scale = std::max({1.0, std::abs(vr[i]), std::abs(it->second[i])});
      REQUIRE(std::abs(vr[i] - it->second[i]) / scale <= tolerance_for(g));
    }
  }
}

}  // namespace

TEST_CASE("degenerate 1x1 conv with identity weight mixes channels") {
  Graph g = bare_conv(1, 2, 2, 4, 1, 1);
  BufferMap inputs = random_inputs(g, 1);
  // Identity kernel: ker[o][i][0][0] = (o == i).
  inputs["ker"] = {1, 0, 0, 1};
  BufferMap ref = reference_eval(g, inputs);
  Program prog = lower(g, {}, {});
  InterpResult got = interpret(prog, inputs);
  CHECK(got.outputs.at("y") == inputs.at("x"));
  CHECK(ref.at("y") == inputs.at("x"));
}

TEST_CASE("GMM with identity matrix returns the operand") {
  Graph g;
  g.tensors = {
      tensor("a", {{"M", 2}, {"K", 2}}, Role::Input),
      tensor("b", {{"K", 2}, {"N", 2}}, Role::Input),
      tensor("c", {{"M", 2}, {"N", 2}}, Role::Output),
  };
  g.nodes = {node(OpKind::GMM, {"a", "b"}, "c")};
  BufferMap inputs{{"a", {3, 4, 5, 6}}, {"b", {1, 0, 0, 1}}};
  Program prog = lower(g, {}, {});
  InterpResult got = interpret(prog, inputs);
  CHECK(got.outputs.at("c") == inputs.at("a"));
}

TEST_CASE("all-ones 3x3 conv on all-ones input gives 9 in the interior") {
  Graph g = bare_conv(1, 1, 1, 6, 3, 1);
  BufferMap inputs{{"x", std::vector<double>(36, 1.0)},
                   {"ker", std::vector<double>(9, 1.0)}};
  BufferMap ref = reference_eval(g, inputs);
  for (double v : ref.at("y")) CHECK(v == 9.0);
}

TEST_CASE("EwAdd with zero operand is identity") {
  Graph g;
  g.tensors = {
      tensor("x", {{"A", 6}}, Role::Input),
      tensor("z", {{"A", 6}}, Role::Input),
      tensor("y", {{"A", 6}}, Role::Output),
  };
  g.nodes = {node(OpKind::EwAdd, {"x", "z"}, "y")};
  BufferMap inputs{{"x", {1, -2, 3, -4, 5, -6}}, {"z", std::vector<double>(6, 0.0)}};
  CHECK(reference_eval(g, inputs).at("y") == inputs.at("x"));
}

TEST_CASE("DEP equals an independent per-channel convolution") {
  Graph g = dep_chain(1, 4, 6, 3, 1, 0);
  BufferMap inputs = random_inputs(g, 9);
  BufferMap ref = reference_eval(g, inputs);
  // Per-channel brute force, written independently of reference_eval.
  const auto& x = inputs.at("x");
  const auto& k = inputs.at("ker");
  int64_t C = 4, H = 6, HO = 4;
  std::vector<double> expect(C * HO * HO);
  for (int64_t c = 0; c < C; ++c)
    for (int64_t i = 0; i < HO; ++i)
      for (int64_t j = 0; j < HO; ++j) {
        double acc = 0;
        for (int64_t a = 0; a < 3; ++a)
          for (int64_t b = 0; b < 3; ++b)
            acc += x[c * H * H + (i + a) * H + (j + b)] * k[c * 9 + a * 3 + b];
        expect[c * HO * HO + i * HO + j] = std::max(acc, 0.0);
      }
  CHECK(ref.at("y") == expect);
}

TEST_CASE("interpreter reports out-of-range accesses with location") {
  Graph g = bare_conv(1, 1, 1, 4, 3, 1);
  Program prog = lower(g, {}, {});
  // Corrupt a load index to run past the input extent.
  std::function<bool(Stmt&)> corrupt = [&](Stmt& s) {
    if (s.kind == StmtKind::Store && s.value->kind == ValKind::Add) {
      auto bad = std::make_shared<ValExpr>(*s.value->b->a);  // input load
      bad->idxs[2] = make_add(bad->idxs[2], make_const(100));
      auto mul = std::make_shared<ValExpr>(*s.value->b);
      mul->a = bad;
      auto add = std::make_shared<ValExpr>(*s.value);
      add->b = mul;
      s.value = add;
      return true;
    }
    for (auto& c : s.body)
      if (corrupt(c)) return true;
    return false;
  };
  for (auto& s : prog.stmts) corrupt(s);
  BufferMap inputs = random_inputs(g, 2);
  CHECK_THROWS_WITH_AS(interpret(prog, inputs), doctest::Contains("out-of-range"), Error);
}

TEST_CASE("conv reduction executes exactly KH*KW*I times per output element") {
  Graph g = bare_conv(1, 3, 2, 6, 3, 1);
  Program prog = lower(g, {}, {});
  BufferMap inputs = random_inputs(g, 3);
  InterpResult r = interpret(prog, inputs);
  int64_t elements = 2 * 4 * 4;
  // init stores + accumulate stores
  CHECK(r.store_counts.at("y") == elements + elements * 3 * 3 * 3);
}

TEST_CASE("oracle equivalence: template-style layouts on the conv chain") {
  Graph g = conv_chain(1, 2, 4, 6, 3, 1, 1);
  SeqMap seqs;
  seqs["conv"] = {LayoutPrimitive::split(1, {2, 2}),
                  LayoutPrimitive::reorder({0, 1, 3, 4, 2})};
  seqs["xp"] = {LayoutPrimitive::unfold(2, 5, 3),
                LayoutPrimitive::unfold(4, 5, 3),
                LayoutPrimitive::reorder({0, 2, 4, 1, 3, 5})};
  seqs["ker"] = {LayoutPrimitive::split(0, {2, 2}),
                 LayoutPrimitive::reorder({0, 2, 3, 4, 1})};
  check_oracle(g, seqs, {}, 5);
}

TEST_CASE("oracle equivalence under loop schedules") {
  Graph g = conv_chain(1, 2, 4, 6, 3, 1, 1);
  std::vector<LoopSchedule> scheds(1);
  scheds[0].node = 1;
  LoopSchedPrim split;
  split.kind = LoopSchedPrim::Kind::Split;
  split.var = "o";
  split.factor = 2;
  LoopSchedPrim reorder;
  reorder.kind = LoopSchedPrim::Kind::Reorder;
  reorder.order = {"n", "oo", "oi", "h", "ri", "rh", "rw", "w"};
  LoopSchedPrim ann;
  ann.kind = LoopSchedPrim::Kind::Annotate;
  ann.var = "w";  // unit stride in the untransformed layout
  ann.ann = Annotation::Vectorize;
  scheds[0].prims = {split, reorder, ann};
  check_oracle(g, {}, scheds, 6);
}

TEST_CASE("oracle equivalence with fusion") {
  Graph g = conv_chain(1, 2, 4, 6, 3, 1, 1);
  SeqMap seqs;
  auto out_seq = std::vector<LayoutPrimitive>{LayoutPrimitive::split(1, {2, 2}),
                                              LayoutPrimitive::reorder({0, 1, 3, 4, 2})};
  seqs["conv"] = out_seq;
  seqs["biased"] = out_seq;
  seqs["y"] = out_seq;
  std::vector<LoopSchedule> scheds(1);
  scheds[0].node = 1;
  LoopSchedPrim fuse;
  fuse.kind = LoopSchedPrim::Kind::FuseConsumer;
  scheds[0].prims = {fuse};
  check_oracle(g, seqs, scheds, 7);
}

TEST_CASE("GMM store_at fused layout equals unfused execution") {
  Graph g = gmm_chain(4, 3, 4);
  SeqMap seqs;
  seqs["bias"] = {LayoutPrimitive::store_at("b", 0)};
  check_oracle(g, seqs, {}, 8);
}

TEST_CASE("int32 graphs match exactly") {
  Graph g = conv_chain(1, 2, 3, 6, 3, 1, 1, DType::Int32);
  SeqMap seqs;
  seqs["conv"] = {LayoutPrimitive::split(1, {3, 1})};
  BufferMap inputs = random_inputs(g, 11);
  BufferMap ref = reference_eval(g, inputs);
  InterpResult got = interpret(lower(g, seqs, {}), inputs);
  for (const auto& [id, vr] : ref) CHECK(got.outputs.at(id) == vr);
}

// ---------------------------------------------------------------------------
// Cache simulator

namespace {

Program contiguous_load_program(int64_t elems) {
  Program p;
  ProgTensor t;
  t.id = "t";
  t.dims = {{"X", elems}};
  t.orig_dims = t.dims;
  t.role = Role::Input;
  p.tensors.push_back(t);
  Stmt loop;
  loop.kind = StmtKind::For;
  loop.var_id = 0;
  loop.var_name = "i";
  loop.extent = elems;
  Stmt eval;
  eval.kind = StmtKind::Eval;
  eval.eval = val_load(0, {make_var(0, "i", elems)});
  loop.body = {eval};
  p.stmts = {loop};
  return p;
}

}  // namespace

TEST_CASE("prefetch predictions reproduce the 512x{4,16,64,256} table") {
  CacheConfig cfg;
  cfg.line_elems = 16;
  cfg.prefetch_lines = 4;
  cfg.num_lines = 8192;  // cold-cache capacity for the largest block
  struct Case {
    int64_t cols, want;
  };
  for (auto [cols, want] : {Case{4, 32}, Case{16, 128}, Case{64, 512}, Case{256, 2048}}) {
    ProfileCounters c = simulate_cache(contiguous_load_program(512 * cols), cfg);
    CHECK(c.l1_misses == want);
    CHECK(c.l1_loads == 512 * cols);
  }
}

TEST_CASE("prediction rule: ceil(E / (line * prefetch)) for any contiguous pass") {
  CacheConfig cfg;
  cfg.line_elems = 16;
  cfg.prefetch_lines = 4;
  for (int64_t e : {1, 63, 64, 65, 1000, 4096}) {
    ProfileCounters c = simulate_cache(contiguous_load_program(e), cfg);
    CHECK(c.l1_misses == (e + 63) / 64);
  }
}

TEST_CASE("resident line loaded twice: one miss, two loads") {
  CacheConfig cfg;
  cfg.prefetch_lines = 1;
  Program p = contiguous_load_program(1);
  // Duplicate the loop body so the same element loads twice.
  p.stmts[0].body.push_back(p.stmts[0].body[0]);
  ProfileCounters c = simulate_cache(p, cfg);
  CHECK(c.l1_loads == 2);
  CHECK(c.l1_misses == 1);
}

TEST_CASE("simulation is deterministic") {
  Graph g = conv_chain(1, 2, 4, 6, 3, 1, 1);
  Program prog = lower(g, {}, {});
  CacheConfig cfg;
  ProfileCounters a = simulate_cache(prog, cfg);
  ProfileCounters b = simulate_cache(prog, cfg);
  CHECK(a.insts == b.insts);
  CHECK(a.l1_loads == b.l1_loads);
  CHECK(a.l1_misses == b.l1_misses);
  CHECK(a.l1_stores == b.l1_stores);
  CHECK(a.cost == b.cost);
  CHECK(a.l1_misses <= a.l1_loads);
  CHECK(a.cost >= 0);
}

// ---------------------------------------------------------------------------
// Features and the cost surrogate

TEST_CASE("empty program gives the zero vector") {
  Program p;
  FeatureVector f = extract_features(p);
  CHECK(f.size() == static_cast<size_t>(kFeatureLength));
  for (double v : f) CHECK(v == 0.0);
}

TEST_CASE("identical programs give identical features") {
  Graph g = conv_chain(1, 2, 4, 6, 3, 1, 1);
  Program a = lower(g, {}, {});
  Program b = lower(g, {}, {});
  CHECK(extract_features(a) == extract_features(b));
}

TEST_CASE("loop order changes the stride features") {
  Graph g = bare_conv(1, 2, 4, 8, 3, 1);
  Program a = lower(g, {}, {});
  std::vector<LoopSchedule> scheds(1);
  scheds[0].node = 0;
  LoopSchedPrim reorder;
  reorder.kind = LoopSchedPrim::Kind::Reorder;
  reorder.order = {"n", "h", "w", "o", "ri", "rh", "rw"};
  scheds[0].prims = {reorder};
  Program b = lower(g, {}, scheds);
  CHECK(extract_features(a) != extract_features(b));
}

TEST_CASE("surrogate is unknown until eight samples") {
  CostModel m;
  FeatureVector x(kFeatureLength, 1.0);
  for (int i = 0; i < 7; ++i) {
    m.add(x, 1.0);
    CHECK_FALSE(m.predict(x).has_value());
  }
  m.add(x, 1.0);
  CHECK(m.predict(x).has_value());
}

TEST_CASE("identical features and cost predict that cost") {
  CostModel m;
  FeatureVector x(kFeatureLength, 2.5);
  for (int i = 0; i < 10; ++i) m.add(x, 42.0);
  CHECK(*m.predict(x) == doctest::Approx(42.0));
}

TEST_CASE("perfectly linear cost is recovered to 1e-6") {
  CostModel m;
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> d(0.0, 1.0);
  for (int i = 0; i < 2000; ++i) {
    FeatureVector x(kFeatureLength, 0.0);
    x[5] = d(rng);
    m.add(x, 3.0 * x[5] + 1.0);
  }
  for (double v : {0.1, 0.5, 0.9}) {
    FeatureVector x(kFeatureLength, 0.0);
    x[5] = v;
    CHECK(std::abs(*m.predict(x) - (3.0 * v + 1.0)) < 1e-6);
  }
}

TEST_CASE("surrogate ranks simulator costs with Spearman >= 0.7") {
  Graph g = conv_chain(1, 2, 8, 8, 3, 1, 1);
  CacheConfig cfg;
  cfg.num_lines = 64;
  std::mt19937_64 rng(21);
  PassResult pass = rewrite_accesses_pass(g, {});
  int counter = 0;
  LoopNest nest = build_loop_nest(g, pass, 1, &counter);
  LoopSpace space = build_loop_space(g, nest, true);

  std::vector<FeatureVector> feats;
  std::vector<double> costs;
  std::set<LoopPoint> seen;
  while (feats.size() < 70) {
    LoopPoint pt = random_loop_point(space, &rng);
    if (!seen.insert(pt).second) continue;
    std::vector<LoopSchedule> scheds(1);
    scheds[0].node = 1;
    scheds[0].prims = decode_loop_point(space, pt);
    try {
      Program prog = lower(g, {}, scheds);
      feats.push_back(extract_features(prog));
      costs.push_back(simulate_cache(prog, cfg).cost);
    } catch (const Error&) {
      continue;
    }
  }
  CostModel m;
  for (size_t i = 0; i < 50; ++i) m.add(feats[i], costs[i]);
  // Spearman rank correlation on the held-out points.
  std::vector<double> pred, truth;
  for (size_t i = 50; i < feats.size(); ++i) {
    pred.push_back(*m.predict(feats[i]));
    truth.push_back(costs[i]);
  }
  auto ranks = [](const std::vector<double>& v) {
    std::vector<size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (size_t k = 0; k < idx.size(); ++k) r[idx[k]] = static_cast<double>(k);
    return r;
  };
  auto ra = ranks(pred), rb = ranks(truth);
  double n = static_cast<double>(ra.size());
  double d2 = 0;
  for (size_t i = 0; i < ra.size(); ++i) d2 += (ra[i] - rb[i]) * (ra[i] - rb[i]);
  double spearman = 1.0 - 6.0 * d2 / (n * (n * n - 1.0));
  CHECK(spearman >= 0.7);

  // The ranking property the tuner relies on: high-miss programs rank above
  // low-miss ones.
  size_t lo = std::min_element(truth.begin(), truth.end()) - truth.begin();
  size_t hi = std::max_element(truth.begin(), truth.end()) - truth.begin();
  CHECK(pred[hi] > pred[lo]);
}

TEST_CASE("fuzz: random layouts and schedules preserve semantics") {
  std::mt19937_64 rng(23);
  for (int iter = 0; iter < 60; ++iter) {
    // Alternate between conv chains, DEP chains and GMM chains.
    Graph g;
    int which = iter % 3;
    if (which == 0) {
      g = conv_chain(1, 1 + static_cast<int>(rng() % 3), 2 + static_cast<int>(rng() % 3),
                     4 + static_cast<int>(rng() % 3) * 2, 3, 1 + static_cast<int>(rng() % 2),
                     1);
    } else if (which == 1) {
      g = dep_chain(1, 2 + static_cast<int>(rng() % 3), 6, 3, 1, 1);
    } else {
      g = gmm_chain(4 + (rng() % 2) * 4, 4, 4 + (rng() % 2) * 4);
    }
    // Random template-shaped layouts via the space builder.
    auto templates = build_layout_space(g, 1);
    SeqMap seqs;
    for (auto& [node2, t] : templates) {
      std::vector<int64_t> factors;
      for (const auto& td : t.tunables)
        factors.push_back(td.divisors[rng() % td.divisors.size()]);
      SeqMap s = decode_layout(g, t, factors);
      for (auto& [k, v] : s) seqs[k] = v;
    }
    check_oracle(g, seqs, {}, 1000 + iter);
  }
}
