// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "graphs.hpp"
#include "layoutforge/cli.hpp"
#include "layoutforge/interp.hpp"
#include "layoutforge/json_io.hpp"

using namespace lf;
using namespace lf::testing;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("layoutforge_test_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void dump_graph(const Graph& g, const std::string& path) {
  write_json_file(path, graph_to_json(g));
}

}  // namespace

TEST_CASE("compile: empty plan and schedules produce a passing oracle") {
  TempDir td;
  dump_graph(conv_chain(1, 2, 4, 6, 3, 1, 1), td.file("g.json"));
  CompileArgs args;
  args.graph_path = td.file("g.json");
  args.out_dir = td.file("out");
  CHECK(cmd_compile(args) == 0);
  Json verdict = load_json_file(td.file("out") + "/verdict.json");
  CHECK(verdict.at("oracle") == "pass");
  CHECK(fs::exists(td.file("out") + "/program.txt"));
}

TEST_CASE("compile: corrupted JSON exits 2") {
  TempDir td;
  {
    std::ofstream out(td.file("bad.json"));
    out << "{not json";
  }
  CompileArgs args;
  args.graph_path = td.file("bad.json");
  args.out_dir = td.file("out");
  CHECK(cmd_compile(args) == 2);
}

TEST_CASE("compile: invalid graph exits 2") {
  TempDir td;
  Graph g = conv_chain(1, 2, 4, 6, 3, 1, 1);
  g.nodes[2].inputs = {"conv"};  // BiasAdd arity violation
  dump_graph(g, td.file("g.json"));
  CompileArgs args;
  args.graph_path = td.file("g.json");
  args.out_dir = td.file("out");
  CHECK(cmd_compile(args) == 2);
}

TEST_CASE("compile golden: motivating layout reproduces the seven-deep nest") {
  TempDir td;
  dump_graph(bare_conv(1, 2, 4, 10, 3, 1), td.file("g.json"));
  // Plan: spatially blocked output, overlapped-tiling input, packed weight.
  Json plan;
  plan["assignments"]["y"] = Json::parse(R"([
    {"op":"split","dim":2,"factors":[2,2]},
    {"op":"split","dim":4,"factors":[2,4]},
    {"op":"split","dim":6,"factors":[2,4]},
    {"op":"reorder","perm":[1,4,6,2,5,7,3]}
  ])");
  plan["assignments"]["x"] = Json::parse(R"([
    {"op":"unfold","dim":3,"tile":6,"stride":4},
    {"op":"unfold","dim":5,"tile":6,"stride":4},
    {"op":"reorder","perm":[1,3,5,2,4,6]}
  ])");
  plan["assignments"]["ker"] = Json::parse(R"([
    {"op":"split","dim":1,"factors":[2,2]},
    {"op":"reorder","perm":[1,3,4,5,2]}
  ])");
  write_json_file(td.file("plan.json"), plan);
  Json scheds = Json::parse(R"([
    {"output":"y","prims":[
      {"op":"reorder","order":["n","h0","w0","o0","h1","w1","ri","rh","rw","o1"]}
    ]}
  ])");
  write_json_file(td.file("sched.json"), scheds);

  CompileArgs args;
  args.graph_path = td.file("g.json");
  args.plan_path = td.file("plan.json");
  args.sched_path = td.file("sched.json");
  args.out_dir = td.file("out");
  REQUIRE(cmd_compile(args) == 0);
  std::string program = slurp(td.file("out") + "/program.txt");
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
  CHECK(program == want);
}

TEST_CASE("tune: fixed seed gives byte-identical reports") {
  TempDir td;
  dump_graph(conv_chain(1, 4, 4, 8, 3, 1, 1), td.file("g.json"));
  write_json_file(td.file("cache.json"),
                  Json{{"line_elems", 16}, {"num_lines", 64}, {"prefetch_lines", 4}});
  TuneArgs args;
  args.graph_path = td.file("g.json");
  args.cache_path = td.file("cache.json");
  args.budget.total = 24;
  args.budget.joint = 9;
  args.budget.loop_only = 15;
  args.budget.batch = 16;
  args.budget.top_k = 4;
  args.budget.seed = 7;
  args.out_path = td.file("r1.json");
  REQUIRE(cmd_tune(args) == 0);
  args.out_path = td.file("r2.json");
  REQUIRE(cmd_tune(args) == 0);
  CHECK(slurp(td.file("r1.json")) == slurp(td.file("r2.json")));
}

TEST_CASE("tune: invalid budget exits 2") {
  TempDir td;
  dump_graph(conv_chain(1, 4, 4, 8, 3, 1, 1), td.file("g.json"));
  TuneArgs args;
  args.graph_path = td.file("g.json");
  args.budget.total = 10;
  args.budget.joint = 9;
  args.budget.loop_only = 9;
  args.out_path = td.file("r.json");
  CHECK(cmd_tune(args) == 2);
}

TEST_CASE("tune report round-trips through compile with identical counters") {
  TempDir td;
  Graph g = conv_chain(1, 4, 8, 8, 3, 1, 1);
  dump_graph(g, td.file("g.json"));
  write_json_file(td.file("cache.json"), Json{{"num_lines", 64}});
  TuneArgs args;
  args.graph_path = td.file("g.json");
  args.cache_path = td.file("cache.json");
  args.budget.total = 24;
  args.budget.joint = 9;
  args.budget.loop_only = 15;
  args.budget.batch = 16;
  args.budget.top_k = 4;
  args.budget.seed = 3;
  args.out_path = td.file("report.json");
  REQUIRE(cmd_tune(args) == 0);

  Json report = load_json_file(td.file("report.json"));
  PropagationPlan plan = plan_from_json(report.at("plan"), g);
  PropagationPlan plan_copy = plan;
  ConversionResult conv = insert_conversions(g, &plan_copy);
  auto schedules = schedules_from_json(report.at("schedules"), conv.graph);
  Program prog = lower(conv.graph, plan_copy.assignments, schedules);
  CacheConfig cfg = cache_config_from_json(load_json_file(td.file("cache.json")));
  ProfileCounters c = simulate_cache(prog, cfg);
  CHECK(c.cost == report.at("best_cost").get<double>());
  CHECK(c.l1_misses == report.at("counters").at("l1_misses").get<int64_t>());
  CHECK(c.insts == report.at("counters").at("insts").get<int64_t>());
}

TEST_CASE("tune --stage loop-only consumes the whole budget without joint work") {
  TempDir td;
  Graph g = conv_chain(1, 4, 4, 8, 3, 1, 1);
  dump_graph(g, td.file("g.json"));
  write_json_file(td.file("plan.json"), Json{{"assignments", Json::object()}});
  TuneArgs args;
  args.graph_path = td.file("g.json");
  args.stage = "loop-only";
  args.plan_path = td.file("plan.json");
  args.budget.total = 16;
  args.budget.joint = 6;
  args.budget.loop_only = 10;
  args.budget.batch = 16;
  args.budget.top_k = 4;
  args.budget.seed = 5;
  args.out_path = td.file("r.json");
  REQUIRE(cmd_tune(args) == 0);
  Json report = load_json_file(td.file("r.json"));
  for (const auto& h : report.at("history")) CHECK(h.at("stage") == "loop-only");
  CHECK(report.at("sim_calls").get<int>() == 16);
}

TEST_CASE("bench: identical plans give identical counters; rows sorted by cost") {
  TempDir td;
  Graph g = conv_chain(1, 4, 8, 12, 3, 1, 1);
  dump_graph(g, td.file("g.json"));
  write_json_file(td.file("cache.json"), Json{{"num_lines", 64}});

  // NOHW identity plan under two names plus an NHWO plan.
  Json identity{{"name", "nohw"}, {"assignments", Json::object()}};
  write_json_file(td.file("p1.json"), identity);
  Json identity2 = identity;
  identity2["name"] = "nohw_again";
  write_json_file(td.file("p2.json"), identity2);
  Json nhwo{{"name", "nhwo"}, {"assignments", Json::object()}};
  nhwo["assignments"]["conv"] = Json::parse(R"([{"op":"reorder","perm":[1,3,4,2]}])");
  nhwo["assignments"]["biased"] = nhwo["assignments"]["conv"];
  nhwo["assignments"]["y"] = nhwo["assignments"]["conv"];
  write_json_file(td.file("p3.json"), nhwo);

  BenchArgs args;
  args.graph_path = td.file("g.json");
  args.cache_path = td.file("cache.json");
  args.plan_paths = {td.file("p1.json"), td.file("p2.json"), td.file("p3.json")};
  args.budget = 12;
  args.seed = 9;
  args.out_path = td.file("table.json");
  REQUIRE(cmd_bench(args) == 0);

  Json table = load_json_file(td.file("table.json"));
  REQUIRE(table.at("rows").size() == 3);
  double prev = -1;
  Json nohw_row, nohw_again_row;
  for (const auto& row : table.at("rows")) {
    CHECK(row.at("cost").get<double>() >= prev);
    prev = row.at("cost").get<double>();
    if (row.at("name") == "nohw") nohw_row = row;
    if (row.at("name") == "nohw_again") nohw_again_row = row;
  }
  CHECK(nohw_row.at("l1_misses") == nohw_again_row.at("l1_misses"));
  CHECK(nohw_row.at("cost") == nohw_again_row.at("cost"));
}

TEST_CASE("bench: invalid plan exits 2") {
  TempDir td;
  dump_graph(conv_chain(1, 4, 4, 8, 3, 1, 1), td.file("g.json"));
  write_json_file(td.file("p.json"),
                  Json{{"assignments", {{"conv", Json::parse(R"([{"op":"nope"}])")}}}});
  BenchArgs args;
  args.graph_path = td.file("g.json");
  args.plan_paths = {td.file("p.json")};
  args.out_path = td.file("t.json");
  CHECK(cmd_bench(args) == 2);
}
