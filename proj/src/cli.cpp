// SPDX-License-Identifier: Apache-2.0

#include "layoutforge/cli.hpp"

#include <filesystem>
#include <iostream>

#include "layoutforge/interp.hpp"
#include "layoutforge/json_io.hpp"
#include "layoutforge/log.hpp"

namespace lf {

namespace {

Graph load_graph(const std::string& path) {
  Graph g = graph_from_json(load_json_file(path));
  g = infer_shapes(g);
  auto violations = validate_graph(g);
  if (!violations.empty()) {
    std::string msg = "graph validation failed:";
    for (const auto& v : violations) msg += "\n  " + v;
    throw Error(msg);
  }
  return g;
}

// Worst tolerance violation across tensors; int32 tensors must match
// exactly, float32 within 1e-5 relative.
bool oracle_matches(const Graph& g, const BufferMap& ref, const BufferMap& got,
                    double* worst_out) {
  bool ok = true;
  double worst = 0;
  for (const auto& [id, vr] : ref) {
    auto it = got.find(id);
    if (it == got.end()) continue;
    const auto& vg = it->second;
    if (vr.size() != vg.size()) return false;
    double tol = g.tensor(id).dtype == DType::Int32 ? 0.0 : 1e-5;
    for (size_t i = 0; i < vr.size(); ++i) {
      double scale = std::max({1.0, std::abs(vr[i]), std::abs(vg[i])});
      double d = std::abs(vr[i] - vg[i]) / scale;
      worst = std::max(worst, d);
      if (d > tol) ok = false;
    }
  }
  if (worst_out) *worst_out = worst;
  return ok;
}

}  // namespace

int cmd_compile(const CompileArgs& args) {
  Graph g;
  PropagationPlan plan;
  std::vector<LoopSchedule> schedules;
  Graph final_graph;
  try {
    g = load_graph(args.graph_path);
    if (!args.plan_path.empty()) plan = plan_from_json(load_json_file(args.plan_path), g);
    PropagationPlan plan_copy = plan;
    ConversionResult conv = insert_conversions(g, &plan_copy);
    plan = plan_copy;
    final_graph = conv.graph;
    if (!args.sched_path.empty())
      schedules = schedules_from_json(load_json_file(args.sched_path), final_graph);
  } catch (const Error& e) {
    LF_LOG_ERROR(e.what());
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    Program prog = lower(final_graph, plan.assignments, schedules);
    std::filesystem::create_directories(args.out_dir);
    write_text_file(args.out_dir + "/program.txt", dump_program(prog));

    BufferMap inputs = random_inputs(g, args.seed);
    BufferMap ref = reference_eval(g, inputs);
    InterpResult got = interpret(prog, inputs);
    double worst = 0;
    bool ok = oracle_matches(g, ref, got.outputs, &worst);
    Json verdict{{"oracle", ok ? "pass" : "fail"}, {"max_rel_diff", worst}, {"seed", args.seed}};
    write_json_file(args.out_dir + "/verdict.json", verdict);
    std::cout << "program: " << args.out_dir << "/program.txt\n";
    std::cout << "oracle: " << (ok ? "pass" : "fail") << " (max rel diff " << worst << ")\n";
    return ok ? 0 : 3;
  } catch (const Error& e) {
    LF_LOG_ERROR(e.what());
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

int cmd_tune(const TuneArgs& args) {
  try {
    Graph g = load_graph(args.graph_path);
    CacheConfig cfg;
    if (!args.cache_path.empty()) cfg = cache_config_from_json(load_json_file(args.cache_path));

    TuneOptions opts;
    opts.tiling_levels = args.tiling_levels;
    opts.parallel_eval = args.parallel;
    if (args.stage == "loop-only") {
      opts.joint_enabled = false;
      if (!args.plan_path.empty())
        opts.preset_plan = plan_from_json(load_json_file(args.plan_path), g);
    } else if (args.stage != "full") {
      throw Error("unknown --stage '" + args.stage + "'");
    }

    TuneResult r = tune(g, args.budget, cfg, opts);
    write_json_file(args.out_path, tune_result_to_json(r, g));
    std::cout << "best_cost: " << r.best_cost << "\n";
    std::cout << "counters: insts=" << r.best_counters.insts
              << " l1_loads=" << r.best_counters.l1_loads
              << " l1_misses=" << r.best_counters.l1_misses
              << " l1_stores=" << r.best_counters.l1_stores << "\n";
    std::cout << "report: " << args.out_path << "\n";
    return 0;
  } catch (const Error& e) {
    LF_LOG_ERROR(e.what());
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

int cmd_bench(const BenchArgs& args) {
  try {
    Graph g = load_graph(args.graph_path);
    CacheConfig cfg;
    if (!args.cache_path.empty()) cfg = cache_config_from_json(load_json_file(args.cache_path));

    struct Row {
      std::string name;
      double cost;
      ProfileCounters counters;
    };
    std::vector<Row> rows;
    for (const auto& path : args.plan_paths) {
      Json pj = load_json_file(path);
      std::string name = pj.value("name", path);
      TuneOptions opts;
      opts.joint_enabled = false;
      opts.preset_plan = plan_from_json(pj, g);
      Budget b;
      b.total = args.budget;
      b.joint = 0;
      b.loop_only = args.budget;
      b.seed = args.seed;
      TuneResult r = tune(g, b, cfg, opts);
      rows.push_back({name, r.best_cost, r.best_counters});
    }
    std::stable_sort(rows.begin(), rows.end(),
                     [](const Row& a, const Row& b) { return a.cost < b.cost; });
    Json table = Json::array();
    for (const auto& row : rows) {
      Json jr = counters_to_json(row.counters);
      jr["name"] = row.name;
      jr["cost"] = row.cost;
      table.push_back(jr);
    }
    write_json_file(args.out_path, Json{{"budget", args.budget}, {"rows", table}});
    for (const auto& row : rows)
      std::cout << row.name << ": cost=" << row.cost << " misses=" << row.counters.l1_misses
                << "\n";
    return 0;
  } catch (const Error& e) {
    LF_LOG_ERROR(e.what());
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace lf
