// SPDX-License-Identifier: Apache-2.0
//
// layoutforge: compile, tune and bench tensor graphs against the cache
// simulator.

#include <CLI11.hpp>

#include "layoutforge/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"layoutforge: joint layout and loop tuning at desk scale"};
  app.require_subcommand(1);

  lf::CompileArgs cargs;
  auto* compile = app.add_subcommand("compile", "lower a graph with a plan and schedules");
  compile->add_option("--graph", cargs.graph_path, "graph JSON")->required();
  compile->add_option("--plan", cargs.plan_path, "layout plan JSON");
  compile->add_option("--sched", cargs.sched_path, "loop schedules JSON");
  compile->add_option("-o,--out", cargs.out_dir, "output directory")->required();
  compile->add_option("--seed", cargs.seed, "oracle input seed");

  lf::TuneArgs targs;
  auto* tune = app.add_subcommand("tune", "run the two-stage auto-tuner");
  tune->add_option("--graph", targs.graph_path, "graph JSON")->required();
  tune->add_option("--budget", targs.budget.total, "total simulator measurements");
  tune->add_option("--joint", targs.budget.joint, "joint-stage share of the budget");
  tune->add_option("--batch", targs.budget.batch, "sampling batch size");
  tune->add_option("--top-k", targs.budget.top_k, "measured points per batch/episode");
  tune->add_option("--episode", targs.budget.episode, "episode length");
  tune->add_option("--rounds", targs.budget.rounds, "loop rounds per layout proposal");
  tune->add_option("--seed", targs.budget.seed, "RNG seed");
  tune->add_option("--cache", targs.cache_path, "cache config JSON");
  tune->add_option("--stage", targs.stage, "full | loop-only");
  tune->add_option("--plan", targs.plan_path, "plan JSON for --stage loop-only");
  tune->add_option("--tiling-levels", targs.tiling_levels, "layout tiling levels (1 or 2)");
  tune->add_flag("--parallel", targs.parallel, "evaluate candidate batches in parallel");
  tune->add_option("-o,--out", targs.out_path, "report JSON path")->required();

  lf::BenchArgs bargs;
  auto* bench = app.add_subcommand("bench", "compare named layout plans at equal budget");
  bench->add_option("--graph", bargs.graph_path, "graph JSON")->required();
  bench->add_option("--plans", bargs.plan_paths, "plan JSON files")->required();
  bench->add_option("--budget", bargs.budget, "loop-tuning budget per plan");
  bench->add_option("--cache", bargs.cache_path, "cache config JSON");
  bench->add_option("--seed", bargs.seed, "RNG seed");
  bench->add_option("-o,--out", bargs.out_path, "table JSON path")->required();

  CLI11_PARSE(app, argc, argv);

  if (compile->parsed()) {
    // The loop-only budget split default must stay consistent if only
    // --budget was given.
    return lf::cmd_compile(cargs);
  }
  if (tune->parsed()) {
    if (!tune->count("--joint")) {
      // Scale the default 96/256 split to the requested total.
      targs.budget.joint = targs.budget.total * 3 / 8;
    }
    targs.budget.loop_only = targs.budget.total - targs.budget.joint;
    return lf::cmd_tune(targs);
  }
  return lf::cmd_bench(bargs);
}
