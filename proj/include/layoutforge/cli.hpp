// SPDX-License-Identifier: Apache-2.0
//
// Subcommand implementations behind the layoutforge binary. Library-level so
// tests can drive them directly. Exit codes: 0 success, 2 invalid input,
// 3 oracle mismatch.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "layoutforge/tuner.hpp"

namespace lf {

struct CompileArgs {
  std::string graph_path;
  std::string plan_path;   // optional
  std::string sched_path;  // optional
  std::string out_dir;
  uint64_t seed = 42;
};
int cmd_compile(const CompileArgs& args);

struct TuneArgs {
  std::string graph_path;
  std::string cache_path;  // optional
  std::string out_path;
  std::string plan_path;   // loop-only stage input
  std::string stage = "full";  // "full" | "loop-only"
  Budget budget;
  int tiling_levels = 1;
  bool parallel = false;
};
int cmd_tune(const TuneArgs& args);

struct BenchArgs {
  std::string graph_path;
  std::string cache_path;  // optional
  std::string out_path;
  std::vector<std::string> plan_paths;
  int budget = 64;
  uint64_t seed = 0;
};
int cmd_bench(const BenchArgs& args);

}  // namespace lf
