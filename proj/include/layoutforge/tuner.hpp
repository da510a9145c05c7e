// SPDX-License-Identifier: Apache-2.0
//
// Two-stage joint tuner: the joint stage cross-explores layouts (each
// proposal scored by inner rounds of loop tuning), the loop-only stage
// freezes layouts and keeps walking the loop spaces.

#pragma once

#include <limits>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "layoutforge/cachesim.hpp"
#include "layoutforge/propagation.hpp"
#include "layoutforge/rl.hpp"
#include "layoutforge/space.hpp"
#include "layoutforge/surrogate.hpp"

namespace lf {

struct Budget {
  int total = 256;
  int joint = 96;
  int loop_only = 160;
  int batch = 128;
  int top_k = 8;
  int episode = 128;
  int rounds = 2;  // loop-exploration rounds per layout proposal
  uint64_t seed = 0;

  void validate() const {
    if (joint + loop_only != total)
      throw Error("budget: joint + loop_only must equal total");
    if (top_k > batch) throw Error("budget: top_k must not exceed batch");
    if (top_k < 1 || batch < 1) throw Error("budget: batch and top_k must be positive");
  }
};

struct TuneOptions {
  int tiling_levels = 1;
  bool parallel_eval = false;
  bool joint_enabled = true;           // false: loop-only on a given plan
  PropagationPlan preset_plan;         // used when joint_enabled is false
};

struct TuneHistoryEntry {
  int step = 0;
  std::string stage;
  double cost = 0;
};

/// r = U - l. U is kept as a running upper bound of observed costs so that
/// rewards stay non-negative; for layout agents l is the best cost across
/// the inner loop-exploration rounds of the proposal.
inline double compute_reward(double u, double l) { return u - l; }

struct TuneResult {
  PropagationPlan plan;
  std::vector<LoopSchedule> schedules;  // node indices refer to final_graph
  Graph final_graph;                    // original graph + conversion operators
  double best_cost = std::numeric_limits<double>::infinity();
  ProfileCounters best_counters;
  std::vector<TuneHistoryEntry> history;
  uint64_t seed = 0;
  int sim_calls = 0;
  int rebuilds_joint = 0;
  int rebuilds_loop_only = 0;
};

TuneResult tune(const Graph& g, const Budget& budget, const CacheConfig& cfg,
                const TuneOptions& opts = {});

}  // namespace lf
