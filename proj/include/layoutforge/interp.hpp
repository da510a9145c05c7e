// SPDX-License-Identifier: Apache-2.0
//
// Correctness execution: a reference evaluator over the original graph and
// an interpreter for lowered programs, with layout materialization between
// the two worlds.

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "layoutforge/lower.hpp"
#include "layoutforge/program.hpp"

namespace lf {

/// Flat row-major buffers keyed by tensor id. int32 tensors use the same
/// double storage (exact below 2^53).
using BufferMap = std::map<std::string, std::vector<double>>;

/// Ground truth: straightforward per-operator nested loops on the original
/// (untransformed) graph. `inputs` must cover Input and Constant tensors.
/// Returns one buffer per node output.
BufferMap reference_eval(const Graph& g, const BufferMap& inputs);

/// Builds the physical (transformed-layout) buffer for one program tensor
/// from original-layout data, applying its primitive sequence step by step.
/// `raw` maps tensor ids to original buffers (used for store_at sources).
std::vector<double> materialize_tensor(const Program& p, int slot, const BufferMap& raw);

struct InterpResult {
  BufferMap outputs;                      // node outputs in original layouts
  std::map<std::string, int64_t> store_counts;  // executed stores per tensor
};

/// Executes a lowered program. Graph inputs and constants are supplied in
/// their original layouts and materialized into the transformed ones; node
/// outputs are converted back for comparison against reference_eval.
/// Out-of-range accesses throw Error naming the tensor and indices.
InterpResult interpret(const Program& p, const BufferMap& inputs);

/// Max |a-b| over all shared tensors, relative for float32-sized values.
double max_rel_diff(const BufferMap& a, const BufferMap& b);

/// Deterministic pseudo-random buffers for every Input/Constant tensor.
BufferMap random_inputs(const Graph& g, uint64_t seed);

}  // namespace lf
