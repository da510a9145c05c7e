// SPDX-License-Identifier: Apache-2.0
//
// Access-rewriting pass, per-operator loop nests, loop primitives and
// lowering of a scheduled graph to the Program IR.

#pragma once

#include <map>
#include <string>
#include <vector>

#include "layoutforge/program.hpp"

namespace lf {

using SeqMap = std::map<std::string, std::vector<LayoutPrimitive>>;

/// Applies every sequence to its tensor declaration (folding store_at
/// offline) and reports the per-tensor transformation metadata.
struct PassResult {
  Graph transformed;                 // decls carry the derived layouts
  std::vector<ProgTensor> tensors;   // same order as g.tensors
};
PassResult rewrite_accesses_pass(const Graph& g, const SeqMap& seqs);

struct LoopVar {
  int id = -1;
  std::string name;
  int64_t extent = 0;
  bool reduction = false;
  Annotation ann = Annotation::None;
  /// Alignment identity for compute_at: transformed-output-dim origin plus
  /// the split trail, e.g. "d2" -> "d2.o4" / "d2.i4".
  std::string origin;
};

/// One operator's loops and rewritten accesses. The loop order is the list
/// order; reduction loops may be interleaved with spatial ones by reorder.
struct LoopNest {
  int node = -1;
  OpKind op = OpKind::ReLU;
  std::vector<LoopVar> loops;
  int next_var_id = 0;  // private id pool for later splits

  int out_slot = -1;
  std::vector<Expr> out_idxs;
  std::vector<int> in_slots;
  std::vector<std::vector<Expr>> in_idxs;
  std::vector<Stmt::Cond> guard;  // Padding interior test
  int64_t guard_offset = 0;       // pad amount (interior load shift)

  int spatial_count() const;
  const LoopVar* find(const std::string& name) const;
};

/// Builds the nest for one node: one spatial loop per transformed output
/// dimension, reduction loops appended, accesses rewritten through the
/// tensors' sequences.
LoopNest build_loop_nest(const Graph& g, const PassResult& pass, int node, int* var_counter);

void loop_split(LoopNest* nest, const std::string& var, int64_t factor);
void loop_reorder(LoopNest* nest, const std::vector<std::string>& order);
void annotate(LoopNest* nest, const std::string& var, Annotation ann);

/// Number of leading loops (all spatial, matching origins and extents) the
/// two nests share; the maximum legal compute_at depth.
int alignment_depth(const LoopNest& producer, const LoopNest& consumer);

/// Producer inlined under the consumer's first `depth` loops. Throws Error
/// ("fusion-conflict") when the outer loops do not align.
struct FusedGroup {
  std::vector<LoopNest> members;  // producers first, consumer last
  int depth = 0;
};
FusedGroup compute_at(const LoopNest& producer, const LoopNest& consumer, int depth);

/// Statement tree for one nest (no fusion), or for a fused group.
std::vector<Stmt> emit_nest(const LoopNest& nest);
std::vector<Stmt> emit_group(const FusedGroup& group);

struct LoopSchedPrim {
  enum class Kind : uint8_t { Split, Reorder, Annotate, FuseConsumer };
  Kind kind = Kind::Split;
  std::string var;
  int64_t factor = 0;
  std::vector<std::string> order;
  Annotation ann = Annotation::None;
};

struct LoopSchedule {
  int node = -1;
  std::vector<LoopSchedPrim> prims;
};

/// Full pipeline: rewrite pass, nest construction, schedule application,
/// fusion groups, Program emission. Nodes appear in topological order.
Program lower(const Graph& g, const SeqMap& seqs, const std::vector<LoopSchedule>& schedules);

}  // namespace lf
