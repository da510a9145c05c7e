// SPDX-License-Identifier: Apache-2.0
//
// Layout propagation along element-wise paths, claim tracking per complex
// operator, and conversion-operator insertion where propagation is blocked.

#pragma once

#include <map>
#include <string>
#include <vector>

#include "layoutforge/layout.hpp"
#include "layoutforge/lower.hpp"

namespace lf {

struct ConversionSpec {
  std::string tensor;  // converted tensor (original graph id)
  int consumer = -1;   // node index in the original graph
  std::vector<LayoutPrimitive> to_seq;
};

struct PropagationPlan {
  SeqMap assignments;
  std::vector<ConversionSpec> conversions;
};

enum class Direction : uint8_t { Forward, Backward, Both };

/// True iff an element-wise, shape-preserving path connects the two tensors,
/// the sequence carries no non-trivial advanced primitive, and no complex
/// operator sits on the path.
bool can_propagate(const Graph& g, const std::string& src, const std::string& dst,
                   const std::vector<LayoutPrimitive>& seq, std::string* reason = nullptr);

/// Copies `seq` onto every tensor reachable from `src` along element-wise
/// paths in the requested direction. Throws on a conflicting pre-existing
/// assignment, naming both owners.
void propagate(const Graph& g, const std::string& src, const std::vector<LayoutPrimitive>& seq,
               Direction dir, PropagationPlan* plan);

/// Incremental planner used by the tuner: complex operators claim their
/// tensor layouts in topological order; conflicts become conversions.
class LayoutPlanner {
 public:
  explicit LayoutPlanner(const Graph& g) : g_(g) {}

  /// Registers the tuned sequences of one complex operator (its inputs and
  /// output) and spreads propagatable ones.
  void claim_operator(int node, const SeqMap& op_seqs);

  const PropagationPlan& plan() const { return plan_; }
  PropagationPlan take_plan() { return std::move(plan_); }

 private:
  friend void propagate(const Graph&, const std::string&, const std::vector<LayoutPrimitive>&,
                        Direction, PropagationPlan*);

  struct Claim {
    std::vector<LayoutPrimitive> seq;
    int owner = -1;
  };

  void spread(const std::string& tensor, const std::vector<LayoutPrimitive>& seq, int owner,
              Direction dir, bool throw_on_conflict);
  void try_assign(const std::string& tensor, const std::vector<LayoutPrimitive>& seq, int owner,
                  bool throw_on_conflict, std::vector<std::string>* frontier);
  void handle_input_conflict(int node, const std::string& tensor,
                             const std::vector<LayoutPrimitive>& want);

  const Graph& g_;
  PropagationPlan plan_;
  std::map<std::string, Claim> claims_;
};

/// Splices a LayoutConvert node into every blocked edge. Conversion tensors
/// are appended to the declaration list as `<id>__cv<k>`; the plan's
/// assignments gain their sequences.
struct ConversionResult {
  Graph graph;
  std::vector<int> node_map;  // original node index -> new index
};
ConversionResult insert_conversions(const Graph& g, PropagationPlan* plan);

}  // namespace lf
