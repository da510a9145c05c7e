// SPDX-License-Identifier: Apache-2.0

#include "layoutforge/propagation.hpp"

#include <algorithm>
#include <deque>
#include <set>

namespace lf {

namespace {

bool same_shape(const TensorDecl& a, const TensorDecl& b) {
  if (a.dims.size() != b.dims.size()) return false;
  for (size_t i = 0; i < a.dims.size(); ++i)
    if (a.dims[i].extent != b.dims[i].extent) return false;
  return true;
}

// Element-wise neighbors of a tensor: hops through ReLU/BiasAdd/EwAdd where
// the hopped-to tensor has the same shape.
std::vector<std::string> ew_neighbors(const Graph& g, const std::string& t, bool backward,
                                      bool forward) {
  std::vector<std::string> out;
  const TensorDecl& td = g.tensor(t);
  if (backward) {
    int p = g.producer_of(t);
    if (p >= 0 && is_elementwise_op(g.nodes[p].kind)) {
      const OperatorNode& n = g.nodes[p];
      size_t main_inputs = n.kind == OpKind::EwAdd ? 2 : 1;
      for (size_t i = 0; i < main_inputs; ++i)
        if (same_shape(g.tensor(n.inputs[i]), td)) out.push_back(n.inputs[i]);
    }
  }
  if (forward) {
    for (int c : g.consumers_of(t)) {
      const OperatorNode& n = g.nodes[c];
      if (!is_elementwise_op(n.kind)) continue;
      size_t main_inputs = n.kind == OpKind::EwAdd ? 2 : 1;
      bool via_main = false;
      for (size_t i = 0; i < main_inputs; ++i)
        if (n.inputs[i] == t) via_main = true;
      if (via_main && same_shape(g.tensor(n.output), td)) out.push_back(n.output);
    }
  }
  return out;
}

}  // namespace

bool can_propagate(const Graph& g, const std::string& src, const std::string& dst,
                   const std::vector<LayoutPrimitive>& seq, std::string* reason) {
  if (!g.has_tensor(src) || !g.has_tensor(dst)) {
    if (reason) *reason = "unknown tensor";
    return false;
  }
  if (!seq_is_propagatable(seq, reason)) return false;
  if (src == dst) return true;
  // BFS over element-wise same-shape hops; complex operators never appear as
  // hops, which encodes the independence constraint.
  std::set<std::string> seen{src};
  std::deque<std::string> q{src};
  while (!q.empty()) {
    std::string t = q.front();
    q.pop_front();
    for (const auto& u : ew_neighbors(g, t, true, true)) {
      if (u == dst) return true;
      if (seen.insert(u).second) q.push_back(u);
    }
  }
  if (reason)
    *reason = "no element-wise same-shape path from '" + src + "' to '" + dst + "'";
  return false;
}

void LayoutPlanner::try_assign(const std::string& tensor,
                               const std::vector<LayoutPrimitive>& seq, int owner,
                               bool throw_on_conflict, std::vector<std::string>* frontier) {
  auto it = claims_.find(tensor);
  if (it == claims_.end()) {
    claims_[tensor] = {seq, owner};
    plan_.assignments[tensor] = seq;
    if (frontier) frontier->push_back(tensor);
    return;
  }
  if (seq_equal(it->second.seq, seq)) return;
  if (throw_on_conflict)
    throw Error("layout conflict on '" + tensor + "': already assigned by op#" +
                std::to_string(it->second.owner) + ", new assignment from op#" +
                std::to_string(owner));
  // Conflicts inside a spread stop quietly; the operator-level conflict
  // handler decides where the conversion goes.
}

void LayoutPlanner::spread(const std::string& tensor, const std::vector<LayoutPrimitive>& seq,
                           int owner, Direction dir, bool throw_on_conflict) {
  if (seq.empty()) return;
  std::string reason;
  if (!seq_is_propagatable(seq, &reason)) return;  // stays local to `tensor`

  bool backward = dir == Direction::Backward || dir == Direction::Both;
  bool forward = dir == Direction::Forward || dir == Direction::Both;
  std::deque<std::string> q{tensor};
  std::set<std::string> visited{tensor};
  while (!q.empty()) {
    std::string t = q.front();
    q.pop_front();

    if (backward) {
      int p = g_.producer_of(t);
      if (p >= 0 && is_elementwise_op(g_.nodes[p].kind)) {
        const OperatorNode& n = g_.nodes[p];
        size_t main_inputs = n.kind == OpKind::EwAdd ? 2 : 1;
        for (size_t i = 0; i < main_inputs; ++i) {
          const std::string& u = n.inputs[i];
          if (!same_shape(g_.tensor(u), g_.tensor(t))) continue;
          // Tensors produced by complex operators are tuned independently;
          // their layouts are never dictated by a neighbor.
          int up = g_.producer_of(u);
          if (up >= 0 && is_complex_op(g_.nodes[up].kind)) continue;
          std::vector<std::string> added;
          try_assign(u, seq, owner, throw_on_conflict, &added);
          for (auto& a : added)
            if (visited.insert(a).second) q.push_back(a);
        }
      }
    }
    if (forward) {
      for (int c : g_.consumers_of(t)) {
        const OperatorNode& n = g_.nodes[c];
        if (!is_elementwise_op(n.kind)) continue;
        if (!same_shape(g_.tensor(n.output), g_.tensor(t))) continue;
        size_t main_inputs = n.kind == OpKind::EwAdd ? 2 : 1;
        bool via_main = false;
        size_t via_slot = 0;
        for (size_t i = 0; i < main_inputs; ++i)
          if (n.inputs[i] == t) {
            via_main = true;
            via_slot = i;
          }
        if (!via_main) continue;

        std::vector<LayoutPrimitive> winning = seq;
        int win_owner = owner;
        if (n.kind == OpKind::EwAdd && via_slot == 1) {
          // First input wins when both producers are tuned.
          auto c0 = claims_.find(n.inputs[0]);
          if (c0 != claims_.end() && !seq_equal(c0->second.seq, seq)) {
            winning = c0->second.seq;
            win_owner = c0->second.owner;
            plan_.conversions.push_back({t, c, winning});
          }
        }
        auto yc = claims_.find(n.output);
        if (yc != claims_.end() && !seq_equal(yc->second.seq, winning)) {
          if (n.kind == OpKind::EwAdd && via_slot == 0) {
            // Our tensor is the first input: it takes precedence, the other
            // tuned input receives the conversion.
            auto c1 = claims_.find(n.inputs[1]);
            if (c1 != claims_.end() && !seq_equal(c1->second.seq, winning))
              plan_.conversions.push_back({n.inputs[1], c, winning});
            claims_[n.output] = {winning, win_owner};
            plan_.assignments[n.output] = winning;
            if (visited.insert(n.output).second) q.push_back(n.output);
          } else if (throw_on_conflict) {
            throw Error("layout conflict on '" + n.output + "': already assigned by op#" +
                        std::to_string(yc->second.owner) + ", new assignment from op#" +
                        std::to_string(win_owner));
          }
          continue;
        }
        std::vector<std::string> added;
        try_assign(n.output, winning, win_owner, throw_on_conflict, &added);
        for (auto& a : added)
          if (visited.insert(a).second) q.push_back(a);
      }
    }
  }
}

void LayoutPlanner::handle_input_conflict(int node, const std::string& tensor,
                                          const std::vector<LayoutPrimitive>& want) {
  // Walk the linear element-wise chain feeding `tensor` while it stays
  // claimed by one other owner; split it at the midpoint edge when the
  // wanted sequence may propagate, otherwise convert right at the operator.
  const Claim& existing = claims_.at(tensor);
  std::string why;
  bool propagatable = seq_is_propagatable(want, &why);

  std::vector<std::string> chain{tensor};  // tensor, then upstream
  if (propagatable) {
    std::string cur = tensor;
    while (true) {
      int p = g_.producer_of(cur);
      if (p < 0 || !is_elementwise_op(g_.nodes[p].kind)) break;
      const OperatorNode& pn = g_.nodes[p];
      if (pn.kind == OpKind::EwAdd) break;  // branching: keep the boundary
      const std::string& u = pn.inputs[0];
      if (!same_shape(g_.tensor(u), g_.tensor(cur))) break;
      auto it = claims_.find(u);
      if (it == claims_.end() || it->second.owner != existing.owner ||
          !seq_equal(it->second.seq, existing.seq))
        break;
      if (g_.consumers_of(u).size() != 1) break;  // non-linear
      chain.push_back(u);
      cur = u;
    }
  }

  // chain = [t_k .. t_0] downstream-to-upstream; edges include (t_k -> node).
  // Midpoint edge index over k+1 candidate edges, counted from the upstream
  // end; index k converts directly before `node`.
  size_t k = chain.size() - 1;
  size_t edge = propagatable ? (k + 1) / 2 : k;

  if (edge == k) {
    plan_.conversions.push_back({tensor, node, want});
    return;
  }
  // Re-claim the downstream part [t_k .. t_{edge}] to the wanted layout and
  // convert at the edge feeding t_{edge}'s producer.
  for (size_t i = 0; i <= k - edge; ++i) {
    const std::string& t = chain[i];
    claims_[t] = {want, node};
    plan_.assignments[t] = want;
  }
  const std::string& boundary_src = chain[k - edge + 1];
  int boundary_consumer = g_.producer_of(chain[k - edge]);
  plan_.conversions.push_back({boundary_src, boundary_consumer, want});
}

void LayoutPlanner::claim_operator(int node, const SeqMap& op_seqs) {
  const OperatorNode& n = g_.nodes[node];
  // Output first, then inputs, mirroring the output-first rewriting rule.
  std::vector<std::string> order{n.output};
  order.insert(order.end(), n.inputs.begin(), n.inputs.end());
  for (const auto& t : order) {
    auto it = op_seqs.find(t);
    if (it == op_seqs.end() || it->second.empty()) continue;
    const auto& seq = it->second;
    auto existing = claims_.find(t);
    if (existing != claims_.end() && !seq_equal(existing->second.seq, seq)) {
      if (t == n.output)
        throw Error("layout conflict on output '" + t + "' of op#" + std::to_string(node));
      handle_input_conflict(node, t, seq);
      continue;
    }
    try_assign(t, seq, node, /*throw_on_conflict=*/true, nullptr);
    spread(t, seq, node, Direction::Both, /*throw_on_conflict=*/false);
  }
}

void propagate(const Graph& g, const std::string& src, const std::vector<LayoutPrimitive>& seq,
               Direction dir, PropagationPlan* plan) {
  LayoutPlanner planner(g);
  // Seed with the caller's existing assignments so conflicts are visible.
  for (const auto& [t, s] : plan->assignments) planner.claims_[t] = {s, -1};
  planner.plan_ = *plan;
  if (seq.empty()) return;
  planner.try_assign(src, seq, -1, /*throw_on_conflict=*/true, nullptr);
  planner.spread(src, seq, -1, dir, /*throw_on_conflict=*/true);
  *plan = planner.take_plan();
}

ConversionResult insert_conversions(const Graph& g, PropagationPlan* plan) {
  ConversionResult r;
  r.graph.tensors = g.tensors;
  r.node_map.assign(g.nodes.size(), -1);

  // Conversion tensors appended in a deterministic order.
  std::vector<ConversionSpec> sorted = plan->conversions;
  std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
    return a.consumer < b.consumer;
  });

  int serial = 0;
  std::map<int, std::vector<std::pair<std::string, std::string>>> rewires;  // consumer -> (old,new)
  std::vector<std::pair<int, OperatorNode>> converts;  // insert before consumer
  for (const auto& cv : sorted) {
    const TensorDecl& src = g.tensor(cv.tensor);
    TensorDecl t;
    t.id = cv.tensor + "__cv" + std::to_string(serial++);
    t.dims = src.dims;
    t.dtype = src.dtype;
    t.role = Role::Intermediate;
    r.graph.tensors.push_back(t);

    OperatorNode conv;
    conv.kind = OpKind::LayoutConvert;
    conv.inputs = {cv.tensor};
    conv.output = t.id;
    converts.emplace_back(cv.consumer, conv);
    rewires[cv.consumer].emplace_back(cv.tensor, t.id);
    plan->assignments[t.id] = cv.to_seq;
  }

  for (size_t i = 0; i < g.nodes.size(); ++i) {
    for (auto& [consumer, conv] : converts)
      if (consumer == static_cast<int>(i)) {
        r.graph.nodes.push_back(conv);
        consumer = -2;  // consumed
      }
    OperatorNode n = g.nodes[i];
    auto rw = rewires.find(static_cast<int>(i));
    if (rw != rewires.end())
      for (auto& in : n.inputs)
        for (const auto& [from, to] : rw->second)
          if (in == from) in = to;
    r.node_map[i] = static_cast<int>(r.graph.nodes.size());
    r.graph.nodes.push_back(n);
  }
  return r;
}

}  // namespace lf
