// SPDX-License-Identifier: Apache-2.0

#include "layoutforge/ir.hpp"

#include <algorithm>
#include <deque>
#include <set>
#include <sstream>

namespace lf {

const char* op_kind_name(OpKind k) {
  switch (k) {
    case OpKind::C2D: return "C2D";
    case OpKind::DEP: return "DEP";
    case OpKind::GMM: return "GMM";
    case OpKind::Padding: return "Padding";
    case OpKind::ReLU: return "ReLU";
    case OpKind::BiasAdd: return "BiasAdd";
    case OpKind::EwAdd: return "EwAdd";
    case OpKind::LayoutConvert: return "LayoutConvert";
  }
  return "?";
}

bool is_complex_op(OpKind k) {
  return k == OpKind::C2D || k == OpKind::DEP || k == OpKind::GMM;
}

bool is_elementwise_op(OpKind k) {
  return k == OpKind::ReLU || k == OpKind::BiasAdd || k == OpKind::EwAdd;
}

int Graph::tensor_index(const std::string& id) const {
  for (size_t i = 0; i < tensors.size(); ++i)
    if (tensors[i].id == id) return static_cast<int>(i);
  return -1;
}

const TensorDecl& Graph::tensor(const std::string& id) const {
  int i = tensor_index(id);
  if (i < 0) throw Error("unknown tensor '" + id + "'");
  return tensors[i];
}

TensorDecl& Graph::tensor(const std::string& id) {
  int i = tensor_index(id);
  if (i < 0) throw Error("unknown tensor '" + id + "'");
  return tensors[i];
}

bool Graph::has_tensor(const std::string& id) const { return tensor_index(id) >= 0; }

int Graph::producer_of(const std::string& id) const {
  for (size_t i = 0; i < nodes.size(); ++i)
    if (nodes[i].output == id) return static_cast<int>(i);
  return -1;
}

std::vector<int> Graph::consumers_of(const std::string& id) const {
  std::vector<int> out;
  for (size_t i = 0; i < nodes.size(); ++i)
    for (const auto& in : nodes[i].inputs)
      if (in == id) {
        out.push_back(static_cast<int>(i));
        break;
      }
  return out;
}

namespace {

int expected_arity(OpKind k) {
  switch (k) {
    case OpKind::C2D:
    case OpKind::DEP:
    case OpKind::GMM:
    case OpKind::BiasAdd:
    case OpKind::EwAdd:
      return 2;
    default:
      return 1;
  }
}

std::string node_label(const Graph& g, size_t i) {
  std::ostringstream os;
  os << "node#" << i << "(" << op_kind_name(g.nodes[i].kind) << "->" << g.nodes[i].output << ")";
  return os.str();
}

}  // namespace

std::vector<std::string> validate_graph(const Graph& g) {
  std::vector<std::string> violations;
  std::set<std::string> seen_ids;
  for (const auto& t : g.tensors) {
    if (!seen_ids.insert(t.id).second)
      violations.push_back("duplicate tensor id '" + t.id + "'");
    if (t.dims.empty()) violations.push_back("tensor '" + t.id + "' has no dims");
    for (const auto& d : t.dims)
      if (d.extent < 1)
        violations.push_back("tensor '" + t.id + "' dim " + d.name + " extent < 1");
  }
  std::set<std::string> produced;
  std::set<std::string> outputs_seen;
  for (size_t i = 0; i < g.nodes.size(); ++i) {
    const auto& n = g.nodes[i];
    if (static_cast<int>(n.inputs.size()) != expected_arity(n.kind))
      violations.push_back("arity: " + node_label(g, i) + " expects " +
                           std::to_string(expected_arity(n.kind)) + " inputs, got " +
                           std::to_string(n.inputs.size()));
    for (const auto& in : n.inputs) {
      if (!g.has_tensor(in)) {
        violations.push_back("dangling tensor: " + node_label(g, i) + " consumes unknown '" + in + "'");
        continue;
      }
      Role r = g.tensor(in).role;
      bool external = r == Role::Input || r == Role::Constant;
      if (!external && !produced.count(in))
        violations.push_back("cycle/order: " + node_label(g, i) + " consumes '" + in +
                             "' before it is produced");
    }
    if (!g.has_tensor(n.output)) {
      violations.push_back("dangling tensor: " + node_label(g, i) + " produces unknown '" +
                           n.output + "'");
    } else {
      Role r = g.tensor(n.output).role;
      if (r == Role::Input || r == Role::Constant)
        violations.push_back(node_label(g, i) + " writes a graph " +
                             (r == Role::Input ? std::string("input") : std::string("constant")));
    }
    if (!outputs_seen.insert(n.output).second)
      violations.push_back("tensor '" + n.output + "' produced twice");
    produced.insert(n.output);
    if ((n.kind == OpKind::C2D || n.kind == OpKind::DEP) && n.attr("stride", 1) < 1)
      violations.push_back(node_label(g, i) + " stride < 1");
  }
  return violations;
}

namespace {

std::vector<int64_t> extents(const TensorDecl& t) {
  std::vector<int64_t> e;
  for (const auto& d : t.dims) e.push_back(d.extent);
  return e;
}

void expect_rank(const Graph& g, size_t node, const std::string& id, size_t rank) {
  if (g.tensor(id).dims.size() != rank)
    throw Error("shape mismatch at " + node_label(g, node) + ": '" + id + "' must be rank " +
                std::to_string(rank));
}

void assign_shape(Graph& g, size_t node, const std::string& id,
                  const std::vector<int64_t>& want) {
  TensorDecl& t = g.tensor(id);
  if (t.dims.size() != want.size())
    throw Error("shape mismatch at " + node_label(g, node) + ": '" + id + "' rank " +
                std::to_string(t.dims.size()) + " vs inferred " + std::to_string(want.size()));
  for (size_t i = 0; i < want.size(); ++i) {
    if (t.dims[i].extent == 0) {
      t.dims[i].extent = want[i];
    } else if (t.dims[i].extent != want[i]) {
      throw Error("shape mismatch at " + node_label(g, node) + ": '" + id + "' dim " +
                  t.dims[i].name + " is " + std::to_string(t.dims[i].extent) +
                  ", inferred " + std::to_string(want[i]));
    }
  }
}

}  // namespace

Graph infer_shapes(const Graph& g_in) {
  Graph g = g_in;
  for (size_t i = 0; i < g.nodes.size(); ++i) {
    const auto& n = g.nodes[i];
    if (static_cast<int>(n.inputs.size()) != expected_arity(n.kind))
      throw Error("shape inference requires valid arity at " + node_label(g, i));
    for (const auto& in : n.inputs)
      if (!g.has_tensor(in))
        throw Error("shape inference: " + node_label(g, i) + " consumes unknown '" + in + "'");
    if (!g.has_tensor(n.output))
      throw Error("shape inference: " + node_label(g, i) + " produces unknown '" + n.output + "'");
    switch (n.kind) {
      case OpKind::C2D: {
        expect_rank(g, i, n.inputs[0], 4);
        expect_rank(g, i, n.inputs[1], 4);
        auto in = extents(g.tensor(n.inputs[0]));
        auto ker = extents(g.tensor(n.inputs[1]));
        int64_t v = n.attr("stride", 1);
        if (ker[1] != in[1])
          throw Error("shape mismatch at " + node_label(g, i) + ": input channels " +
                      std::to_string(in[1]) + " vs kernel " + std::to_string(ker[1]));
        if (in[2] < ker[2] || in[3] < ker[3])
          throw Error("shape mismatch at " + node_label(g, i) + ": kernel larger than input");
        int64_t oh = (in[2] - ker[2]) / v + 1;
        int64_t ow = (in[3] - ker[3]) / v + 1;
        assign_shape(g, i, n.output, {in[0], ker[0], oh, ow});
        break;
      }
      case OpKind::DEP: {
        expect_rank(g, i, n.inputs[0], 4);
        expect_rank(g, i, n.inputs[1], 3);
        auto in = extents(g.tensor(n.inputs[0]));
        auto ker = extents(g.tensor(n.inputs[1]));
        int64_t v = n.attr("stride", 1);
        if (ker[0] != in[1])
          throw Error("shape mismatch at " + node_label(g, i) + ": channels " +
                      std::to_string(in[1]) + " vs kernel " + std::to_string(ker[0]));
        if (in[2] < ker[1] || in[3] < ker[2])
          throw Error("shape mismatch at " + node_label(g, i) + ": kernel larger than input");
        int64_t oh = (in[2] - ker[1]) / v + 1;
        int64_t ow = (in[3] - ker[2]) / v + 1;
        assign_shape(g, i, n.output, {in[0], in[1], oh, ow});
        break;
      }
      case OpKind::GMM: {
        expect_rank(g, i, n.inputs[0], 2);
        expect_rank(g, i, n.inputs[1], 2);
        auto a = extents(g.tensor(n.inputs[0]));
        auto b = extents(g.tensor(n.inputs[1]));
        if (a[1] != b[0])
          throw Error("shape mismatch at " + node_label(g, i) + ": K " + std::to_string(a[1]) +
                      " vs " + std::to_string(b[0]));
        assign_shape(g, i, n.output, {a[0], b[1]});
        break;
      }
      case OpKind::Padding: {
        expect_rank(g, i, n.inputs[0], 4);
        auto in = extents(g.tensor(n.inputs[0]));
        int64_t p = n.attr("pad", 0);
        assign_shape(g, i, n.output, {in[0], in[1], in[2] + 2 * p, in[3] + 2 * p});
        break;
      }
      case OpKind::BiasAdd: {
        auto in = extents(g.tensor(n.inputs[0]));
        expect_rank(g, i, n.inputs[1], 1);
        int64_t bias_len = g.tensor(n.inputs[1]).dims[0].extent;
        int64_t channel = in.size() == 4 ? in[1] : in.back();
        if (bias_len != channel)
          throw Error("shape mismatch at " + node_label(g, i) + ": bias length " +
                      std::to_string(bias_len) + " vs channel extent " + std::to_string(channel));
        assign_shape(g, i, n.output, in);
        break;
      }
      case OpKind::EwAdd: {
        auto a = extents(g.tensor(n.inputs[0]));
        auto b = extents(g.tensor(n.inputs[1]));
        if (a != b)
          throw Error("shape mismatch at " + node_label(g, i) + ": EwAdd operands differ");
        assign_shape(g, i, n.output, a);
        break;
      }
      case OpKind::ReLU:
      case OpKind::LayoutConvert: {
        assign_shape(g, i, n.output, extents(g.tensor(n.inputs[0])));
        break;
      }
    }
  }
  return g;
}

std::vector<int> topo_order(const Graph& g) {
  size_t n = g.nodes.size();
  std::vector<int> indegree(n, 0);
  std::vector<std::vector<int>> succ(n);
  for (size_t i = 0; i < n; ++i) {
    int prod = g.producer_of(g.nodes[i].output);
    (void)prod;
    for (const auto& in : g.nodes[i].inputs) {
      int p = g.producer_of(in);
      if (p >= 0 && p != static_cast<int>(i)) {
        succ[p].push_back(static_cast<int>(i));
        ++indegree[i];
      }
    }
  }
  // Kahn's algorithm with an ordered ready set = insertion-order tie break.
  std::set<int> ready;
  for (size_t i = 0; i < n; ++i)
    if (indegree[i] == 0) ready.insert(static_cast<int>(i));
  std::vector<int> order;
  while (!ready.empty()) {
    int i = *ready.begin();
    ready.erase(ready.begin());
    order.push_back(i);
    for (int s : succ[i])
      if (--indegree[s] == 0) ready.insert(s);
  }
  if (order.size() != n) throw Error("topo_order: graph has a cycle");
  return order;
}

}  // namespace lf
