// SPDX-License-Identifier: Apache-2.0
//
// Computational graph: tensors, operators, validation, shape inference and
// topological ordering.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace lf {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Dim {
  std::string name;
  int64_t extent = 0;
};

enum class DType : uint8_t { Float32, Int32 };
enum class Role : uint8_t { Input, Constant, Intermediate, Output };

struct TensorDecl {
  std::string id;
  std::vector<Dim> dims;
  DType dtype = DType::Float32;
  Role role = Role::Intermediate;

  int64_t num_elements() const {
    int64_t n = 1;
    for (const auto& d : dims) n *= d.extent;
    return n;
  }
};

enum class OpKind : uint8_t { C2D, DEP, GMM, Padding, ReLU, BiasAdd, EwAdd, LayoutConvert };

const char* op_kind_name(OpKind k);
bool is_complex_op(OpKind k);
/// Same-shape single-valued mapping between output and (main) inputs.
bool is_elementwise_op(OpKind k);

struct OperatorNode {
  OpKind kind = OpKind::ReLU;
  std::map<std::string, int64_t> attrs;  // "stride" for convs, "pad" for Padding
  std::vector<std::string> inputs;
  std::string output;

  int64_t attr(const std::string& key, int64_t fallback) const {
    auto it = attrs.find(key);
    return it == attrs.end() ? fallback : it->second;
  }
};

struct Graph {
  std::vector<TensorDecl> tensors;  // declaration order fixes simulator addresses
  std::vector<OperatorNode> nodes;

  int tensor_index(const std::string& id) const;
  const TensorDecl& tensor(const std::string& id) const;
  TensorDecl& tensor(const std::string& id);
  bool has_tensor(const std::string& id) const;

  /// Index of the node producing `id`, or -1 for graph inputs/constants.
  int producer_of(const std::string& id) const;
  std::vector<int> consumers_of(const std::string& id) const;
};

/// Every invariant violation found, or empty when the graph is well formed.
std::vector<std::string> validate_graph(const Graph& g);

/// Resolves intermediate/output extents from graph inputs. Idempotent.
/// Throws Error naming the node on inconsistent extents.
Graph infer_shapes(const Graph& g);

/// Producers before consumers; ties broken by node insertion order.
std::vector<int> topo_order(const Graph& g);

}  // namespace lf
