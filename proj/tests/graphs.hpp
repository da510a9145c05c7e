// SPDX-License-Identifier: Apache-2.0
//
// Shared micrograph builders for the test suites.

#pragma once

#include "layoutforge/ir.hpp"

namespace lf::testing {

inline TensorDecl tensor(const std::string& id, std::vector<Dim> dims, Role role,
                         DType dtype = DType::Float32) {
  TensorDecl t;
  t.id = id;
  t.dims = std::move(dims);
  t.role = role;
  t.dtype = dtype;
  return t;
}

inline OperatorNode node(OpKind kind, std::vector<std::string> inputs, std::string output,
                         std::map<std::string, int64_t> attrs = {}) {
  OperatorNode n;
  n.kind = kind;
  n.inputs = std::move(inputs);
  n.output = std::move(output);
  n.attrs = std::move(attrs);
  return n;
}

/// Padding -> C2D(kxk) -> BiasAdd -> ReLU. `h` is pre-padding height/width.
inline Graph conv_chain(int64_t n, int64_t ci, int64_t co, int64_t h, int64_t k, int64_t stride,
                        int64_t pad, DType dtype = DType::Float32) {
  Graph g;
  int64_t hp = h + 2 * pad;
  int64_t ho = (hp - k) / stride + 1;
  g.tensors = {
      tensor("x", {{"N", n}, {"I", ci}, {"H", h}, {"W", h}}, Role::Input, dtype),
      tensor("ker", {{"O", co}, {"I", ci}, {"KH", k}, {"KW", k}}, Role::Constant, dtype),
      tensor("bias", {{"O", co}}, Role::Constant, dtype),
      tensor("xp", {{"N", n}, {"I", ci}, {"H", hp}, {"W", hp}}, Role::Intermediate, dtype),
      tensor("conv", {{"N", n}, {"O", co}, {"H", ho}, {"W", ho}}, Role::Intermediate, dtype),
      tensor("biased", {{"N", n}, {"O", co}, {"H", ho}, {"W", ho}}, Role::Intermediate, dtype),
      tensor("y", {{"N", n}, {"O", co}, {"H", ho}, {"W", ho}}, Role::Output, dtype),
  };
  g.nodes = {
      node(OpKind::Padding, {"x"}, "xp", {{"pad", pad}}),
      node(OpKind::C2D, {"xp", "ker"}, "conv", {{"stride", stride}}),
      node(OpKind::BiasAdd, {"conv", "bias"}, "biased"),
      node(OpKind::ReLU, {"biased"}, "y"),
  };
  return g;
}

/// Padding -> DEP(kxk) -> ReLU.
inline Graph dep_chain(int64_t n, int64_t c, int64_t h, int64_t k, int64_t stride, int64_t pad) {
  Graph g;
  int64_t hp = h + 2 * pad;
  int64_t ho = (hp - k) / stride + 1;
  g.tensors = {
      tensor("x", {{"N", n}, {"C", c}, {"H", h}, {"W", h}}, Role::Input),
      tensor("ker", {{"C", c}, {"KH", k}, {"KW", k}}, Role::Constant),
      tensor("xp", {{"N", n}, {"C", c}, {"H", hp}, {"W", hp}}, Role::Intermediate),
      tensor("conv", {{"N", n}, {"C", c}, {"H", ho}, {"W", ho}}, Role::Intermediate),
      tensor("y", {{"N", n}, {"C", c}, {"H", ho}, {"W", ho}}, Role::Output),
  };
  g.nodes = {
      node(OpKind::Padding, {"x"}, "xp", {{"pad", pad}}),
      node(OpKind::DEP, {"xp", "ker"}, "conv", {{"stride", stride}}),
      node(OpKind::ReLU, {"conv"}, "y"),
  };
  return g;
}

/// GMM -> BiasAdd -> ReLU.
inline Graph gmm_chain(int64_t m, int64_t k, int64_t n) {
  Graph g;
  g.tensors = {
      tensor("a", {{"M", m}, {"K", k}}, Role::Input),
      tensor("b", {{"K", k}, {"N", n}}, Role::Constant),
      tensor("bias", {{"N", n}}, Role::Constant),
      tensor("c", {{"M", m}, {"N", n}}, Role::Intermediate),
      tensor("biased", {{"M", m}, {"N", n}}, Role::Intermediate),
      tensor("y", {{"M", m}, {"N", n}}, Role::Output),
  };
  g.nodes = {
      node(OpKind::GMM, {"a", "b"}, "c"),
      node(OpKind::BiasAdd, {"c", "bias"}, "biased"),
      node(OpKind::ReLU, {"biased"}, "y"),
  };
  return g;
}

/// Plain single-operator conv without padding: x (NIHW) * ker -> y.
inline Graph bare_conv(int64_t n, int64_t ci, int64_t co, int64_t hin, int64_t k,
                       int64_t stride) {
  Graph g;
  int64_t ho = (hin - k) / stride + 1;
  g.tensors = {
      tensor("x", {{"N", n}, {"I", ci}, {"H", hin}, {"W", hin}}, Role::Input),
      tensor("ker", {{"O", co}, {"I", ci}, {"KH", k}, {"KW", k}}, Role::Constant),
      tensor("y", {{"N", n}, {"O", co}, {"H", ho}, {"W", ho}}, Role::Output),
  };
  g.nodes = {node(OpKind::C2D, {"x", "ker"}, "y", {{"stride", stride}})};
  return g;
}

}  // namespace lf::testing
