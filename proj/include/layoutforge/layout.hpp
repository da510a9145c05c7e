// SPDX-License-Identifier: Apache-2.0
//
// Layout primitives (split/reorder/fuse/unfold/pad/store_at and inverses),
// shape derivation, sequence inversion and access-expression rewriting.

#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "layoutforge/expr.hpp"
#include "layoutforge/ir.hpp"

namespace lf {

enum class PrimKind : uint8_t {
  Split,
  Reorder,
  Fuse,
  Unfold,
  Pad,
  StoreAt,
  Fold,
  Unpad,
  DecoupleAt,
};

const char* prim_kind_name(PrimKind k);

/// One layout primitive. Dim indices are 0-based here; the JSON layer uses
/// 1-based indices to match the written convention.
struct LayoutPrimitive {
  PrimKind kind = PrimKind::Reorder;
  int dim = 0;                    // split/unfold/pad/store_at/fold/unpad anchor
  std::vector<int64_t> factors;   // split
  std::vector<int> perm;          // reorder: new dim j reads old dim perm[j]
  int span = 0;                   // fuse/fold/decouple_at: number of dims merged
  int64_t tile = 0, stride = 0;   // unfold B, S (fold reuses both)
  int64_t pad = 0;                // pad/unpad size
  int64_t orig_extent = 0;        // fold: extent of the refolded dimension
  std::string target;             // store_at target tensor id

  static LayoutPrimitive split(int dim, std::vector<int64_t> factors);
  static LayoutPrimitive reorder(std::vector<int> perm);
  static LayoutPrimitive fuse(int first_dim, int count);
  static LayoutPrimitive unfold(int dim, int64_t tile, int64_t stride);
  static LayoutPrimitive padding(int dim, int64_t size);
  static LayoutPrimitive store_at(std::string target, int dim);
};

struct PrimitiveSeq {
  std::string tensor;
  std::vector<LayoutPrimitive> prims;

  bool empty() const { return prims.empty(); }
};

/// Hints for the sliding-window (Eq.-style) unfold rewrite: the reduction
/// variables of the enclosing operator and their extents (window sizes).
struct WindowHints {
  std::vector<std::pair<int, int64_t>> reduction_vars;  // (var_id, extent)
};

/// Shape effect of one primitive. Throws Error on precondition violations.
std::vector<Dim> apply_primitive_shape(const std::vector<Dim>& dims,
                                       const LayoutPrimitive& p);

/// Access-index effect of one primitive: rewrites per-dimension index
/// expressions from the pre-primitive space into the post-primitive space.
/// `dims` is the shape the primitive is applied to.
std::vector<Expr> apply_primitive_access(const std::vector<Expr>& idxs,
                                         const std::vector<Dim>& dims,
                                         const LayoutPrimitive& p,
                                         const WindowHints* hints = nullptr);

/// Applies a whole sequence left to right. StoreAt cannot be resolved without
/// graph context and throws here.
std::vector<Dim> derive_layout(const std::vector<Dim>& original,
                               const std::vector<LayoutPrimitive>& seq);

std::vector<Expr> rewrite_access(const std::vector<Expr>& idxs,
                                 const std::vector<Dim>& original,
                                 const std::vector<LayoutPrimitive>& seq,
                                 const WindowHints* hints = nullptr);

/// Inverse sequence: applying seq then its inverse is the identity on shapes,
/// and on indices for basic primitives (pad: identity on the unpadded region;
/// unfold: identity through the canonical covering tile).
std::vector<LayoutPrimitive> invert_sequence(const std::vector<Dim>& original,
                                             const std::vector<LayoutPrimitive>& seq);

bool is_basic_primitive(const LayoutPrimitive& p);
/// True when propagation may carry the primitive (basic, or size-0 pad).
bool is_propagatable(const LayoutPrimitive& p);
bool seq_is_propagatable(const std::vector<LayoutPrimitive>& seq, std::string* reason);
bool seq_equal(const std::vector<LayoutPrimitive>& a, const std::vector<LayoutPrimitive>& b);

/// store_at as a standalone tensor-pair operation: returns the fused decl.
/// src must equal dst with `dim` removed; the fused tensor appends one slot
/// along `dim` holding src.
struct StoreAtResult {
  TensorDecl fused;
  // src logical index -> fused index (inserts the constant slot at `dim`).
  std::vector<Expr> map_src(const std::vector<Expr>& idxs) const;
  // dst logical index -> fused index (unchanged).
  std::vector<Expr> map_dst(const std::vector<Expr>& idxs) const;
  int dim = 0;
  int64_t slot = 0;  // index of the appended position
};
StoreAtResult apply_store_at(const TensorDecl& src, const TensorDecl& dst, int dim);

}  // namespace lf
