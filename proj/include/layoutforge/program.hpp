// SPDX-License-Identifier: Apache-2.0
//
// Executable nested-loop statement IR plus the pseudocode dump used by
// golden-file tests.

#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "layoutforge/expr.hpp"
#include "layoutforge/ir.hpp"
#include "layoutforge/layout.hpp"

namespace lf {

enum class Annotation : uint8_t { None, Parallel, Unroll, Vectorize };
const char* annotation_name(Annotation a);

enum class ValKind : uint8_t { Load, Imm, Add, Mul, Max };

struct ValExpr;
using Val = std::shared_ptr<const ValExpr>;

struct ValExpr {
  ValKind kind = ValKind::Imm;
  double imm = 0.0;
  int tensor = -1;         // Load
  std::vector<Expr> idxs;  // Load
  Val a, b;
};

Val val_load(int tensor, std::vector<Expr> idxs);
Val val_imm(double v);
Val val_add(Val a, Val b);
Val val_mul(Val a, Val b);
Val val_max(Val a, Val b);

enum class StmtKind : uint8_t { For, Store, IfElse, Eval };

struct Stmt {
  StmtKind kind = StmtKind::Store;

  // For
  int var_id = -1;
  std::string var_name;
  int64_t extent = 0;
  Annotation ann = Annotation::None;
  std::vector<Stmt> body;

  // Store
  int tensor = -1;
  std::vector<Expr> idxs;
  Val value;

  // IfElse: conjunction of half-open range tests lo <= e < hi
  struct Cond {
    Expr e;
    int64_t lo = 0, hi = 0;
  };
  std::vector<Cond> conds;
  std::vector<Stmt> then_body, else_body;

  // Eval
  Val eval;
};

/// Per-tensor record in a lowered program: the transformed declaration plus
/// everything needed to materialize original-layout data into it.
struct ProgTensor {
  std::string id;
  std::vector<Dim> dims;       // transformed (physical) dims
  std::vector<Dim> orig_dims;  // logical dims (store_at targets: +1 slot)
  DType dtype = DType::Float32;
  Role role = Role::Intermediate;
  std::vector<LayoutPrimitive> seq;  // own sequence, store_at removed

  // store_at bookkeeping
  bool absorbed = false;  // this tensor folds into `absorbed_into`
  std::string absorbed_into;
  int absorb_dim = 0;
  int64_t absorb_slot = 0;
  std::vector<LayoutPrimitive> absorb_prefix;  // prims applied before store_at

  int64_t num_elements() const {
    int64_t n = 1;
    for (const auto& d : dims) n *= d.extent;
    return n;
  }
};

struct Program {
  std::vector<ProgTensor> tensors;  // graph declaration order
  std::vector<Stmt> stmts;

  int slot(const std::string& id) const {
    for (size_t i = 0; i < tensors.size(); ++i)
      if (tensors[i].id == id) return static_cast<int>(i);
    return -1;
  }
};

/// Frozen-format dump: two-space indent, `for v in range(E):` headers,
/// stores as `T[i][j] = ...` (accumulations printed with `+=`).
std::string dump_program(const Program& p);

}  // namespace lf
