// SPDX-License-Identifier: Apache-2.0
//
// Integer index-expression trees used for tensor accesses, plus a
// bounds-aware simplifier so rewritten accesses stay readable.

#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

namespace lf {

enum class ExprKind : uint8_t { Var, Const, Add, Mul, FloorDiv, Mod, Min };

struct ExprNode;
using Expr = std::shared_ptr<const ExprNode>;

/// Loop/iteration variable. `extent` is the half-open upper bound [0, extent)
/// and feeds the range analysis used by the simplifier.
struct ExprNode {
  ExprKind kind;
  int64_t value = 0;      // Const
  int var_id = -1;        // Var
  std::string var_name;   // Var
  int64_t extent = 0;     // Var
  Expr a, b;              // binary nodes
};

Expr make_var(int id, std::string name, int64_t extent);
Expr make_const(int64_t v);

// Smart constructors; each folds constants and applies the always-valid
// floordiv/mod rules before allocating.
Expr make_add(const Expr& a, const Expr& b);
Expr make_mul(const Expr& a, const Expr& b);
Expr make_floordiv(const Expr& a, int64_t divisor);
Expr make_mod(const Expr& a, int64_t modulus);
Expr make_min(const Expr& a, int64_t bound);

/// Inclusive value range of an expression over its variables' extents.
struct ExprRange {
  int64_t lo = 0;
  int64_t hi = 0;
};
ExprRange expr_range(const Expr& e);

/// Linear view: sum of coeff*var plus a constant. Only defined when the
/// expression is affine in its variables.
struct LinearForm {
  std::vector<std::pair<int, int64_t>> terms;  // (var_id, coeff), var_id ascending
  int64_t constant = 0;
};
bool to_linear(const Expr& e, LinearForm* out);

bool expr_equal(const Expr& a, const Expr& b);
size_t expr_hash(const Expr& e);

/// Evaluates with floor semantics for div/mod (results of mod in [0, m)).
int64_t expr_eval(const Expr& e, const std::unordered_map<int, int64_t>& vals);

/// Hot-path evaluation against a dense environment indexed by var id.
int64_t expr_eval(const Expr& e, const int64_t* env);

/// Replaces variables by expressions; ids not in the map stay untouched.
Expr expr_subst(const Expr& e, const std::unordered_map<int, Expr>& repl);

/// Collects distinct variable ids in deterministic (first-visit) order.
void expr_vars(const Expr& e, std::vector<int>* out);

/// Renders `a*3 + b // 4 % 2` style text, matching the pseudocode dump.
std::string expr_str(const Expr& e);

int64_t floor_div(int64_t a, int64_t b);
int64_t floor_mod(int64_t a, int64_t b);

}  // namespace lf
