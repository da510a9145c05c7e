// SPDX-License-Identifier: Apache-2.0

#include "layoutforge/expr.hpp"

#include <algorithm>
#include <cassert>
#include <functional>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

namespace lf {

int64_t floor_div(int64_t a, int64_t b) {
  int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

int64_t floor_mod(int64_t a, int64_t b) { return a - floor_div(a, b) * b; }

Expr make_var(int id, std::string name, int64_t extent) {
  auto n = std::make_shared<ExprNode>();
  n->kind = ExprKind::Var;
  n->var_id = id;
  n->var_name = std::move(name);
  n->extent = extent;
  return n;
}

Expr make_const(int64_t v) {
  auto n = std::make_shared<ExprNode>();
  n->kind = ExprKind::Const;
  n->value = v;
  return n;
}

namespace {

Expr make_bin(ExprKind k, Expr a, Expr b) {
  auto n = std::make_shared<ExprNode>();
  n->kind = k;
  n->a = std::move(a);
  n->b = std::move(b);
  return n;
}

bool is_const(const Expr& e, int64_t* v = nullptr) {
  if (e->kind != ExprKind::Const) return false;
  if (v) *v = e->value;
  return true;
}

int64_t sat_mul(int64_t a, int64_t b) {
  if (a == 0 || b == 0) return 0;
  long double p = static_cast<long double>(a) * static_cast<long double>(b);
  constexpr int64_t kLim = std::numeric_limits<int64_t>::max() / 4;
  if (p > static_cast<long double>(kLim)) return kLim;
  if (p < -static_cast<long double>(kLim)) return -kLim;
  return a * b;
}

// Flattened sum-of-terms view: coeff * atom (+ constant). An atom is any
// non-Add non-Mul-by-const expression (Var, FloorDiv, Mod, Min).
struct Terms {
  std::vector<std::pair<Expr, int64_t>> atoms;  // (atom, coeff)
  int64_t constant = 0;
};

void collect_terms(const Expr& e, int64_t scale, Terms* t) {
  switch (e->kind) {
    case ExprKind::Const:
      t->constant += scale * e->value;
      return;
    case ExprKind::Add:
      collect_terms(e->a, scale, t);
      collect_terms(e->b, scale, t);
      return;
    case ExprKind::Mul: {
      int64_t c;
      if (is_const(e->b, &c)) {
        collect_terms(e->a, scale * c, t);
        return;
      }
      if (is_const(e->a, &c)) {
        collect_terms(e->b, scale * c, t);
        return;
      }
      break;
    }
    default:
      break;
  }
  for (auto& [atom, coeff] : t->atoms) {
    if (expr_equal(atom, e)) {
      coeff += scale;
      return;
    }
  }
  t->atoms.emplace_back(e, scale);
}

// Sorts by (var first, then structural hash) but keeps first-seen order for
// equal keys so rebuilt expressions are deterministic.
void canonicalize(Terms* t) {
  std::stable_sort(t->atoms.begin(), t->atoms.end(),
                   [](const auto& x, const auto& y) {
                     bool xv = x.first->kind == ExprKind::Var;
                     bool yv = y.first->kind == ExprKind::Var;
                     if (xv != yv) return xv;
                     if (xv && yv) return x.first->var_id < y.first->var_id;
                     return false;
                   });
  t->atoms.erase(std::remove_if(t->atoms.begin(), t->atoms.end(),
                                [](const auto& p) { return p.second == 0; }),
                 t->atoms.end());
}

// c*floordiv(e, c) + mod(e, c)  ->  e
void eliminate_divmod_pairs(Terms* t) {
  for (size_t i = 0; i < t->atoms.size(); ++i) {
    const Expr& di = t->atoms[i].first;
    if (di->kind != ExprKind::FloorDiv || t->atoms[i].second == 0) continue;
    int64_t c;
    if (!is_const(di->b, &c)) continue;
    if (t->atoms[i].second % c != 0) continue;
    for (size_t j = 0; j < t->atoms.size(); ++j) {
      const Expr& mj = t->atoms[j].first;
      if (mj->kind != ExprKind::Mod || t->atoms[j].second == 0) continue;
      int64_t c2;
      if (!is_const(mj->b, &c2) || c2 != c) continue;
      if (!expr_equal(di->a, mj->a)) continue;
      int64_t m = t->atoms[i].second / c;
      if (t->atoms[j].second != m) continue;
      t->atoms[i].second = 0;
      t->atoms[j].second = 0;
      collect_terms(di->a, m, t);
      eliminate_divmod_pairs(t);
      return;
    }
  }
}

Expr rebuild(const Terms& t) {
  Expr acc;
  for (const auto& [atom, coeff] : t.atoms) {
    if (coeff == 0) continue;
    Expr term = coeff == 1 ? atom : make_bin(ExprKind::Mul, atom, make_const(coeff));
    acc = acc ? make_bin(ExprKind::Add, acc, term) : term;
  }
  if (!acc) return make_const(t.constant);
  if (t.constant != 0) acc = make_bin(ExprKind::Add, acc, make_const(t.constant));
  return acc;
}

Terms as_terms(const Expr& e) {
  Terms t;
  collect_terms(e, 1, &t);
  eliminate_divmod_pairs(&t);
  canonicalize(&t);
  return t;
}

}  // namespace

ExprRange expr_range(const Expr& e) {
  switch (e->kind) {
    case ExprKind::Var:
      return {0, e->extent - 1};
    case ExprKind::Const:
      return {e->value, e->value};
    case ExprKind::Add: {
      auto ra = expr_range(e->a), rb = expr_range(e->b);
      return {ra.lo + rb.lo, ra.hi + rb.hi};
    }
    case ExprKind::Mul: {
      auto ra = expr_range(e->a), rb = expr_range(e->b);
      int64_t c[4] = {sat_mul(ra.lo, rb.lo), sat_mul(ra.lo, rb.hi),
                      sat_mul(ra.hi, rb.lo), sat_mul(ra.hi, rb.hi)};
      return {*std::min_element(c, c + 4), *std::max_element(c, c + 4)};
    }
    case ExprKind::FloorDiv: {
      auto ra = expr_range(e->a);
      int64_t c = e->b->value;
      return {floor_div(ra.lo, c), floor_div(ra.hi, c)};
    }
    case ExprKind::Mod: {
      auto ra = expr_range(e->a);
      int64_t c = e->b->value;
      if (ra.lo >= 0 && ra.hi < c) return ra;
      return {0, c - 1};
    }
    case ExprKind::Min: {
      auto ra = expr_range(e->a), rb = expr_range(e->b);
      return {std::min(ra.lo, rb.lo), std::min(ra.hi, rb.hi)};
    }
  }
  return {0, 0};
}

Expr make_add(const Expr& a, const Expr& b) {
  Terms t;
  collect_terms(a, 1, &t);
  collect_terms(b, 1, &t);
  eliminate_divmod_pairs(&t);
  canonicalize(&t);
  return rebuild(t);
}

Expr make_mul(const Expr& a, const Expr& b) {
  int64_t c;
  if (is_const(a, &c) || is_const(b, &c)) {
    const Expr& other = a->kind == ExprKind::Const ? b : a;
    if (c == 0) return make_const(0);
    if (c == 1) return other;
    Terms t;
    collect_terms(other, c, &t);
    canonicalize(&t);
    return rebuild(t);
  }
  // Non-affine products never arise from layout/loop rewriting.
  throw std::invalid_argument("make_mul: one operand must be constant");
}

Expr make_floordiv(const Expr& a, int64_t divisor) {
  if (divisor <= 0) throw std::invalid_argument("floordiv: divisor must be positive");
  if (divisor == 1) return a;
  int64_t c;
  if (is_const(a, &c)) return make_const(floor_div(c, divisor));

  // floordiv(d*Q + R, d) == Q + floordiv(R, d): peel every term whose
  // coefficient divides, unconditionally valid.
  Terms t = as_terms(a);
  Terms quot, rem;
  for (const auto& [atom, coeff] : t.atoms) {
    if (coeff % divisor == 0)
      quot.atoms.emplace_back(atom, coeff / divisor);
    else
      rem.atoms.emplace_back(atom, coeff);
  }
  quot.constant = floor_div(t.constant, divisor);
  rem.constant = t.constant - floor_div(t.constant, divisor) * divisor;
  Expr remainder = rebuild(rem);
  ExprRange rr = expr_range(remainder);
  Expr rem_div;
  if (rr.lo >= 0 && rr.hi < divisor) {
    rem_div = make_const(0);
  } else if (!quot.atoms.empty() || quot.constant != 0) {
    rem_div = make_bin(ExprKind::FloorDiv, remainder, make_const(divisor));
  } else {
    // Nothing peeled; fold nested division by constants.
    if (a->kind == ExprKind::FloorDiv) {
      int64_t inner;
      if (is_const(a->b, &inner)) return make_floordiv(a->a, inner * divisor);
    }
    return make_bin(ExprKind::FloorDiv, a, make_const(divisor));
  }
  collect_terms(rem_div, 1, &quot);
  canonicalize(&quot);
  return rebuild(quot);
}

Expr make_mod(const Expr& a, int64_t modulus) {
  if (modulus <= 0) throw std::invalid_argument("mod: modulus must be positive");
  if (modulus == 1) return make_const(0);
  int64_t c;
  if (is_const(a, &c)) return make_const(floor_mod(c, modulus));
  ExprRange ra = expr_range(a);
  if (ra.lo >= 0 && ra.hi < modulus) return a;

  // (m*X + R) mod m == R mod m for any integer X (floor-mod periodicity).
  Terms t = as_terms(a);
  Terms rem;
  bool dropped = false;
  for (const auto& [atom, coeff] : t.atoms) {
    if (coeff % modulus == 0) {
      dropped = true;
    } else {
      rem.atoms.emplace_back(atom, coeff);
    }
  }
  int64_t kc = floor_mod(t.constant, modulus);
  dropped = dropped || kc != t.constant;
  rem.constant = kc;
  Expr remainder = rebuild(rem);
  if (dropped) return make_mod(remainder, modulus);
  ExprRange rr = expr_range(remainder);
  if (rr.lo >= 0 && rr.hi < modulus) return remainder;
  return make_bin(ExprKind::Mod, remainder, make_const(modulus));
}

Expr make_min(const Expr& a, int64_t bound) {
  int64_t c;
  if (is_const(a, &c)) return make_const(std::min(c, bound));
  ExprRange ra = expr_range(a);
  if (ra.hi <= bound) return a;
  if (ra.lo >= bound) return make_const(bound);
  return make_bin(ExprKind::Min, a, make_const(bound));
}

bool to_linear(const Expr& e, LinearForm* out) {
  Terms t = as_terms(e);
  LinearForm lf;
  lf.constant = t.constant;
  for (const auto& [atom, coeff] : t.atoms) {
    if (atom->kind != ExprKind::Var) return false;
    lf.terms.emplace_back(atom->var_id, coeff);
  }
  std::sort(lf.terms.begin(), lf.terms.end());
  *out = std::move(lf);
  return true;
}

bool expr_equal(const Expr& a, const Expr& b) {
  if (a.get() == b.get()) return true;
  if (a->kind != b->kind) return false;
  switch (a->kind) {
    case ExprKind::Var:
      return a->var_id == b->var_id;
    case ExprKind::Const:
      return a->value == b->value;
    default:
      return expr_equal(a->a, b->a) && expr_equal(a->b, b->b);
  }
}

size_t expr_hash(const Expr& e) {
  size_t h = static_cast<size_t>(e->kind) * 0x9e3779b97f4a7c15ull;
  switch (e->kind) {
    case ExprKind::Var:
      return h ^ std::hash<int>()(e->var_id);
    case ExprKind::Const:
      return h ^ std::hash<int64_t>()(e->value);
    default:
      return h ^ (expr_hash(e->a) * 31) ^ (expr_hash(e->b) * 131);
  }
}

int64_t expr_eval(const Expr& e, const std::unordered_map<int, int64_t>& vals) {
  switch (e->kind) {
    case ExprKind::Var: {
      auto it = vals.find(e->var_id);
      if (it == vals.end()) throw std::runtime_error("unbound variable " + e->var_name);
      return it->second;
    }
    case ExprKind::Const:
      return e->value;
    case ExprKind::Add:
      return expr_eval(e->a, vals) + expr_eval(e->b, vals);
    case ExprKind::Mul:
      return expr_eval(e->a, vals) * expr_eval(e->b, vals);
    case ExprKind::FloorDiv:
      return floor_div(expr_eval(e->a, vals), expr_eval(e->b, vals));
    case ExprKind::Mod:
      return floor_mod(expr_eval(e->a, vals), expr_eval(e->b, vals));
    case ExprKind::Min:
      return std::min(expr_eval(e->a, vals), expr_eval(e->b, vals));
  }
  return 0;
}

int64_t expr_eval(const Expr& e, const int64_t* env) {
  switch (e->kind) {
    case ExprKind::Var:
      return env[e->var_id];
    case ExprKind::Const:
      return e->value;
    case ExprKind::Add:
      return expr_eval(e->a, env) + expr_eval(e->b, env);
    case ExprKind::Mul:
      return expr_eval(e->a, env) * expr_eval(e->b, env);
    case ExprKind::FloorDiv:
      return floor_div(expr_eval(e->a, env), e->b->value);
    case ExprKind::Mod:
      return floor_mod(expr_eval(e->a, env), e->b->value);
    case ExprKind::Min:
      return std::min(expr_eval(e->a, env), e->b->value);
  }
  return 0;
}

Expr expr_subst(const Expr& e, const std::unordered_map<int, Expr>& repl) {
  switch (e->kind) {
    case ExprKind::Var: {
      auto it = repl.find(e->var_id);
      return it == repl.end() ? e : it->second;
    }
    case ExprKind::Const:
      return e;
    case ExprKind::Add:
      return make_add(expr_subst(e->a, repl), expr_subst(e->b, repl));
    case ExprKind::Mul:
      return make_mul(expr_subst(e->a, repl), expr_subst(e->b, repl));
    case ExprKind::FloorDiv:
      return make_floordiv(expr_subst(e->a, repl), e->b->value);
    case ExprKind::Mod:
      return make_mod(expr_subst(e->a, repl), e->b->value);
    case ExprKind::Min:
      return make_min(expr_subst(e->a, repl), e->b->value);
  }
  return e;
}

void expr_vars(const Expr& e, std::vector<int>* out) {
  switch (e->kind) {
    case ExprKind::Var:
      if (std::find(out->begin(), out->end(), e->var_id) == out->end())
        out->push_back(e->var_id);
      return;
    case ExprKind::Const:
      return;
    default:
      expr_vars(e->a, out);
      expr_vars(e->b, out);
  }
}

namespace {

int precedence(ExprKind k) {
  switch (k) {
    case ExprKind::Add:
      return 1;
    case ExprKind::Mul:
    case ExprKind::FloorDiv:
    case ExprKind::Mod:
      return 2;
    default:
      return 3;
  }
}

void print(const Expr& e, std::ostream& os, int parent_prec) {
  int pr = precedence(e->kind);
  bool paren = pr < parent_prec;
  if (paren) os << "(";
  switch (e->kind) {
    case ExprKind::Var:
      os << e->var_name;
      break;
    case ExprKind::Const:
      os << e->value;
      break;
    case ExprKind::Add:
      print(e->a, os, pr);
      os << " + ";
      print(e->b, os, pr + 1);
      break;
    case ExprKind::Mul:
      print(e->a, os, pr);
      os << "*";
      print(e->b, os, pr + 1);
      break;
    case ExprKind::FloorDiv:
      print(e->a, os, pr);
      os << " // ";
      print(e->b, os, pr + 1);
      break;
    case ExprKind::Mod:
      print(e->a, os, pr);
      os << " % ";
      print(e->b, os, pr + 1);
      break;
    case ExprKind::Min:
      os << "min(";
      print(e->a, os, 0);
      os << ", ";
      print(e->b, os, 0);
      os << ")";
      break;
  }
  if (paren) os << ")";
}

}  // namespace

std::string expr_str(const Expr& e) {
  std::ostringstream os;
  print(e, os, 0);
  return os.str();
}

}  // namespace lf
