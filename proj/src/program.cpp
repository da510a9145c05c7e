// SPDX-License-Identifier: Apache-2.0

#include "layoutforge/program.hpp"

#include <sstream>

namespace lf {

const char* annotation_name(Annotation a) {
  switch (a) {
    case Annotation::None: return "none";
    case Annotation::Parallel: return "parallel";
    case Annotation::Unroll: return "unroll";
    case Annotation::Vectorize: return "vectorize";
  }
  return "?";
}

Val val_load(int tensor, std::vector<Expr> idxs) {
  auto v = std::make_shared<ValExpr>();
  v->kind = ValKind::Load;
  v->tensor = tensor;
  v->idxs = std::move(idxs);
  return v;
}

Val val_imm(double x) {
  auto v = std::make_shared<ValExpr>();
  v->kind = ValKind::Imm;
  v->imm = x;
  return v;
}

namespace {
Val val_bin(ValKind k, Val a, Val b) {
  auto v = std::make_shared<ValExpr>();
  v->kind = k;
  v->a = std::move(a);
  v->b = std::move(b);
  return v;
}
}  // namespace

Val val_add(Val a, Val b) { return val_bin(ValKind::Add, std::move(a), std::move(b)); }
Val val_mul(Val a, Val b) { return val_bin(ValKind::Mul, std::move(a), std::move(b)); }
Val val_max(Val a, Val b) { return val_bin(ValKind::Max, std::move(a), std::move(b)); }

namespace {

void print_access(std::ostream& os, const Program& p, int tensor,
                  const std::vector<Expr>& idxs) {
  os << (tensor >= 0 ? p.tensors[tensor].id : std::string("?"));
  for (const auto& e : idxs) os << "[" << expr_str(e) << "]";
}

void print_val(std::ostream& os, const Program& p, const Val& v) {
  switch (v->kind) {
    case ValKind::Load:
      print_access(os, p, v->tensor, v->idxs);
      break;
    case ValKind::Imm:
      os << v->imm;
      break;
    case ValKind::Add: {
      print_val(os, p, v->a);
      os << " + ";
      print_val(os, p, v->b);
      break;
    }
    case ValKind::Mul: {
      bool pa = v->a->kind == ValKind::Add;
      bool pb = v->b->kind == ValKind::Add;
      if (pa) os << "(";
      print_val(os, p, v->a);
      if (pa) os << ")";
      os << "*";
      if (pb) os << "(";
      print_val(os, p, v->b);
      if (pb) os << ")";
      break;
    }
    case ValKind::Max:
      os << "max(";
      print_val(os, p, v->a);
      os << ", ";
      print_val(os, p, v->b);
      os << ")";
      break;
  }
}

bool same_access(const Val& v, int tensor, const std::vector<Expr>& idxs) {
  if (v->kind != ValKind::Load || v->tensor != tensor) return false;
  if (v->idxs.size() != idxs.size()) return false;
  for (size_t i = 0; i < idxs.size(); ++i)
    if (!expr_equal(v->idxs[i], idxs[i])) return false;
  return true;
}

void print_stmt(std::ostream& os, const Program& p, const Stmt& s, int indent) {
  std::string pad(2 * indent, ' ');
  switch (s.kind) {
    case StmtKind::For: {
      os << pad << "for " << s.var_name << " in range(" << s.extent << "):";
      if (s.ann != Annotation::None) os << "  # " << annotation_name(s.ann);
      os << "\n";
      for (const auto& c : s.body) print_stmt(os, p, c, indent + 1);
      break;
    }
    case StmtKind::Store: {
      os << pad;
      print_access(os, p, s.tensor, s.idxs);
      // `X[...] = X[...] + rest` prints as `X[...] += rest`.
      if (s.value->kind == ValKind::Add && same_access(s.value->a, s.tensor, s.idxs)) {
        os << " += ";
        print_val(os, p, s.value->b);
      } else {
        os << " = ";
        print_val(os, p, s.value);
      }
      os << "\n";
      break;
    }
    case StmtKind::IfElse: {
      os << pad << "if ";
      for (size_t i = 0; i < s.conds.size(); ++i) {
        if (i) os << " and ";
        os << s.conds[i].lo << " <= " << expr_str(s.conds[i].e) << " < " << s.conds[i].hi;
      }
      os << ":\n";
      for (const auto& c : s.then_body) print_stmt(os, p, c, indent + 1);
      if (!s.else_body.empty()) {
        os << pad << "else:\n";
        for (const auto& c : s.else_body) print_stmt(os, p, c, indent + 1);
      }
      break;
    }
    case StmtKind::Eval: {
      os << pad;
      print_val(os, p, s.eval);
      os << "\n";
      break;
    }
  }
}

}  // namespace

std::string dump_program(const Program& p) {
  std::ostringstream os;
  for (const auto& s : p.stmts) print_stmt(os, p, s, 0);
  return os.str();
}

}  // namespace lf
