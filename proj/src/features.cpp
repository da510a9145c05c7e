// SPDX-License-Identifier: Apache-2.0

#include "layoutforge/features.hpp"

#include <algorithm>
#include <cmath>

namespace lf {

namespace {

double log2p1(double x) { return std::log2(1.0 + std::max(0.0, x)); }

struct Walker {
  const Program& prog;
  FeatureVector f;
  int loop_count = 0;
  double total_arith = 0, total_loads = 0, total_stores = 0;
  double unit_stride_accesses = 0, total_accesses = 0, stride_mag_sum = 0;
  int max_depth = 0;

  explicit Walker(const Program& p) : prog(p), f(kFeatureLength, 0.0) {}

  // Flat-address stride of an access with respect to a loop variable.
  double stride_of(int tensor, const std::vector<Expr>& idxs, int var) const {
    const auto& dims = prog.tensors[tensor].dims;
    int64_t rowstride = 1;
    double total = 0;
    bool affine = true;
    for (int d = static_cast<int>(idxs.size()) - 1; d >= 0; --d) {
      LinearForm lin;
      if (to_linear(idxs[d], &lin)) {
        for (const auto& [vid, coeff] : lin.terms)
          if (vid == var) total += static_cast<double>(coeff) * static_cast<double>(rowstride);
      } else {
        std::vector<int> vs;
        expr_vars(idxs[d], &vs);
        if (std::find(vs.begin(), vs.end(), var) != vs.end()) affine = false;
      }
      rowstride *= dims[d].extent;
    }
    if (!affine) return 1e9;  // unknown treated as far
    return total;
  }

  void count_val(const Val& v, double trips, int innermost_var, double* arith,
                 std::vector<std::pair<int, const std::vector<Expr>*>>* accesses) {
    switch (v->kind) {
      case ValKind::Load:
        total_loads += trips;
        if (accesses) accesses->emplace_back(v->tensor, &v->idxs);
        return;
      case ValKind::Imm:
        return;
      default:
        *arith += 1;
        count_val(v->a, trips, innermost_var, arith, accesses);
        count_val(v->b, trips, innermost_var, arith, accesses);
    }
  }

  void walk(const Stmt& s, double trips, int depth, int innermost_var) {
    switch (s.kind) {
      case StmtKind::For: {
        double t = trips * static_cast<double>(s.extent);
        if (loop_count < kMaxFeatureLoops) {
          double* lf_ = &f[loop_count * kLoopFeatureWidth];
          lf_[0] = log2p1(static_cast<double>(s.extent));
          lf_[1] = depth;
          lf_[2] = log2p1(t);
          lf_[4] = s.ann == Annotation::Parallel ? 1 : 0;
          lf_[5] = s.ann == Annotation::Unroll ? 1 : 0;
          lf_[6] = s.ann == Annotation::Vectorize ? 1 : 0;
          // lf_[3] (arith in body) and lf_[7] (unit-stride fraction) filled
          // by the store visits below via loop_count snapshot.
        }
        int my_index = loop_count;
        ++loop_count;
        max_depth = std::max(max_depth, depth + 1);
        for (const auto& c : s.body) walk_in_loop(c, t, depth + 1, s.var_id, my_index);
        break;
      }
      default:
        walk_in_loop(s, trips, depth, innermost_var, -1);
    }
  }

  void walk_in_loop(const Stmt& s, double trips, int depth, int innermost_var, int loop_index) {
    switch (s.kind) {
      case StmtKind::For:
        walk(s, trips, depth, innermost_var);
        break;
      case StmtKind::Store: {
        double arith = 0;
        std::vector<std::pair<int, const std::vector<Expr>*>> accesses;
        count_val(s.value, trips, innermost_var, &arith, &accesses);
        accesses.emplace_back(s.tensor, &s.idxs);
        total_stores += trips;
        total_arith += arith * trips;
        for (const auto& [tensor, idxs] : accesses) {
          double st = innermost_var >= 0 ? std::abs(stride_of(tensor, *idxs, innermost_var)) : 0;
          total_accesses += 1;
          stride_mag_sum += std::min(st, 1e6);
          if (st <= 1.0) unit_stride_accesses += 1;
          if (loop_index >= 0 && loop_index < kMaxFeatureLoops) {
            double* lf_ = &f[loop_index * kLoopFeatureWidth];
            lf_[7] += st <= 1.0 ? 1 : 0;
          }
        }
        if (loop_index >= 0 && loop_index < kMaxFeatureLoops)
          f[loop_index * kLoopFeatureWidth + 3] += arith;
        break;
      }
      case StmtKind::IfElse:
        for (const auto& c : s.then_body) walk_in_loop(c, trips, depth, innermost_var, loop_index);
        for (const auto& c : s.else_body)
          walk_in_loop(c, trips * 0.0, depth, innermost_var, loop_index);
        break;
      case StmtKind::Eval: {
        double arith = 0;
        std::vector<std::pair<int, const std::vector<Expr>*>> accesses;
        count_val(s.eval, trips, innermost_var, &arith, &accesses);
        total_arith += arith * trips;
        break;
      }
    }
  }
};

}  // namespace

FeatureVector extract_features(const Program& p) {
  Walker w(p);
  for (const auto& s : p.stmts) w.walk(s, 1.0, 0, -1);

  double footprint = 0;
  for (const auto& t : p.tensors)
    if (!t.absorbed) footprint += static_cast<double>(t.num_elements());

  double* g = &w.f[kMaxFeatureLoops * kLoopFeatureWidth];
  g[0] = log2p1(w.total_arith);
  g[1] = log2p1(w.total_loads);
  g[2] = log2p1(w.total_stores);
  g[3] = log2p1(footprint);
  g[4] = w.loop_count;
  g[5] = w.max_depth;
  g[6] = w.total_accesses > 0 ? w.unit_stride_accesses / w.total_accesses : 0;
  g[7] = w.total_accesses > 0 ? log2p1(w.stride_mag_sum / w.total_accesses) : 0;
  for (size_t i = 0; i < p.tensors.size() && i < 8; ++i)
    g[8 + i] = log2p1(static_cast<double>(p.tensors[i].num_elements()));
  return w.f;
}

}  // namespace lf
