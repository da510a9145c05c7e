// SPDX-License-Identifier: Apache-2.0

#include "layoutforge/interp.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace lf {

namespace {

std::vector<int64_t> extents_of(const std::vector<Dim>& dims) {
  std::vector<int64_t> e;
  e.reserve(dims.size());
  for (const auto& d : dims) e.push_back(d.extent);
  return e;
}

int64_t product(const std::vector<int64_t>& v) {
  int64_t p = 1;
  for (int64_t x : v) p *= x;
  return p;
}

int64_t flat_index(const std::vector<int64_t>& ext, const std::vector<int64_t>& idx) {
  int64_t f = 0;
  for (size_t i = 0; i < ext.size(); ++i) f = f * ext[i] + idx[i];
  return f;
}

// Odometer over a multi-index space.
bool advance(std::vector<int64_t>* idx, const std::vector<int64_t>& ext) {
  for (int i = static_cast<int>(ext.size()) - 1; i >= 0; --i) {
    if (++(*idx)[i] < ext[i]) return true;
    (*idx)[i] = 0;
  }
  return false;
}

const std::vector<double>& require(const BufferMap& m, const std::string& id) {
  auto it = m.find(id);
  if (it == m.end()) throw Error("missing input buffer for tensor '" + id + "'");
  return it->second;
}

}  // namespace

BufferMap reference_eval(const Graph& g, const BufferMap& inputs) {
  std::map<std::string, std::vector<double>> bufs;
  for (const auto& t : g.tensors) {
    if (t.role == Role::Input || t.role == Role::Constant) {
      const auto& b = require(inputs, t.id);
      if (static_cast<int64_t>(b.size()) != t.num_elements())
        throw Error("input '" + t.id + "' has " + std::to_string(b.size()) + " values, expected " +
                    std::to_string(t.num_elements()));
      bufs[t.id] = b;
    } else {
      bufs[t.id] = std::vector<double>(t.num_elements(), 0.0);
    }
  }

  for (int ni : topo_order(g)) {
    const OperatorNode& n = g.nodes[ni];
    const TensorDecl& out_t = g.tensor(n.output);
    std::vector<double>& out = bufs[n.output];
    auto oe = extents_of(out_t.dims);
    switch (n.kind) {
      case OpKind::C2D: {
        const auto& inp = bufs[n.inputs[0]];
        const auto& ker = bufs[n.inputs[1]];
        auto ie = extents_of(g.tensor(n.inputs[0]).dims);
        auto ke = extents_of(g.tensor(n.inputs[1]).dims);
        int64_t v = n.attr("stride", 1);
        for (int64_t b = 0; b < oe[0]; ++b)
          for (int64_t o = 0; o < oe[1]; ++o)
            for (int64_t h = 0; h < oe[2]; ++h)
              for (int64_t w = 0; w < oe[3]; ++w) {
                double acc = 0.0;
                for (int64_t i = 0; i < ke[1]; ++i)
                  for (int64_t rh = 0; rh < ke[2]; ++rh)
                    for (int64_t rw = 0; rw < ke[3]; ++rw)
                      acc += inp[flat_index(ie, {b, i, v * h + rh, v * w + rw})] *
                             ker[flat_index(ke, {o, i, rh, rw})];
                out[flat_index(oe, {b, o, h, w})] = acc;
              }
        break;
      }
      case OpKind::DEP: {
        const auto& inp = bufs[n.inputs[0]];
        const auto& ker = bufs[n.inputs[1]];
        auto ie = extents_of(g.tensor(n.inputs[0]).dims);
        auto ke = extents_of(g.tensor(n.inputs[1]).dims);
        int64_t v = n.attr("stride", 1);
        for (int64_t b = 0; b < oe[0]; ++b)
          for (int64_t c = 0; c < oe[1]; ++c)
            for (int64_t h = 0; h < oe[2]; ++h)
              for (int64_t w = 0; w < oe[3]; ++w) {
                double acc = 0.0;
                for (int64_t rh = 0; rh < ke[1]; ++rh)
                  for (int64_t rw = 0; rw < ke[2]; ++rw)
                    acc += inp[flat_index(ie, {b, c, v * h + rh, v * w + rw})] *
                           ker[flat_index(ke, {c, rh, rw})];
                out[flat_index(oe, {b, c, h, w})] = acc;
              }
        break;
      }
      case OpKind::GMM: {
        const auto& a = bufs[n.inputs[0]];
        const auto& bb = bufs[n.inputs[1]];
        auto ae = extents_of(g.tensor(n.inputs[0]).dims);
        auto be = extents_of(g.tensor(n.inputs[1]).dims);
        for (int64_t m = 0; m < oe[0]; ++m)
          for (int64_t nn = 0; nn < oe[1]; ++nn) {
            double acc = 0.0;
            for (int64_t k = 0; k < ae[1]; ++k)
              acc += a[flat_index(ae, {m, k})] * bb[flat_index(be, {k, nn})];
            out[flat_index(oe, {m, nn})] = acc;
          }
        break;
      }
      case OpKind::Padding: {
        const auto& inp = bufs[n.inputs[0]];
        auto ie = extents_of(g.tensor(n.inputs[0]).dims);
        int64_t p = n.attr("pad", 0);
        for (int64_t b = 0; b < oe[0]; ++b)
          for (int64_t c = 0; c < oe[1]; ++c)
            for (int64_t h = 0; h < oe[2]; ++h)
              for (int64_t w = 0; w < oe[3]; ++w) {
                bool interior = h >= p && h < p + ie[2] && w >= p && w < p + ie[3];
                out[flat_index(oe, {b, c, h, w})] =
                    interior ? inp[flat_index(ie, {b, c, h - p, w - p})] : 0.0;
              }
        break;
      }
      case OpKind::ReLU: {
        const auto& x = bufs[n.inputs[0]];
        for (size_t i = 0; i < x.size(); ++i) out[i] = std::max(x[i], 0.0);
        break;
      }
      case OpKind::BiasAdd: {
        const auto& x = bufs[n.inputs[0]];
        const auto& bias = bufs[n.inputs[1]];
        if (oe.size() == 4) {
          int64_t spatial = oe[2] * oe[3];
          for (int64_t b = 0; b < oe[0]; ++b)
            for (int64_t c = 0; c < oe[1]; ++c)
              for (int64_t s = 0; s < spatial; ++s) {
                int64_t f = (b * oe[1] + c) * spatial + s;
                out[f] = x[f] + bias[c];
              }
        } else {
          for (int64_t m = 0; m < oe[0]; ++m)
            for (int64_t nn = 0; nn < oe[1]; ++nn)
              out[m * oe[1] + nn] = x[m * oe[1] + nn] + bias[nn];
        }
        break;
      }
      case OpKind::EwAdd: {
        const auto& x = bufs[n.inputs[0]];
        const auto& y = bufs[n.inputs[1]];
        for (size_t i = 0; i < x.size(); ++i) out[i] = x[i] + y[i];
        break;
      }
      case OpKind::LayoutConvert: {
        out = bufs[n.inputs[0]];
        break;
      }
    }
  }

  BufferMap result;
  for (const auto& n : g.nodes) result[n.output] = bufs[n.output];
  return result;
}

namespace {

// Value-level effect of one primitive on a materialized buffer.
std::vector<double> materialize_step(const std::vector<double>& buf,
                                     const std::vector<Dim>& dims,
                                     const LayoutPrimitive& p,
                                     const std::vector<Dim>& new_dims) {
  auto oe = extents_of(dims);
  auto ne = extents_of(new_dims);
  switch (p.kind) {
    case PrimKind::Split:
    case PrimKind::Fuse:
      // Row-major split/fuse of adjacent dims leaves the flat order intact.
      return buf;
    case PrimKind::Reorder: {
      std::vector<double> out(product(ne));
      std::vector<int64_t> idx(ne.size(), 0);
      if (out.empty()) return out;
      do {
        std::vector<int64_t> old_idx(oe.size());
        for (size_t j = 0; j < ne.size(); ++j) old_idx[p.perm[j]] = idx[j];
        out[flat_index(ne, idx)] = buf[flat_index(oe, old_idx)];
      } while (advance(&idx, ne));
      return out;
    }
    case PrimKind::Unfold: {
      std::vector<double> out(product(ne));
      std::vector<int64_t> idx(ne.size(), 0);
      if (out.empty()) return out;
      do {
        std::vector<int64_t> old_idx;
        old_idx.reserve(oe.size());
        for (size_t j = 0; j < ne.size(); ++j) {
          if (static_cast<int>(j) == p.dim) {
            int64_t src = idx[j] * p.stride + idx[j + 1];
            // Final tile may reach past the end; clamp reads to the source.
            src = std::min(src, oe[p.dim] - 1);
            old_idx.push_back(src);
            ++j;
          } else {
            old_idx.push_back(idx[j]);
          }
        }
        out[flat_index(ne, idx)] = buf[flat_index(oe, old_idx)];
      } while (advance(&idx, ne));
      return out;
    }
    case PrimKind::Pad: {
      std::vector<double> out(product(ne), 0.0);
      std::vector<int64_t> idx(oe.size(), 0);
      if (buf.empty()) return out;
      do {
        out[flat_index(ne, idx)] = buf[flat_index(oe, idx)];
      } while (advance(&idx, oe));
      return out;
    }
    case PrimKind::Fold: {
      std::vector<double> out(product(ne));
      std::vector<int64_t> idx(ne.size(), 0);
      int64_t tiles = oe[p.dim];
      if (out.empty()) return out;
      do {
        std::vector<int64_t> old_idx;
        old_idx.reserve(oe.size());
        for (size_t j = 0; j < ne.size(); ++j) {
          if (static_cast<int>(j) == p.dim) {
            int64_t i = idx[j];
            int64_t t = std::min(floor_div(i, p.stride), tiles - 1);
            old_idx.push_back(t);
            old_idx.push_back(i - t * p.stride);
          } else {
            old_idx.push_back(idx[j]);
          }
        }
        out[flat_index(ne, idx)] = buf[flat_index(oe, old_idx)];
      } while (advance(&idx, ne));
      return out;
    }
    case PrimKind::Unpad: {
      std::vector<double> out(product(ne));
      std::vector<int64_t> idx(ne.size(), 0);
      if (out.empty()) return out;
      do {
        out[flat_index(ne, idx)] = buf[flat_index(oe, idx)];
      } while (advance(&idx, ne));
      return out;
    }
    case PrimKind::StoreAt:
    case PrimKind::DecoupleAt:
      throw Error("store_at must be folded before materialization");
  }
  return buf;
}

std::vector<double> materialize_seq(std::vector<double> buf, std::vector<Dim> dims,
                                    const std::vector<LayoutPrimitive>& seq) {
  for (const auto& p : seq) {
    std::vector<Dim> nd = apply_primitive_shape(dims, p);
    buf = materialize_step(buf, dims, p, nd);
    dims = std::move(nd);
  }
  return buf;
}

}  // namespace

std::vector<double> materialize_tensor(const Program& p, int slot, const BufferMap& raw) {
  const ProgTensor& pt = p.tensors[slot];
  if (pt.absorbed) throw Error("absorbed tensor '" + pt.id + "' has no buffer");

  std::vector<double> logical;
  if (pt.role == Role::Input || pt.role == Role::Constant) {
    logical = require(raw, pt.id);
  } else {
    return std::vector<double>(pt.num_elements(), 0.0);
  }

  // Pull in store_at sources: the logical buffer covers orig_dims which has
  // one extra slot along absorb_dim per attachment.
  for (size_t s = 0; s < p.tensors.size(); ++s) {
    const ProgTensor& src = p.tensors[s];
    if (!src.absorbed || src.absorbed_into != pt.id) continue;
    std::vector<Dim> src_dims;
    {
      // Reconstruct the source's pre-attachment dims from its own record.
      src_dims = src.orig_dims;
    }
    std::vector<double> attached =
        materialize_seq(require(raw, src.id), src_dims, src.absorb_prefix);
    std::vector<Dim> att_dims = derive_layout(src_dims, src.absorb_prefix);

    auto fe = extents_of(pt.orig_dims);
    auto ae = extents_of(att_dims);
    int64_t expect = static_cast<int64_t>(logical.size());
    std::vector<double> fused(product(fe), 0.0);
    // Copy original rows, then place the attachment at the appended slot.
    std::vector<int64_t> idx(fe.size(), 0);
    std::vector<Dim> base_dims = pt.orig_dims;
    base_dims[src.absorb_dim].extent -= 1;
    auto be = extents_of(base_dims);
    (void)expect;
    do {
      int64_t f = flat_index(fe, idx);
      if (idx[src.absorb_dim] == src.absorb_slot) {
        std::vector<int64_t> aidx;
        for (size_t j = 0; j < idx.size(); ++j)
          if (static_cast<int>(j) != src.absorb_dim) aidx.push_back(idx[j]);
        fused[f] = attached[flat_index(ae, aidx)];
      } else {
        fused[f] = logical[flat_index(be, idx)];
      }
    } while (advance(&idx, fe));
    logical = std::move(fused);
  }

  if (static_cast<int64_t>(logical.size()) != product(extents_of(pt.orig_dims)))
    throw Error("input '" + pt.id + "' has " + std::to_string(logical.size()) +
                " values, expected " + std::to_string(product(extents_of(pt.orig_dims))));
  return materialize_seq(std::move(logical), pt.orig_dims, pt.seq);
}

namespace {

struct Machine {
  const Program& prog;
  std::vector<std::vector<double>>& bufs;
  std::vector<std::vector<int64_t>> ext;
  std::vector<int64_t> env;
  std::map<std::string, int64_t>* store_counts;

  int64_t addr(const Stmt& s, int tensor, const std::vector<Expr>& idxs) {
    const auto& e = ext[tensor];
    int64_t f = 0;
    for (size_t i = 0; i < idxs.size(); ++i) {
      int64_t v = expr_eval(idxs[i], env.data());
      if (v < 0 || v >= e[i]) {
        std::ostringstream os;
        os << "out-of-range access to '" << prog.tensors[tensor].id << "' dim " << i << ": index "
           << v << " not in [0, " << e[i] << ") in statement storing to '"
           << (s.tensor >= 0 ? prog.tensors[s.tensor].id : "?") << "'";
        throw Error(os.str());
      }
      f = f * e[i] + v;
    }
    return f;
  }

  double eval(const Stmt& s, const Val& v) {
    switch (v->kind) {
      case ValKind::Load:
        return bufs[v->tensor][addr(s, v->tensor, v->idxs)];
      case ValKind::Imm:
        return v->imm;
      case ValKind::Add:
        return eval(s, v->a) + eval(s, v->b);
      case ValKind::Mul:
        return eval(s, v->a) * eval(s, v->b);
      case ValKind::Max:
        return std::max(eval(s, v->a), eval(s, v->b));
    }
    return 0.0;
  }

  void run(const Stmt& s) {
    switch (s.kind) {
      case StmtKind::For:
        for (int64_t i = 0; i < s.extent; ++i) {
          env[s.var_id] = i;
          for (const auto& c : s.body) run(c);
        }
        break;
      case StmtKind::Store: {
        double v = eval(s, s.value);
        bufs[s.tensor][addr(s, s.tensor, s.idxs)] = v;
        if (store_counts) ++(*store_counts)[prog.tensors[s.tensor].id];
        break;
      }
      case StmtKind::IfElse: {
        bool ok = true;
        for (const auto& c : s.conds) {
          int64_t v = expr_eval(c.e, env.data());
          if (v < c.lo || v >= c.hi) {
            ok = false;
            break;
          }
        }
        for (const auto& c : ok ? s.then_body : s.else_body) run(c);
        break;
      }
      case StmtKind::Eval:
        eval(s, s.eval);
        break;
    }
  }
};

int max_var_id(const Stmt& s) {
  int m = s.var_id;
  for (const auto& c : s.body) m = std::max(m, max_var_id(c));
  for (const auto& c : s.then_body) m = std::max(m, max_var_id(c));
  for (const auto& c : s.else_body) m = std::max(m, max_var_id(c));
  return m;
}

}  // namespace

InterpResult interpret(const Program& p, const BufferMap& inputs) {
  std::vector<std::vector<double>> bufs(p.tensors.size());
  for (size_t i = 0; i < p.tensors.size(); ++i) {
    if (p.tensors[i].absorbed) continue;
    bufs[i] = materialize_tensor(p, static_cast<int>(i), inputs);
  }

  InterpResult r;
  Machine m{p, bufs, {}, {}, &r.store_counts};
  m.ext.resize(p.tensors.size());
  for (size_t i = 0; i < p.tensors.size(); ++i) m.ext[i] = extents_of(p.tensors[i].dims);
  int vmax = 0;
  for (const auto& s : p.stmts) vmax = std::max(vmax, max_var_id(s));
  m.env.assign(vmax + 2, 0);
  for (const auto& s : p.stmts) m.run(s);

  // Convert produced tensors back to their logical layouts.
  for (size_t i = 0; i < p.tensors.size(); ++i) {
    const ProgTensor& pt = p.tensors[i];
    if (pt.absorbed || pt.role == Role::Input || pt.role == Role::Constant) continue;
    auto oe = extents_of(pt.orig_dims);
    auto te = extents_of(pt.dims);
    std::vector<double> logical(product(oe));
    if (pt.seq.empty()) {
      logical = bufs[i];
    } else {
      // Forward-map each logical coordinate into the transformed space.
      std::vector<Expr> id_exprs;
      for (size_t d = 0; d < pt.orig_dims.size(); ++d)
        id_exprs.push_back(make_var(static_cast<int>(d), "l" + std::to_string(d),
                                    pt.orig_dims[d].extent));
      std::vector<Expr> fwd = rewrite_access(id_exprs, pt.orig_dims, pt.seq);
      std::vector<int64_t> idx(oe.size(), 0);
      std::vector<int64_t> env(oe.size(), 0);
      if (!logical.empty()) {
        do {
          for (size_t d = 0; d < idx.size(); ++d) env[d] = idx[d];
          std::vector<int64_t> tidx(fwd.size());
          for (size_t d = 0; d < fwd.size(); ++d) tidx[d] = expr_eval(fwd[d], env.data());
          logical[flat_index(oe, idx)] = bufs[i][flat_index(te, tidx)];
        } while (advance(&idx, oe));
      }
    }
    r.outputs[pt.id] = std::move(logical);
  }
  return r;
}

double max_rel_diff(const BufferMap& a, const BufferMap& b) {
  double worst = 0.0;
  for (const auto& [id, va] : a) {
    auto it = b.find(id);
    if (it == b.end()) continue;
    const auto& vb = it->second;
    if (va.size() != vb.size()) return 1e30;
    for (size_t i = 0; i < va.size(); ++i) {
      double scale = std::max({1.0, std::abs(va[i]), std::abs(vb[i])});
      worst = std::max(worst, std::abs(va[i] - vb[i]) / scale);
    }
  }
  return worst;
}

BufferMap random_inputs(const Graph& g, uint64_t seed) {
  BufferMap m;
  std::mt19937_64 rng(seed);
  for (const auto& t : g.tensors) {
    if (t.role != Role::Input && t.role != Role::Constant) continue;
    std::vector<double> buf(t.num_elements());
    if (t.dtype == DType::Int32) {
      std::uniform_int_distribution<int> d(-4, 4);
      for (auto& x : buf) x = d(rng);
    } else {
      std::uniform_real_distribution<double> d(-1.0, 1.0);
      for (auto& x : buf) x = std::round(d(rng) * 64.0) / 64.0;
    }
    m[t.id] = std::move(buf);
  }
  return m;
}

}  // namespace lf
