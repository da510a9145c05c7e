// SPDX-License-Identifier: Apache-2.0

#include "layoutforge/layout.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <sstream>

namespace lf {

const char* prim_kind_name(PrimKind k) {
  switch (k) {
    case PrimKind::Split: return "split";
    case PrimKind::Reorder: return "reorder";
    case PrimKind::Fuse: return "fuse";
    case PrimKind::Unfold: return "unfold";
    case PrimKind::Pad: return "pad";
    case PrimKind::StoreAt: return "store_at";
    case PrimKind::Fold: return "fold";
    case PrimKind::Unpad: return "unpad";
    case PrimKind::DecoupleAt: return "decouple_at";
  }
  return "?";
}

LayoutPrimitive LayoutPrimitive::split(int dim, std::vector<int64_t> factors) {
  LayoutPrimitive p;
  p.kind = PrimKind::Split;
  p.dim = dim;
  p.factors = std::move(factors);
  return p;
}

LayoutPrimitive LayoutPrimitive::reorder(std::vector<int> perm) {
  LayoutPrimitive p;
  p.kind = PrimKind::Reorder;
  p.perm = std::move(perm);
  return p;
}

LayoutPrimitive LayoutPrimitive::fuse(int first_dim, int count) {
  LayoutPrimitive p;
  p.kind = PrimKind::Fuse;
  p.dim = first_dim;
  p.span = count;
  return p;
}

LayoutPrimitive LayoutPrimitive::unfold(int dim, int64_t tile, int64_t stride) {
  LayoutPrimitive p;
  p.kind = PrimKind::Unfold;
  p.dim = dim;
  p.tile = tile;
  p.stride = stride;
  return p;
}

LayoutPrimitive LayoutPrimitive::padding(int dim, int64_t size) {
  LayoutPrimitive p;
  p.kind = PrimKind::Pad;
  p.dim = dim;
  p.pad = size;
  return p;
}

LayoutPrimitive LayoutPrimitive::store_at(std::string target, int dim) {
  LayoutPrimitive p;
  p.kind = PrimKind::StoreAt;
  p.target = std::move(target);
  p.dim = dim;
  return p;
}

namespace {

[[noreturn]] void fail(const LayoutPrimitive& p, const std::string& why) {
  throw Error(std::string(prim_kind_name(p.kind)) + ": " + why);
}

void check_dim(const std::vector<Dim>& dims, const LayoutPrimitive& p, int dim) {
  if (dim < 0 || dim >= static_cast<int>(dims.size()))
    fail(p, "dim " + std::to_string(dim) + " out of range for rank " +
                std::to_string(dims.size()));
}

int64_t unfold_tiles(int64_t d, int64_t b, int64_t s) {
  // ceil((D - B) / S) + 1
  return (d - b + s - 1) / s + 1;
}

}  // namespace

std::vector<Dim> apply_primitive_shape(const std::vector<Dim>& dims,
                                       const LayoutPrimitive& p) {
  std::vector<Dim> out;
  switch (p.kind) {
    case PrimKind::Split: {
      check_dim(dims, p, p.dim);
      if (p.factors.empty()) fail(p, "needs at least one factor");
      int64_t prod = 1;
      for (int64_t f : p.factors) {
        if (f < 1) fail(p, "factor < 1");
        prod *= f;
      }
      if (prod != dims[p.dim].extent)
        fail(p, "factors multiply to " + std::to_string(prod) + ", dim " + dims[p.dim].name +
                    " has extent " + std::to_string(dims[p.dim].extent));
      out.assign(dims.begin(), dims.begin() + p.dim);
      for (size_t j = 0; j < p.factors.size(); ++j)
        out.push_back({dims[p.dim].name + std::to_string(j), p.factors[j]});
      out.insert(out.end(), dims.begin() + p.dim + 1, dims.end());
      return out;
    }
    case PrimKind::Reorder: {
      if (p.perm.size() != dims.size()) fail(p, "permutation length mismatch");
      std::vector<bool> seen(dims.size(), false);
      for (int j : p.perm) {
        if (j < 0 || j >= static_cast<int>(dims.size()) || seen[j])
          fail(p, "not a permutation");
        seen[j] = true;
      }
      for (int j : p.perm) out.push_back(dims[j]);
      return out;
    }
    case PrimKind::Fuse: {
      check_dim(dims, p, p.dim);
      if (p.span < 1) fail(p, "span < 1");
      if (p.dim + p.span > static_cast<int>(dims.size()))
        fail(p, "fused dims must be contiguous and in range");
      out.assign(dims.begin(), dims.begin() + p.dim);
      int64_t prod = 1;
      std::string name;
      for (int j = 0; j < p.span; ++j) {
        prod *= dims[p.dim + j].extent;
        name += dims[p.dim + j].name;
      }
      out.push_back({name, prod});
      out.insert(out.end(), dims.begin() + p.dim + p.span, dims.end());
      return out;
    }
    case PrimKind::Unfold: {
      check_dim(dims, p, p.dim);
      int64_t d = dims[p.dim].extent;
      if (p.stride < 1 || p.stride > p.tile || p.tile > d)
        fail(p, "requires 1 <= stride <= tile <= extent (tile=" + std::to_string(p.tile) +
                    ", stride=" + std::to_string(p.stride) + ", extent=" + std::to_string(d) + ")");
      out = dims;
      Dim inner{dims[p.dim].name + "1", p.tile};
      out[p.dim] = {dims[p.dim].name + "0", unfold_tiles(d, p.tile, p.stride)};
      out.insert(out.begin() + p.dim + 1, inner);
      return out;
    }
    case PrimKind::Pad: {
      check_dim(dims, p, p.dim);
      if (p.pad < 0) fail(p, "pad size < 0");
      out = dims;
      out[p.dim].extent += p.pad;
      return out;
    }
    case PrimKind::Fold: {
      check_dim(dims, p, p.dim);
      if (p.dim + 1 >= static_cast<int>(dims.size())) fail(p, "needs two adjacent dims");
      if (dims[p.dim + 1].extent != p.tile) fail(p, "inner dim does not match tile size");
      out.assign(dims.begin(), dims.begin() + p.dim);
      std::string name = dims[p.dim].name;
      if (!name.empty() && name.back() == '0') name.pop_back();
      out.push_back({name, p.orig_extent});
      out.insert(out.end(), dims.begin() + p.dim + 2, dims.end());
      return out;
    }
    case PrimKind::Unpad: {
      check_dim(dims, p, p.dim);
      if (p.pad < 0 || p.pad >= dims[p.dim].extent) fail(p, "unpad size out of range");
      out = dims;
      out[p.dim].extent -= p.pad;
      return out;
    }
    case PrimKind::StoreAt:
    case PrimKind::DecoupleAt:
      fail(p, "requires graph context; resolved by the rewrite pass");
  }
  return out;
}

std::vector<Expr> apply_primitive_access(const std::vector<Expr>& idxs,
                                         const std::vector<Dim>& dims,
                                         const LayoutPrimitive& p,
                                         const WindowHints* hints) {
  if (idxs.size() != dims.size())
    fail(p, "access arity " + std::to_string(idxs.size()) + " vs rank " +
                std::to_string(dims.size()));
  std::vector<Expr> out;
  switch (p.kind) {
    case PrimKind::Split: {
      check_dim(dims, p, p.dim);
      out.assign(idxs.begin(), idxs.begin() + p.dim);
      const Expr& e = idxs[p.dim];
      size_t m = p.factors.size();
      // Table-style mixed radix: component j = (e / prod(F[j+1..])) mod F[j],
      // the leading component needs no mod, the trailing one no div.
      for (size_t j = 0; j < m; ++j) {
        int64_t suffix = 1;
        for (size_t l = j + 1; l < m; ++l) suffix *= p.factors[l];
        Expr c = make_floordiv(e, suffix);
        if (j > 0) c = make_mod(c, p.factors[j]);
        out.push_back(c);
      }
      out.insert(out.end(), idxs.begin() + p.dim + 1, idxs.end());
      return out;
    }
    case PrimKind::Reorder: {
      if (p.perm.size() != dims.size()) fail(p, "permutation length mismatch");
      for (int j : p.perm) out.push_back(idxs[j]);
      return out;
    }
    case PrimKind::Fuse: {
      check_dim(dims, p, p.dim);
      out.assign(idxs.begin(), idxs.begin() + p.dim);
      Expr acc = make_const(0);
      for (int j = 0; j < p.span; ++j) {
        int64_t suffix = 1;
        for (int l = j + 1; l < p.span; ++l) suffix *= dims[p.dim + l].extent;
        acc = make_add(acc, make_mul(idxs[p.dim + j], make_const(suffix)));
      }
      out.push_back(acc);
      out.insert(out.end(), idxs.begin() + p.dim + p.span, idxs.end());
      return out;
    }
    case PrimKind::Unfold: {
      check_dim(dims, p, p.dim);
      int64_t d = dims[p.dim].extent;
      int64_t tiles = unfold_tiles(d, p.tile, p.stride);
      const Expr& e = idxs[p.dim];
      Expr tile_idx, offset;
      bool window_done = false;
      if (hints) {
        // Sliding-window pattern V*i + r: r is a reduction variable with
        // coefficient 1 and extent M <= B; the tile index becomes
        // floor(i / (floor((B-M)/V) + 1)) and the offset V*i + r - S*tile.
        LinearForm lin;
        if (to_linear(e, &lin)) {
          for (const auto& [rv, m] : hints->reduction_vars) {
            auto it = std::find_if(lin.terms.begin(), lin.terms.end(),
                                   [&](const auto& t) { return t.first == rv; });
            if (it == lin.terms.end() || it->second != 1) continue;
            if (lin.terms.size() < 2) continue;  // no window-index part
            if (m > p.tile) fail(p, "window size exceeds tile size");
            // Remaining part must be V * i with a common positive stride V.
            int64_t v = 0;
            for (const auto& [var, coeff] : lin.terms)
              if (var != rv) v = std::gcd(v, std::abs(coeff));
            v = std::gcd(v, std::abs(lin.constant));
            if (v == 0) v = 1;
            int64_t windows = (p.tile - m) / v + 1;
            if (p.stride != v * windows) continue;  // pattern inconsistent; fall back
            // Build i = (e - r) / V symbolically.
            Expr r_node;
            std::function<void(const Expr&)> find_r = [&](const Expr& x) {
              if (r_node) return;
              if (x->kind == ExprKind::Var && x->var_id == rv) {
                r_node = x;
                return;
              }
              if (x->a) find_r(x->a);
              if (x->b) find_r(x->b);
            };
            find_r(e);
            if (!r_node) continue;
            Expr without_r = make_add(e, make_mul(r_node, make_const(-1)));
            Expr i_sym = make_floordiv(without_r, v);  // exact: all coeffs divisible by v
            tile_idx = make_floordiv(i_sym, windows);
            ExprRange tr = expr_range(tile_idx);
            if (tr.hi > tiles - 1) tile_idx = make_min(tile_idx, tiles - 1);
            offset = make_add(e, make_mul(tile_idx, make_const(-p.stride)));
            window_done = true;
            break;
          }
        }
      }
      if (!window_done) {
        // Plain rewrite: tile = min(floor(e / S), tiles - 1); offset = e - S*tile.
        tile_idx = make_floordiv(e, p.stride);
        ExprRange tr = expr_range(tile_idx);
        if (tr.hi > tiles - 1) tile_idx = make_min(tile_idx, tiles - 1);
        offset = make_add(e, make_mul(tile_idx, make_const(-p.stride)));
      }
      out = idxs;
      out[p.dim] = tile_idx;
      out.insert(out.begin() + p.dim + 1, offset);
      return out;
    }
    case PrimKind::Pad:
    case PrimKind::Unpad:
      return idxs;
    case PrimKind::Fold: {
      check_dim(dims, p, p.dim);
      if (p.dim + 1 >= static_cast<int>(dims.size())) fail(p, "needs two adjacent dims");
      out.assign(idxs.begin(), idxs.begin() + p.dim);
      out.push_back(make_add(make_mul(idxs[p.dim], make_const(p.stride)), idxs[p.dim + 1]));
      out.insert(out.end(), idxs.begin() + p.dim + 2, idxs.end());
      return out;
    }
    case PrimKind::StoreAt:
    case PrimKind::DecoupleAt:
      fail(p, "requires graph context; resolved by the rewrite pass");
  }
  return out;
}

std::vector<Dim> derive_layout(const std::vector<Dim>& original,
                               const std::vector<LayoutPrimitive>& seq) {
  std::vector<Dim> dims = original;
  for (size_t i = 0; i < seq.size(); ++i) {
    try {
      dims = apply_primitive_shape(dims, seq[i]);
    } catch (const Error& e) {
      throw Error("primitive #" + std::to_string(i) + ": " + e.what());
    }
  }
  return dims;
}

std::vector<Expr> rewrite_access(const std::vector<Expr>& idxs,
                                 const std::vector<Dim>& original,
                                 const std::vector<LayoutPrimitive>& seq,
                                 const WindowHints* hints) {
  std::vector<Dim> dims = original;
  std::vector<Expr> cur = idxs;
  for (const auto& p : seq) {
    cur = apply_primitive_access(cur, dims, p, hints);
    dims = apply_primitive_shape(dims, p);
  }
  return cur;
}

std::vector<LayoutPrimitive> invert_sequence(const std::vector<Dim>& original,
                                             const std::vector<LayoutPrimitive>& seq) {
  // Walk forward to capture the shape context each primitive acts on.
  std::vector<std::vector<Dim>> shapes;
  shapes.push_back(original);
  for (const auto& p : seq) shapes.push_back(apply_primitive_shape(shapes.back(), p));

  std::vector<LayoutPrimitive> inv;
  for (int i = static_cast<int>(seq.size()) - 1; i >= 0; --i) {
    const LayoutPrimitive& p = seq[i];
    const std::vector<Dim>& before = shapes[i];
    switch (p.kind) {
      case PrimKind::Split:
        inv.push_back(LayoutPrimitive::fuse(p.dim, static_cast<int>(p.factors.size())));
        break;
      case PrimKind::Reorder: {
        std::vector<int> ip(p.perm.size());
        for (size_t j = 0; j < p.perm.size(); ++j) ip[p.perm[j]] = static_cast<int>(j);
        inv.push_back(LayoutPrimitive::reorder(ip));
        break;
      }
      case PrimKind::Fuse: {
        std::vector<int64_t> factors;
        for (int j = 0; j < p.span; ++j) factors.push_back(before[p.dim + j].extent);
        inv.push_back(LayoutPrimitive::split(p.dim, factors));
        break;
      }
      case PrimKind::Unfold: {
        LayoutPrimitive f;
        f.kind = PrimKind::Fold;
        f.dim = p.dim;
        f.tile = p.tile;
        f.stride = p.stride;
        f.orig_extent = before[p.dim].extent;
        inv.push_back(f);
        break;
      }
      case PrimKind::Pad: {
        LayoutPrimitive u;
        u.kind = PrimKind::Unpad;
        u.dim = p.dim;
        u.pad = p.pad;
        inv.push_back(u);
        break;
      }
      case PrimKind::Fold:
        inv.push_back(LayoutPrimitive::unfold(p.dim, p.tile, p.stride));
        break;
      case PrimKind::Unpad: {
        LayoutPrimitive q = LayoutPrimitive::padding(p.dim, p.pad);
        inv.push_back(q);
        break;
      }
      case PrimKind::StoreAt: {
        LayoutPrimitive d;
        d.kind = PrimKind::DecoupleAt;
        d.dim = p.dim;
        d.target = p.target;
        inv.push_back(d);
        break;
      }
      case PrimKind::DecoupleAt: {
        inv.push_back(LayoutPrimitive::store_at(p.target, p.dim));
        break;
      }
    }
  }
  return inv;
}

bool is_basic_primitive(const LayoutPrimitive& p) {
  return p.kind == PrimKind::Split || p.kind == PrimKind::Reorder || p.kind == PrimKind::Fuse;
}

bool is_propagatable(const LayoutPrimitive& p) {
  if (is_basic_primitive(p)) return true;
  return p.kind == PrimKind::Pad && p.pad == 0;
}

bool seq_is_propagatable(const std::vector<LayoutPrimitive>& seq, std::string* reason) {
  for (const auto& p : seq) {
    if (!is_propagatable(p)) {
      if (reason)
        *reason = std::string("advanced primitive causes data expansion: ") +
                  prim_kind_name(p.kind);
      return false;
    }
  }
  return true;
}

bool seq_equal(const std::vector<LayoutPrimitive>& a, const std::vector<LayoutPrimitive>& b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i) {
    const auto &x = a[i], &y = b[i];
    if (x.kind != y.kind || x.dim != y.dim || x.factors != y.factors || x.perm != y.perm ||
        x.span != y.span || x.tile != y.tile || x.stride != y.stride || x.pad != y.pad ||
        x.target != y.target)
      return false;
  }
  return true;
}

std::vector<Expr> StoreAtResult::map_src(const std::vector<Expr>& idxs) const {
  std::vector<Expr> out = idxs;
  out.insert(out.begin() + dim, make_const(slot));
  return out;
}

std::vector<Expr> StoreAtResult::map_dst(const std::vector<Expr>& idxs) const {
  return idxs;
}

StoreAtResult apply_store_at(const TensorDecl& src, const TensorDecl& dst, int dim) {
  if (dim < 0 || dim >= static_cast<int>(dst.dims.size()))
    throw Error("store_at: dim out of range");
  if (src.dims.size() + 1 != dst.dims.size())
    throw Error("store_at: source must match target with one dim removed");
  for (size_t i = 0, j = 0; i < dst.dims.size(); ++i) {
    if (static_cast<int>(i) == dim) continue;
    if (src.dims[j].extent != dst.dims[i].extent)
      throw Error("store_at: shape incompatibility at target dim " + std::to_string(i));
    ++j;
  }
  StoreAtResult r;
  r.fused = dst;
  r.dim = dim;
  r.slot = dst.dims[dim].extent;
  r.fused.dims[dim].extent += 1;
  return r;
}

}  // namespace lf
