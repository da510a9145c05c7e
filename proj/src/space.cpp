// SPDX-License-Identifier: Apache-2.0

#include "layoutforge/space.hpp"

#include <algorithm>
#include <cmath>

namespace lf {

std::vector<int64_t> divisors_of(int64_t n) {
  std::vector<int64_t> out;
  for (int64_t d = 1; d * d <= n; ++d) {
    if (n % d) continue;
    out.push_back(d);
    if (d != n / d) out.push_back(n / d);
  }
  std::sort(out.begin(), out.end());
  return out;
}

int64_t action_to_factor(double a_s, int64_t d) {
  double target = static_cast<double>(d) * a_s;
  int64_t best = 1;
  double best_dist = std::abs(target - 1.0);
  for (int64_t f : divisors_of(d)) {
    double dist = std::abs(target - static_cast<double>(f));
    if (dist < best_dist) {  // ties keep the smaller divisor
      best = f;
      best_dist = dist;
    }
  }
  return best;
}

namespace {

void add_tunable(LayoutTemplate* t, const std::string& label, const std::string& tensor,
                 int64_t extent) {
  TunableDim td;
  td.label = label;
  td.tensor = tensor;
  td.extent = extent;
  td.divisors = divisors_of(extent);
  t->tunables.push_back(td);
}

}  // namespace

std::map<int, LayoutTemplate> build_layout_space(const Graph& g, int tiling_levels) {
  std::map<int, LayoutTemplate> out;
  for (size_t i = 0; i < g.nodes.size(); ++i) {
    const OperatorNode& n = g.nodes[i];
    if (!is_complex_op(n.kind)) continue;
    LayoutTemplate t;
    t.node = static_cast<int>(i);
    t.kind = n.kind;
    t.tiling_levels = tiling_levels;
    const TensorDecl& outT = g.tensor(n.output);
    switch (n.kind) {
      case OpKind::C2D: {
        const TensorDecl& inp = g.tensor(n.inputs[0]);
        const TensorDecl& ker = g.tensor(n.inputs[1]);
        add_tunable(&t, "h_t", n.output, outT.dims[2].extent);
        add_tunable(&t, "w_t", n.output, outT.dims[3].extent);
        add_tunable(&t, "o_t", n.output, outT.dims[1].extent);
        add_tunable(&t, "i_t", n.inputs[0], inp.dims[1].extent);
        add_tunable(&t, "i_t2", n.inputs[1], ker.dims[1].extent);
        add_tunable(&t, "o_t2", n.inputs[1], ker.dims[0].extent);
        if (tiling_levels == 2) {
          add_tunable(&t, "h_l2", n.output, outT.dims[2].extent);
          add_tunable(&t, "w_l2", n.output, outT.dims[3].extent);
          add_tunable(&t, "o_l2", n.output, outT.dims[1].extent);
        }
        break;
      }
      case OpKind::DEP: {
        const TensorDecl& inp = g.tensor(n.inputs[0]);
        const TensorDecl& ker = g.tensor(n.inputs[1]);
        add_tunable(&t, "h_t", n.output, outT.dims[2].extent);
        add_tunable(&t, "w_t", n.output, outT.dims[3].extent);
        add_tunable(&t, "o_t", n.output, outT.dims[1].extent);
        add_tunable(&t, "i_t", n.inputs[0], inp.dims[1].extent);
        add_tunable(&t, "c_t2", n.inputs[1], ker.dims[0].extent);
        if (tiling_levels == 2) {
          add_tunable(&t, "h_l2", n.output, outT.dims[2].extent);
          add_tunable(&t, "w_l2", n.output, outT.dims[3].extent);
          add_tunable(&t, "o_l2", n.output, outT.dims[1].extent);
        }
        break;
      }
      case OpKind::GMM: {
        const TensorDecl& a = g.tensor(n.inputs[0]);
        add_tunable(&t, "m_t", n.output, outT.dims[0].extent);
        add_tunable(&t, "k_t", n.inputs[0], a.dims[1].extent);
        add_tunable(&t, "n_t", n.output, outT.dims[1].extent);
        break;
      }
      default:
        break;
    }
    out[t.node] = t;
  }
  return out;
}

std::vector<int64_t> identity_factors(const LayoutTemplate& t) {
  std::vector<int64_t> f;
  for (const auto& td : t.tunables)
    f.push_back(td.label.size() > 2 && td.label.substr(1, 2) == "_l" ? 1 : td.extent);
  return f;
}

namespace {

int64_t factor_of(const LayoutTemplate& t, const std::vector<int64_t>& factors,
                  const std::string& label, int64_t fallback) {
  for (size_t i = 0; i < t.tunables.size(); ++i)
    if (t.tunables[i].label == label) return factors[i];
  return fallback;
}

// Tile a set of dims of one tensor and reorder so block dims come first and
// intra-tile dims last, channel tile innermost:
//   original [D0 .. Dn] with tiles on a subset ->
//   [untiled..., outer..., inner...] per the requested final order.
struct TilePlan {
  // (dim index, tile size); tile == extent means untouched.
  std::vector<std::pair<int, int64_t>> tiles;
};

std::vector<LayoutPrimitive> tiled_seq(const std::vector<Dim>& dims, const TilePlan& plan,
                                       const std::vector<std::string>& final_order,
                                       const std::map<std::string, std::pair<int, int>>& naming) {
  // naming: final-order token -> (dim index, part) where part 0 = outer block
  // index, 1 = inner tile, -1 = untouched dim.
  std::vector<LayoutPrimitive> seq;
  // Apply splits back-to-front so earlier dim indices stay valid.
  std::vector<std::pair<int, int64_t>> splits;
  for (const auto& [d, tile] : plan.tiles)
    if (tile < dims[d].extent && tile >= 1) splits.emplace_back(d, tile);
  std::sort(splits.begin(), splits.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });

  // Track where each (dim, part) lands while applying splits.
  // position list: entries (dim, part) with part -1 whole, 0 outer, 1 inner.
  std::vector<std::pair<int, int>> pos;
  for (size_t d = 0; d < dims.size(); ++d) pos.emplace_back(static_cast<int>(d), -1);
  for (const auto& [d, tile] : splits) {
    int at = -1;
    for (size_t k = 0; k < pos.size(); ++k)
      if (pos[k] == std::make_pair(d, -1)) at = static_cast<int>(k);
    seq.push_back(LayoutPrimitive::split(at, {dims[d].extent / tile, tile}));
    pos[at] = {d, 0};
    pos.insert(pos.begin() + at + 1, {d, 1});
  }

  // Final reorder permutation.
  std::vector<int> perm;
  for (const auto& tok : final_order) {
    auto want = naming.at(tok);
    for (size_t k = 0; k < pos.size(); ++k)
      if (pos[k] == want) perm.push_back(static_cast<int>(k));
  }
  bool identity = perm.size() == pos.size();
  if (identity)
    for (size_t k = 0; k < perm.size(); ++k)
      if (perm[k] != static_cast<int>(k)) identity = false;
  if (!identity && perm.size() == pos.size()) seq.push_back(LayoutPrimitive::reorder(perm));
  return seq;
}

}  // namespace

SeqMap decode_layout(const Graph& g, const LayoutTemplate& t, const std::vector<int64_t>& factors) {
  if (factors.size() != t.tunables.size())
    throw Error("decode_layout: expected " + std::to_string(t.tunables.size()) + " factors");
  for (size_t i = 0; i < t.tunables.size(); ++i)
    if (t.tunables[i].extent % factors[i] != 0)
      throw Error("decode_layout: factor " + std::to_string(factors[i]) + " does not divide " +
                  t.tunables[i].label + " extent " + std::to_string(t.tunables[i].extent));

  const OperatorNode& n = g.nodes[t.node];
  SeqMap seqs;
  switch (t.kind) {
    case OpKind::C2D:
    case OpKind::DEP: {
      const TensorDecl& outT = g.tensor(n.output);
      const TensorDecl& inp = g.tensor(n.inputs[0]);
      const TensorDecl& ker = g.tensor(n.inputs[1]);
      int64_t v = n.attr("stride", 1);
      int64_t kh = t.kind == OpKind::C2D ? ker.dims[2].extent : ker.dims[1].extent;
      int64_t kw = t.kind == OpKind::C2D ? ker.dims[3].extent : ker.dims[2].extent;

      int64_t h_t = factor_of(t, factors, "h_t", outT.dims[2].extent);
      int64_t w_t = factor_of(t, factors, "w_t", outT.dims[3].extent);
      int64_t o_t = factor_of(t, factors, "o_t", outT.dims[1].extent);
      int64_t h_l2 = factor_of(t, factors, "h_l2", 1);
      int64_t w_l2 = factor_of(t, factors, "w_l2", 1);
      int64_t o_l2 = factor_of(t, factors, "o_l2", 1);

      // Output NOHW -> N (H/h)(W/w)(O/o) [level-2 tiles] h w o.
      {
        std::vector<Dim> dims = outT.dims;
        bool th = h_t < dims[2].extent, tw = w_t < dims[3].extent, to = o_t < dims[1].extent;
        std::vector<LayoutPrimitive> seq;
        // level-2 factors only apply below a level-1 tile.
        bool l2h = t.tiling_levels == 2 && th && h_l2 > 1 && h_t % h_l2 == 0 && h_l2 < h_t;
        bool l2w = t.tiling_levels == 2 && tw && w_l2 > 1 && w_t % w_l2 == 0 && w_l2 < w_t;
        bool l2o = t.tiling_levels == 2 && to && o_l2 > 1 && o_t % o_l2 == 0 && o_l2 < o_t;
        // Split back-to-front: W (3), H (2), O (1).
        if (tw) seq.push_back(LayoutPrimitive::split(3, l2w
                      ? std::vector<int64_t>{dims[3].extent / w_t, w_t / w_l2, w_l2}
                      : std::vector<int64_t>{dims[3].extent / w_t, w_t}));
        if (th) seq.push_back(LayoutPrimitive::split(2, l2h
                      ? std::vector<int64_t>{dims[2].extent / h_t, h_t / h_l2, h_l2}
                      : std::vector<int64_t>{dims[2].extent / h_t, h_t}));
        if (to) seq.push_back(LayoutPrimitive::split(1, l2o
                      ? std::vector<int64_t>{dims[1].extent / o_t, o_t / o_l2, o_l2}
                      : std::vector<int64_t>{dims[1].extent / o_t, o_t}));
        if (!seq.empty()) {
          // Build the reorder over the current dim list.
          // Current order after splits: N, O-parts, H-parts, W-parts.
          struct Part { char which; int level; };
          std::vector<Part> parts{{'n', -1}};
          auto push_parts = [&](char c, bool tiled, bool l2) {
            if (!tiled) {
              parts.push_back({c, -1});
            } else if (l2) {
              parts.push_back({c, 0});
              parts.push_back({c, 1});
              parts.push_back({c, 2});
            } else {
              parts.push_back({c, 0});
              parts.push_back({c, 1});
            }
          };
          push_parts('o', to, l2o);
          push_parts('h', th, l2h);
          push_parts('w', tw, l2w);
          auto index_of = [&](char c, int lvl) {
            for (size_t k = 0; k < parts.size(); ++k)
              if (parts[k].which == c && parts[k].level == lvl) return static_cast<int>(k);
            return -1;
          };
          std::vector<int> perm{index_of('n', -1)};
          auto add = [&](char c, int lvl) {
            int k = index_of(c, lvl);
            if (k >= 0) perm.push_back(k);
          };
          // Block indices (untiled dims sit here as-is).
          add('h', th ? 0 : -1);
          add('w', tw ? 0 : -1);
          add('o', to ? 0 : -1);
          // Level-2 blocks.
          if (l2h) add('h', 1);
          if (l2w) add('w', 1);
          if (l2o) add('o', 1);
          // Intra-tile dims, channel last.
          if (th) add('h', l2h ? 2 : 1);
          if (tw) add('w', l2w ? 2 : 1);
          if (to) add('o', l2o ? 2 : 1);
          bool identity = true;
          for (size_t k = 0; k < perm.size(); ++k)
            if (perm[k] != static_cast<int>(k)) identity = false;
          if (!identity) seq.push_back(LayoutPrimitive::reorder(perm));
        }
        if (!seq.empty()) seqs[n.output] = seq;
      }

      // Input NIHW -> N (H/h)(W/w)(I/i) B_h B_w i using overlapped tiling.
      {
        std::vector<Dim> dims = inp.dims;
        int64_t h_out = outT.dims[2].extent, w_out = outT.dims[3].extent;
        bool uh = h_t < h_out;
        bool uw = w_t < w_out;
        int64_t i_t = factor_of(t, factors, "i_t", inp.dims[1].extent);
        bool ti = i_t < dims[1].extent;
        std::vector<LayoutPrimitive> seq;
        int64_t bh = (h_t - 1) * v + kh, sh = h_t * v;
        int64_t bw = (w_t - 1) * v + kw, sw = w_t * v;
        // Split/unfold back-to-front: W (3), H (2), I (1).
        if (uw) seq.push_back(LayoutPrimitive::unfold(3, bw, sw));
        if (uh) seq.push_back(LayoutPrimitive::unfold(2, bh, sh));
        if (ti) seq.push_back(LayoutPrimitive::split(1, {dims[1].extent / i_t, i_t}));
        if (!seq.empty()) {
          // Current order: N, I-parts, H-parts, W-parts.
          std::vector<std::pair<char, int>> parts{{'n', -1}};
          if (ti) {
            parts.push_back({'i', 0});
            parts.push_back({'i', 1});
          } else {
            parts.push_back({'i', -1});
          }
          if (uh) {
            parts.push_back({'h', 0});
            parts.push_back({'h', 1});
          } else {
            parts.push_back({'h', -1});
          }
          if (uw) {
            parts.push_back({'w', 0});
            parts.push_back({'w', 1});
          } else {
            parts.push_back({'w', -1});
          }
          auto index_of = [&](char c, int lvl) {
            for (size_t k = 0; k < parts.size(); ++k)
              if (parts[k] == std::make_pair(c, lvl)) return static_cast<int>(k);
            return -1;
          };
          std::vector<int> perm{index_of('n', -1)};
          auto add = [&](char c, int lvl) {
            int k = index_of(c, lvl);
            if (k >= 0) perm.push_back(k);
          };
          add('h', uh ? 0 : -1);
          add('w', uw ? 0 : -1);
          add('i', ti ? 0 : -1);
          add('h', uh ? 1 : -2);
          add('w', uw ? 1 : -2);
          add('i', ti ? 1 : -2);
          bool identity = true;
          for (size_t k = 0; k < perm.size(); ++k)
            if (perm[k] != static_cast<int>(k)) identity = false;
          if (!identity) seq.push_back(LayoutPrimitive::reorder(perm));
          seqs[n.inputs[0]] = seq;
        }
      }

      // Weight: C2D OIKhKw -> (O/o')(I/i') KH KW i' o'; DEP CKhKw -> (C/c') KH KW c'.
      if (t.kind == OpKind::C2D) {
        int64_t i2 = factor_of(t, factors, "i_t2", ker.dims[1].extent);
        int64_t o2 = factor_of(t, factors, "o_t2", ker.dims[0].extent);
        bool ti = i2 < ker.dims[1].extent, to = o2 < ker.dims[0].extent;
        std::vector<LayoutPrimitive> seq;
        if (ti) seq.push_back(LayoutPrimitive::split(1, {ker.dims[1].extent / i2, i2}));
        if (to) seq.push_back(LayoutPrimitive::split(0, {ker.dims[0].extent / o2, o2}));
        if (!seq.empty()) {
          std::vector<std::pair<char, int>> parts;
          if (to) {
            parts.push_back({'o', 0});
            parts.push_back({'o', 1});
          } else {
            parts.push_back({'o', -1});
          }
          if (ti) {
            parts.push_back({'i', 0});
            parts.push_back({'i', 1});
          } else {
            parts.push_back({'i', -1});
          }
          parts.push_back({'h', -1});
          parts.push_back({'w', -1});
          auto index_of = [&](char c, int lvl) {
            for (size_t k = 0; k < parts.size(); ++k)
              if (parts[k] == std::make_pair(c, lvl)) return static_cast<int>(k);
            return -1;
          };
          std::vector<int> perm;
          auto add = [&](char c, int lvl) {
            int k = index_of(c, lvl);
            if (k >= 0) perm.push_back(k);
          };
          add('o', to ? 0 : -1);
          add('i', ti ? 0 : -1);
          add('h', -1);
          add('w', -1);
          if (ti) add('i', 1);
          if (to) add('o', 1);
          bool identity = true;
          for (size_t k = 0; k < perm.size(); ++k)
            if (perm[k] != static_cast<int>(k)) identity = false;
          if (!identity) seq.push_back(LayoutPrimitive::reorder(perm));
          seqs[n.inputs[1]] = seq;
        }
      } else {
        int64_t c2 = factor_of(t, factors, "c_t2", ker.dims[0].extent);
        if (c2 < ker.dims[0].extent) {
          std::vector<LayoutPrimitive> seq;
          seq.push_back(LayoutPrimitive::split(0, {ker.dims[0].extent / c2, c2}));
          // (C/c') c' KH KW -> (C/c') KH KW c'
          seq.push_back(LayoutPrimitive::reorder({0, 2, 3, 1}));
          seqs[n.inputs[1]] = seq;
        }
      }
      break;
    }
    case OpKind::GMM: {
      const TensorDecl& c = g.tensor(n.output);
      const TensorDecl& a = g.tensor(n.inputs[0]);
      const TensorDecl& b = g.tensor(n.inputs[1]);
      int64_t m_t = factor_of(t, factors, "m_t", c.dims[0].extent);
      int64_t k_t = factor_of(t, factors, "k_t", a.dims[1].extent);
      int64_t n_t = factor_of(t, factors, "n_t", c.dims[1].extent);
      auto two_d = [&](const TensorDecl& td, int64_t t0, int64_t t1) {
        std::vector<LayoutPrimitive> seq;
        bool s0 = t0 < td.dims[0].extent, s1 = t1 < td.dims[1].extent;
        if (s1) seq.push_back(LayoutPrimitive::split(1, {td.dims[1].extent / t1, t1}));
        if (s0) seq.push_back(LayoutPrimitive::split(0, {td.dims[0].extent / t0, t0}));
        if (s0 && s1) seq.push_back(LayoutPrimitive::reorder({0, 2, 1, 3}));
        else if (s0) seq.push_back(LayoutPrimitive::reorder({0, 2, 1}));
        // s1 only: (D0)(D1/t1)(t1) already block-then-tile; keep order.
        return seq;
      };
      auto sc = two_d(c, m_t, n_t);
      if (!sc.empty()) seqs[n.output] = sc;
      auto sa = two_d(a, m_t, k_t);
      if (!sa.empty()) seqs[n.inputs[0]] = sa;
      auto sb = two_d(b, k_t, n_t);
      if (!sb.empty()) seqs[n.inputs[1]] = sb;
      break;
    }
    default:
      break;
  }
  return seqs;
}

std::vector<double> encode_state(const Graph& g, const LayoutTemplate& t,
                                 const std::vector<int64_t>& factors, size_t decided) {
  const OperatorNode& n = g.nodes[t.node];
  std::vector<double> state;
  state.reserve(kLayoutStateWidth);
  // One (count, size) pair per original dimension of output, inputs.
  std::vector<std::string> tensors{n.output};
  tensors.insert(tensors.end(), n.inputs.begin(), n.inputs.end());
  for (const auto& id : tensors) {
    const TensorDecl& td = g.tensor(id);
    for (size_t d = 0; d < td.dims.size(); ++d) {
      int64_t extent = td.dims[d].extent;
      int64_t count = 1, size = extent;
      // Match a decided tunable targeting this tensor dim.
      for (size_t i = 0; i < t.tunables.size() && i < decided; ++i) {
        const TunableDim& tun = t.tunables[i];
        if (tun.tensor != id || tun.extent != extent) continue;
        if (tun.label.find("_l") != std::string::npos) continue;  // level-2 refinement
        bool is_h = tun.label[0] == 'h', is_w = tun.label[0] == 'w';
        bool dim_matches = false;
        if (t.kind == OpKind::C2D || t.kind == OpKind::DEP) {
          if (id == n.output || id == n.inputs[0])
            dim_matches = (is_h && d == 2) || (is_w && d == 3) ||
                          (tun.label[0] == 'o' && d == 1) || (tun.label[0] == 'i' && d == 1) ||
                          (tun.label[0] == 'c' && d == 0);
          if (id == n.inputs[1])
            dim_matches = (tun.label[0] == 'i' && d == 1) || (tun.label[0] == 'o' && d == 0) ||
                          (tun.label[0] == 'c' && d == 0);
        } else {
          dim_matches = (tun.label == "m_t" && d == 0 && id != n.inputs[1]) ||
                        (tun.label == "n_t" && d == 1 && id != n.inputs[0]) ||
                        (tun.label == "k_t" &&
                         ((id == n.inputs[0] && d == 1) || (id == n.inputs[1] && d == 0)));
        }
        if (!dim_matches) continue;
        int64_t f = factors[i];
        if ((t.kind == OpKind::C2D || t.kind == OpKind::DEP) && id == n.inputs[0] &&
            (is_h || is_w)) {
          // Unfold sub-state: [tiles, tile_size].
          const TensorDecl& ker = g.tensor(n.inputs[1]);
          int64_t v = n.attr("stride", 1);
          int64_t kk = t.kind == OpKind::C2D ? ker.dims[is_h ? 2 : 3].extent
                                             : ker.dims[is_h ? 1 : 2].extent;
          int64_t out_ext = g.tensor(n.output).dims[is_h ? 2 : 3].extent;
          if (f < out_ext) {
            int64_t b = (f - 1) * v + kk, s = f * v;
            count = (extent - b + s - 1) / s + 1;
            size = b;
          }
        } else if (f < extent) {
          count = extent / f;
          size = f;
        }
      }
      state.push_back(static_cast<double>(count));
      state.push_back(static_cast<double>(size));
    }
  }
  state.resize(kLayoutStateWidth, 0.0);
  return state;
}

// ---------------------------------------------------------------------------

LoopSpace build_loop_space(const Graph& g, const LoopNest& nest, bool has_ew_consumer) {
  (void)g;
  LoopSpace s;
  s.node = nest.node;
  s.has_ew_consumer = has_ew_consumer;
  for (const auto& l : nest.loops) {
    if (l.reduction)
      s.reduction_names.push_back(l.name);
    else {
      s.spatial_names.push_back(l.name);
      s.spatial_extents.push_back(l.extent);
    }
  }
  size_t ns = s.spatial_names.size();
  if (ns >= 1) s.params.push_back({"tile_" + s.spatial_names[ns - 1],
                                   divisors_of(s.spatial_extents[ns - 1])});
  if (ns >= 2) s.params.push_back({"tile_" + s.spatial_names[ns - 2],
                                   divisors_of(s.spatial_extents[ns - 2])});
  s.params.push_back({"order", {0, 1, 2}});
  s.params.push_back({"vectorize", {0, 1}});
  s.params.push_back({"parallel", {0, 1}});
  s.params.push_back({"unroll", {0, 1}});
  if (has_ew_consumer) s.params.push_back({"fuse", {0, 1}});
  return s;
}

std::vector<LoopSchedPrim> decode_loop_point(const LoopSpace& space, const LoopPoint& point) {
  auto value = [&](const std::string& name, int64_t fallback) {
    for (size_t i = 0; i < space.params.size(); ++i)
      if (space.params[i].name == name) return space.params[i].values[point[i]];
    return fallback;
  };

  std::vector<LoopSchedPrim> prims;
  std::vector<std::string> spatial = space.spatial_names;
  size_t ns = spatial.size();

  auto split_var = [&](size_t pos, int64_t factor, int64_t extent) {
    if (factor <= 1 || factor >= extent) return;
    LoopSchedPrim p;
    p.kind = LoopSchedPrim::Kind::Split;
    p.var = spatial[pos];
    p.factor = factor;
    prims.push_back(p);
    std::string base = spatial[pos];
    spatial[pos] = base + "o";
    spatial.insert(spatial.begin() + pos + 1, base + "i");
  };

  if (ns >= 2) {
    int64_t f2 = value("tile_" + spatial[ns - 2], 1);
    split_var(ns - 2, f2, space.spatial_extents[ns - 2]);
  }
  {
    size_t last = spatial.size() - 1;
    int64_t f1 = value("tile_" + space.spatial_names[ns - 1], 1);
    split_var(last, f1, space.spatial_extents[ns - 1]);
  }

  int64_t order_choice = value("order", 0);
  std::vector<std::string> order;
  size_t sink = order_choice == 0 ? 0 : (order_choice == 1 ? 1 : 2);
  sink = std::min(sink, spatial.size());
  order.insert(order.end(), spatial.begin(), spatial.end() - sink);
  order.insert(order.end(), space.reduction_names.begin(), space.reduction_names.end());
  order.insert(order.end(), spatial.end() - sink, spatial.end());
  if (!space.reduction_names.empty() || sink > 0) {
    LoopSchedPrim p;
    p.kind = LoopSchedPrim::Kind::Reorder;
    p.order = order;
    prims.push_back(p);
  }

  if (value("vectorize", 0) == 1 && !order.empty()) {
    // Only meaningful when the innermost loop is spatial.
    bool innermost_spatial =
        std::find(space.reduction_names.begin(), space.reduction_names.end(), order.back()) ==
        space.reduction_names.end();
    if (innermost_spatial) {
      LoopSchedPrim p;
      p.kind = LoopSchedPrim::Kind::Annotate;
      p.var = order.back();
      p.ann = Annotation::Vectorize;
      prims.push_back(p);
    }
  }
  if (value("parallel", 0) == 1 && !order.empty()) {
    LoopSchedPrim p;
    p.kind = LoopSchedPrim::Kind::Annotate;
    p.var = order.front();
    p.ann = Annotation::Parallel;
    prims.push_back(p);
  }
  if (value("unroll", 0) == 1 && order.size() >= 2) {
    LoopSchedPrim p;
    p.kind = LoopSchedPrim::Kind::Annotate;
    p.var = order[order.size() - 2];
    p.ann = Annotation::Unroll;
    prims.push_back(p);
  }
  if (value("fuse", 0) == 1) {
    LoopSchedPrim p;
    p.kind = LoopSchedPrim::Kind::FuseConsumer;
    prims.push_back(p);
  }
  return prims;
}

LoopPoint random_loop_point(const LoopSpace& space, std::mt19937_64* rng) {
  LoopPoint p(space.params.size());
  for (size_t i = 0; i < space.params.size(); ++i) {
    std::uniform_int_distribution<int> d(0, static_cast<int>(space.params[i].values.size()) - 1);
    p[i] = d(*rng);
  }
  return p;
}

LoopPoint default_loop_point(const LoopSpace& space) {
  LoopPoint p(space.params.size(), 0);
  return p;
}

std::vector<double> encode_loop_state(const LoopSpace& space, const LoopPoint& point) {
  std::vector<double> s;
  for (size_t i = 0; i < space.params.size(); ++i) {
    double denom = static_cast<double>(space.params[i].values.size());
    s.push_back(denom > 1 ? point[i] / (denom - 1) : 0.0);
  }
  s.resize(8, 0.0);
  return s;
}

}  // namespace lf
