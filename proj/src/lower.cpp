// SPDX-License-Identifier: Apache-2.0

#include "layoutforge/lower.hpp"

#include <algorithm>
#include <cassert>
#include <set>
#include <sstream>

namespace lf {

namespace {

std::vector<LayoutPrimitive> seq_for(const SeqMap& seqs, const std::string& id) {
  auto it = seqs.find(id);
  return it == seqs.end() ? std::vector<LayoutPrimitive>{} : it->second;
}

std::string lower_name(const std::string& dim_name) {
  std::string s = dim_name;
  for (char& c : s) c = static_cast<char>(::tolower(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace

PassResult rewrite_accesses_pass(const Graph& g, const SeqMap& seqs) {
  PassResult r;
  r.transformed = g;
  r.tensors.resize(g.tensors.size());

  // Stage 1: fold store_at offline. The source must be a constant and the
  // attachment must be the final primitive of its sequence.
  std::map<std::string, std::string> absorbed_by;  // src -> target
  for (size_t i = 0; i < g.tensors.size(); ++i) {
    const TensorDecl& t = g.tensors[i];
    ProgTensor& pt = r.tensors[i];
    pt.id = t.id;
    pt.dtype = t.dtype;
    pt.role = t.role;
    pt.orig_dims = t.dims;
    pt.seq = seq_for(seqs, t.id);

    for (size_t j = 0; j < pt.seq.size(); ++j) {
      const LayoutPrimitive& p = pt.seq[j];
      if (p.kind != PrimKind::StoreAt && p.kind != PrimKind::DecoupleAt) continue;
      if (p.kind == PrimKind::DecoupleAt)
        throw Error("decouple_at cannot appear in a compilation sequence");
      if (t.role != Role::Constant)
        throw Error("store_at on non-constant tensor '" + t.id +
                    "': layout fusion is offline only");
      if (j + 1 != pt.seq.size())
        throw Error("store_at must be the final primitive of '" + t.id + "'");
      if (!g.has_tensor(p.target)) throw Error("store_at target '" + p.target + "' unknown");
      pt.absorbed = true;
      pt.absorbed_into = p.target;
      pt.absorb_dim = p.dim;
      pt.absorb_prefix.assign(pt.seq.begin(), pt.seq.end() - 1);
      pt.seq.clear();
      absorbed_by[t.id] = p.target;
    }
  }

  // Stage 2: grow targets and validate the attachment shape.
  for (size_t i = 0; i < g.tensors.size(); ++i) {
    ProgTensor& pt = r.tensors[i];
    if (!pt.absorbed) continue;
    int ti = g.tensor_index(pt.absorbed_into);
    ProgTensor& target = r.tensors[ti];
    if (target.absorbed)
      throw Error("store_at target '" + target.id + "' is itself attached elsewhere");
    TensorDecl src_decl = g.tensors[i];
    src_decl.dims = derive_layout(src_decl.dims, pt.absorb_prefix);
    TensorDecl dst_decl;
    dst_decl.id = target.id;
    dst_decl.dims = target.orig_dims;
    StoreAtResult sa = apply_store_at(src_decl, dst_decl, pt.absorb_dim);
    pt.absorb_slot = sa.slot;
    target.orig_dims = sa.fused.dims;  // one extra slot along absorb_dim
  }

  // Stage 3: derive final layouts.
  for (size_t i = 0; i < g.tensors.size(); ++i) {
    ProgTensor& pt = r.tensors[i];
    if (pt.absorbed) {
      pt.dims.clear();
      r.transformed.tensors[i].dims = {{"absorbed", 1}};
      continue;
    }
    try {
      pt.dims = derive_layout(pt.orig_dims, pt.seq);
    } catch (const Error& e) {
      throw Error("tensor '" + pt.id + "': " + e.what());
    }
    r.transformed.tensors[i].dims = pt.dims;
  }
  return r;
}

int LoopNest::spatial_count() const {
  int n = 0;
  for (const auto& l : loops)
    if (!l.reduction) ++n;
  return n;
}

const LoopVar* LoopNest::find(const std::string& name) const {
  for (const auto& l : loops)
    if (l.name == name) return &l;
  return nullptr;
}

namespace {

struct AccessBuilder {
  const Graph& g;
  const PassResult& pass;
  int* counter;

  Expr fresh(LoopNest* nest, const std::string& name, int64_t extent, bool reduction,
             const std::string& origin) {
    LoopVar lv;
    lv.id = (*counter)++;
    lv.name = name;
    lv.extent = extent;
    lv.reduction = reduction;
    lv.origin = origin;
    nest->loops.push_back(lv);
    return make_var(lv.id, lv.name, lv.extent);
  }

  // Rewrites a logical access to `id` through its own sequence, following a
  // store_at redirection first if present.
  std::vector<Expr> rewrite_input(const std::string& id, std::vector<Expr> idxs,
                                  const WindowHints& hints, int* slot_out) {
    const ProgTensor& pt = pass.tensors[g.tensor_index(id)];
    if (pt.absorbed) {
      TensorDecl src = g.tensors[g.tensor_index(id)];
      idxs = rewrite_access(idxs, src.dims, pt.absorb_prefix, &hints);
      idxs.insert(idxs.begin() + pt.absorb_dim, make_const(pt.absorb_slot));
      const ProgTensor& target = pass.tensors[g.tensor_index(pt.absorbed_into)];
      *slot_out = g.tensor_index(pt.absorbed_into);
      return rewrite_access(idxs, target.orig_dims, target.seq, &hints);
    }
    *slot_out = g.tensor_index(id);
    return rewrite_access(idxs, pt.orig_dims, pt.seq, &hints);
  }
};

}  // namespace

LoopNest build_loop_nest(const Graph& g, const PassResult& pass, int node, int* var_counter) {
  const OperatorNode& n = g.nodes[node];
  const ProgTensor& out = pass.tensors[g.tensor_index(n.output)];
  if (out.absorbed) throw Error("operator output cannot be store_at-absorbed");

  // Each nest owns a disjoint block of variable ids so later splits never
  // collide with another nest's ids inside a fused program.
  *var_counter = ((*var_counter + 255) / 256) * 256;

  LoopNest nest;
  nest.node = node;
  nest.op = n.kind;
  nest.out_slot = g.tensor_index(n.output);

  AccessBuilder ab{g, pass, var_counter};

  // Spatial loops mirror the transformed output dims one-to-one.
  std::vector<Expr> new_vars;
  for (size_t d = 0; d < out.dims.size(); ++d) {
    new_vars.push_back(ab.fresh(&nest, lower_name(out.dims[d].name), out.dims[d].extent,
                                false, "d" + std::to_string(d)));
  }
  nest.out_idxs = new_vars;

  // Logical output coordinates: remap the new loop vars through the inverse
  // of the output sequence.
  std::vector<Expr> logical =
      rewrite_access(new_vars, out.dims, invert_sequence(out.orig_dims, out.seq));

  WindowHints hints;
  auto reduction = [&](const std::string& name, int64_t extent) {
    Expr v = ab.fresh(&nest, name, extent, true, "");
    hints.reduction_vars.emplace_back(nest.loops.back().id, extent);
    return v;
  };

  auto in_access = [&](const std::string& id, std::vector<Expr> idxs) {
    int slot = -1;
    std::vector<Expr> rewritten = ab.rewrite_input(id, std::move(idxs), hints, &slot);
    nest.in_slots.push_back(slot);
    nest.in_idxs.push_back(std::move(rewritten));
  };

  switch (n.kind) {
    case OpKind::C2D: {
      const TensorDecl& inp = g.tensor(n.inputs[0]);
      const TensorDecl& ker = g.tensor(n.inputs[1]);
      int64_t v = n.attr("stride", 1);
      Expr ri = reduction("ri", ker.dims[1].extent);
      Expr rh = reduction("rh", ker.dims[2].extent);
      Expr rw = reduction("rw", ker.dims[3].extent);
      (void)inp;
      Expr vh = make_add(make_mul(logical[2], make_const(v)), rh);
      Expr vw = make_add(make_mul(logical[3], make_const(v)), rw);
      in_access(n.inputs[0], {logical[0], ri, vh, vw});
      in_access(n.inputs[1], {logical[1], ri, rh, rw});
      break;
    }
    case OpKind::DEP: {
      const TensorDecl& ker = g.tensor(n.inputs[1]);
      int64_t v = n.attr("stride", 1);
      Expr rh = reduction("rh", ker.dims[1].extent);
      Expr rw = reduction("rw", ker.dims[2].extent);
      Expr vh = make_add(make_mul(logical[2], make_const(v)), rh);
      Expr vw = make_add(make_mul(logical[3], make_const(v)), rw);
      in_access(n.inputs[0], {logical[0], logical[1], vh, vw});
      in_access(n.inputs[1], {logical[1], rh, rw});
      break;
    }
    case OpKind::GMM: {
      const TensorDecl& a = g.tensor(n.inputs[0]);
      Expr rk = reduction("rk", a.dims[1].extent);
      in_access(n.inputs[0], {logical[0], rk});
      in_access(n.inputs[1], {rk, logical[1]});
      break;
    }
    case OpKind::Padding: {
      const TensorDecl& inp = g.tensor(n.inputs[0]);
      int64_t p = n.attr("pad", 0);
      nest.guard_offset = p;
      nest.guard.push_back({logical[2], p, p + inp.dims[2].extent});
      nest.guard.push_back({logical[3], p, p + inp.dims[3].extent});
      Expr h = make_add(logical[2], make_const(-p));
      Expr w = make_add(logical[3], make_const(-p));
      in_access(n.inputs[0], {logical[0], logical[1], h, w});
      break;
    }
    case OpKind::ReLU:
    case OpKind::LayoutConvert: {
      in_access(n.inputs[0], logical);
      break;
    }
    case OpKind::BiasAdd: {
      in_access(n.inputs[0], logical);
      Expr channel = logical.size() == 4 ? logical[1] : logical.back();
      in_access(n.inputs[1], {channel});
      break;
    }
    case OpKind::EwAdd: {
      in_access(n.inputs[0], logical);
      in_access(n.inputs[1], logical);
      break;
    }
  }
  nest.next_var_id = *var_counter;
  *var_counter += 128;  // reserve room for split-created vars
  return nest;
}

void loop_split(LoopNest* nest, const std::string& var, int64_t factor) {
  for (size_t i = 0; i < nest->loops.size(); ++i) {
    LoopVar& lv = nest->loops[i];
    if (lv.name != var) continue;
    if (factor < 1 || lv.extent % factor != 0)
      throw Error("loop_split: factor " + std::to_string(factor) + " does not divide extent " +
                  std::to_string(lv.extent) + " of " + var);
    LoopVar outer = lv, inner = lv;
    outer.name = var + "o";
    outer.extent = lv.extent / factor;
    outer.origin = lv.origin.empty() ? "" : lv.origin + ".o" + std::to_string(factor);
    inner.name = var + "i";
    inner.extent = factor;
    inner.origin = lv.origin.empty() ? "" : lv.origin + ".i" + std::to_string(factor);
    inner.id = nest->next_var_id++;

    Expr combined = make_add(make_mul(make_var(outer.id, outer.name, outer.extent),
                                      make_const(factor)),
                             make_var(inner.id, inner.name, inner.extent));
    std::unordered_map<int, Expr> repl{{lv.id, combined}};
    nest->loops[i] = outer;
    nest->loops.insert(nest->loops.begin() + i + 1, inner);
    for (auto& e : nest->out_idxs) e = expr_subst(e, repl);
    for (auto& v : nest->in_idxs)
      for (auto& e : v) e = expr_subst(e, repl);
    for (auto& c : nest->guard) c.e = expr_subst(c.e, repl);
    return;
  }
  throw Error("loop_split: no loop named " + var);
}

void loop_reorder(LoopNest* nest, const std::vector<std::string>& order) {
  if (order.size() != nest->loops.size())
    throw Error("loop_reorder: order names " + std::to_string(order.size()) + " loops, nest has " +
                std::to_string(nest->loops.size()));
  std::vector<LoopVar> out;
  std::vector<bool> used(nest->loops.size(), false);
  for (const auto& name : order) {
    bool found = false;
    for (size_t i = 0; i < nest->loops.size(); ++i) {
      if (!used[i] && nest->loops[i].name == name) {
        out.push_back(nest->loops[i]);
        used[i] = true;
        found = true;
        break;
      }
    }
    if (!found) throw Error("loop_reorder: unknown loop " + name);
  }
  nest->loops = std::move(out);
}

void annotate(LoopNest* nest, const std::string& var, Annotation ann) {
  for (size_t i = 0; i < nest->loops.size(); ++i) {
    LoopVar& lv = nest->loops[i];
    if (lv.name != var) continue;
    // Vectorize is position-checked here; the unit-stride condition needs
    // tensor extents and is validated by lower().
    if (ann == Annotation::Vectorize && i + 1 != nest->loops.size())
      throw Error("vectorize: " + var + " is not the innermost loop");
    lv.ann = ann;
    return;
  }
  throw Error("annotate: no loop named " + var);
}

int alignment_depth(const LoopNest& producer, const LoopNest& consumer) {
  int d = 0;
  size_t n = std::min(producer.loops.size(), consumer.loops.size());
  for (size_t i = 0; i < n; ++i) {
    const LoopVar& a = producer.loops[i];
    const LoopVar& b = consumer.loops[i];
    if (a.reduction || b.reduction) break;
    if (a.origin != b.origin || a.extent != b.extent || a.origin.empty()) break;
    ++d;
  }
  return d;
}

FusedGroup compute_at(const LoopNest& producer, const LoopNest& consumer, int depth) {
  int max_d = alignment_depth(producer, consumer);
  if (depth > max_d)
    throw Error("fusion-conflict: loop nests of node#" + std::to_string(producer.node) +
                " and node#" + std::to_string(consumer.node) + " align only to depth " +
                std::to_string(max_d) + ", requested " + std::to_string(depth));
  FusedGroup gp;
  gp.members = {producer, consumer};
  gp.depth = depth;
  return gp;
}

namespace {

// Body statements (innermost) for a nest, as a function of its accesses.
std::vector<Stmt> make_init_store(const LoopNest& n) {
  Stmt s;
  s.kind = StmtKind::Store;
  s.tensor = n.out_slot;
  s.idxs = n.out_idxs;
  s.value = val_imm(0.0);
  return {s};
}

std::vector<Stmt> make_body(const LoopNest& n) {
  std::vector<Stmt> out;
  Stmt s;
  s.kind = StmtKind::Store;
  s.tensor = n.out_slot;
  s.idxs = n.out_idxs;
  switch (n.op) {
    case OpKind::C2D:
    case OpKind::DEP:
    case OpKind::GMM: {
      Val acc = val_load(n.out_slot, n.out_idxs);
      Val prod = val_mul(val_load(n.in_slots[0], n.in_idxs[0]),
                         val_load(n.in_slots[1], n.in_idxs[1]));
      s.value = val_add(acc, prod);
      break;
    }
    case OpKind::ReLU:
      s.value = val_max(val_load(n.in_slots[0], n.in_idxs[0]), val_imm(0.0));
      break;
    case OpKind::BiasAdd:
    case OpKind::EwAdd:
      s.value = val_add(val_load(n.in_slots[0], n.in_idxs[0]),
                        val_load(n.in_slots[1], n.in_idxs[1]));
      break;
    case OpKind::LayoutConvert:
      s.value = val_load(n.in_slots[0], n.in_idxs[0]);
      break;
    case OpKind::Padding: {
      Stmt iff;
      iff.kind = StmtKind::IfElse;
      iff.conds = n.guard;
      Stmt store_in = s;
      store_in.value = val_load(n.in_slots[0], n.in_idxs[0]);
      Stmt store_zero = s;
      store_zero.value = val_imm(0.0);
      iff.then_body = {store_in};
      iff.else_body = {store_zero};
      out.push_back(iff);
      return out;
    }
  }
  out.push_back(s);
  return out;
}

Stmt make_for(const LoopVar& lv, std::vector<Stmt> body) {
  Stmt f;
  f.kind = StmtKind::For;
  f.var_id = lv.id;
  f.var_name = lv.name;
  f.extent = lv.extent;
  f.ann = lv.ann;
  f.body = std::move(body);
  return f;
}

std::vector<Stmt> wrap_loops(const std::vector<LoopVar>& loops, size_t from, size_t to,
                             std::vector<Stmt> body) {
  for (size_t i = to; i > from; --i) body = {make_for(loops[i - 1], std::move(body))};
  return body;
}

bool has_reduction(const LoopNest& n) {
  return n.op == OpKind::C2D || n.op == OpKind::DEP || n.op == OpKind::GMM;
}

// Emits the statement tree below `depth` outer loops. For reductions, the
// init store runs under the remaining spatial loops before the reduction
// block starts, mirroring the standard compute/init nesting.
std::vector<Stmt> emit_below(const LoopNest& n, int depth) {
  size_t total = n.loops.size();
  if (!has_reduction(n)) {
    return wrap_loops(n.loops, depth, total, make_body(n));
  }
  // Longest spatial prefix of the order.
  size_t prefix = 0;
  while (prefix < total && !n.loops[prefix].reduction) ++prefix;
  size_t d = static_cast<size_t>(depth);
  if (d > prefix) throw Error("emit: fusion depth crosses a reduction loop");

  // Init: spatial loops sunk past the first reduction get their own copy.
  std::vector<LoopVar> init_loops;
  for (size_t i = prefix; i < total; ++i)
    if (!n.loops[i].reduction) init_loops.push_back(n.loops[i]);
  std::vector<Stmt> init = wrap_loops(init_loops, 0, init_loops.size(), make_init_store(n));

  // Accumulate: everything below the prefix (reductions and sunken spatial).
  std::vector<Stmt> acc = wrap_loops(n.loops, prefix, total, make_body(n));

  // Shared spatial loops between depth and prefix host both blocks.
  std::vector<Stmt> body;
  body.insert(body.end(), init.begin(), init.end());
  body.insert(body.end(), acc.begin(), acc.end());
  return wrap_loops(n.loops, d, prefix, std::move(body));
}

}  // namespace

std::vector<Stmt> emit_nest(const LoopNest& nest) {
  std::vector<Stmt> below = emit_below(nest, 0);
  return below;
}

std::vector<Stmt> emit_group(const FusedGroup& group) {
  const LoopNest& host = group.members.back();
  size_t d = static_cast<size_t>(group.depth);
  std::vector<Stmt> body;
  for (size_t m = 0; m < group.members.size(); ++m) {
    const LoopNest& n = group.members[m];
    LoopNest renamed = n;
    if (m + 1 < group.members.size()) {
      // Substitute the producer's outer loop vars by the host's.
      std::unordered_map<int, Expr> repl;
      for (size_t i = 0; i < d; ++i)
        repl[n.loops[i].id] =
            make_var(host.loops[i].id, host.loops[i].name, host.loops[i].extent);
      for (auto& e : renamed.out_idxs) e = expr_subst(e, repl);
      for (auto& v : renamed.in_idxs)
        for (auto& e : v) e = expr_subst(e, repl);
      for (auto& c : renamed.guard) c.e = expr_subst(c.e, repl);
    }
    std::vector<Stmt> part = emit_below(renamed, group.depth);
    body.insert(body.end(), part.begin(), part.end());
  }
  return wrap_loops(host.loops, 0, d, std::move(body));
}

namespace {

void apply_schedule(LoopNest* nest, const LoopSchedule& sched, bool* fuse_consumer) {
  for (const auto& p : sched.prims) {
    switch (p.kind) {
      case LoopSchedPrim::Kind::Split:
        loop_split(nest, p.var, p.factor);
        break;
      case LoopSchedPrim::Kind::Reorder:
        loop_reorder(nest, p.order);
        break;
      case LoopSchedPrim::Kind::Annotate:
        annotate(nest, p.var, p.ann);
        break;
      case LoopSchedPrim::Kind::FuseConsumer:
        *fuse_consumer = true;
        break;
    }
  }
}

// Unit-stride legality for vectorize, with tensor dims in scope.
void check_vectorize(const Program& prog, const LoopNest& nest) {
  const LoopVar* target = nullptr;
  for (const auto& l : nest.loops)
    if (l.ann == Annotation::Vectorize) target = &l;
  if (!target) return;
  if (&nest.loops.back() != target)
    throw Error("vectorize: " + target->name + " is not the innermost loop");
  auto check_access = [&](int slot, const std::vector<Expr>& idxs) {
    const auto& dims = prog.tensors[slot].dims;
    int64_t rowstride = 1, total = 0;
    bool affine = true;
    for (int d = static_cast<int>(idxs.size()) - 1; d >= 0; --d) {
      LinearForm lin;
      if (to_linear(idxs[d], &lin)) {
        for (const auto& [vid, coeff] : lin.terms)
          if (vid == target->id) total += coeff * rowstride;
      } else {
        std::vector<int> vs;
        expr_vars(idxs[d], &vs);
        if (std::find(vs.begin(), vs.end(), target->id) != vs.end()) affine = false;
      }
      rowstride *= dims[d].extent;
    }
    if (!affine || (total != 0 && total != 1))
      throw Error("vectorize: non-unit stride for loop " + target->name);
  };
  check_access(nest.out_slot, nest.out_idxs);
  for (size_t i = 0; i < nest.in_slots.size(); ++i) check_access(nest.in_slots[i], nest.in_idxs[i]);
}

}  // namespace

Program lower(const Graph& g, const SeqMap& seqs, const std::vector<LoopSchedule>& schedules) {
  PassResult pass = rewrite_accesses_pass(g, seqs);
  Program prog;
  prog.tensors = pass.tensors;

  std::vector<int> order = topo_order(g);
  int counter = 0;

  std::vector<LoopNest> nests(g.nodes.size());
  std::vector<char> fuse_flag(g.nodes.size(), 0);
  for (int node : order) {
    nests[node] = build_loop_nest(g, pass, node, &counter);
    for (const auto& s : schedules)
      if (s.node == node) {
        bool fuse = false;
        apply_schedule(&nests[node], s, &fuse);
        if (fuse) fuse_flag[node] = 1;
      }
    check_vectorize(prog, nests[node]);
  }

  // Fusion groups: a flagged node absorbs its chain of single-consumer
  // element-wise consumers, fusing at the maximum aligned depth. A group is
  // emitted at its last member's position so that every other producer the
  // chain reads (e.g. the second operand of a fused EwAdd) runs first.
  std::map<int, std::vector<int>> group_of_host;
  std::set<int> grouped;
  for (int node : order) {
    if (!fuse_flag[node] || grouped.count(node)) continue;
    std::vector<int> chain{node};
    int cur = node;
    while (true) {
      auto consumers = g.consumers_of(g.nodes[cur].output);
      if (consumers.size() != 1) break;
      int c = consumers[0];
      if (!is_elementwise_op(g.nodes[c].kind) || grouped.count(c)) break;
      chain.push_back(c);
      cur = c;
    }
    if (chain.size() == 1) continue;
    for (int m : chain) grouped.insert(m);
    group_of_host[chain.back()] = chain;
  }

  std::set<int> in_group = grouped;
  for (int node : order) {
    auto host_it = group_of_host.find(node);
    if (host_it != group_of_host.end()) {
      const std::vector<int>& chain = host_it->second;
      const LoopNest& host = nests[chain.back()];
      int depth = host.spatial_count();
      for (int m : chain) depth = std::min(depth, alignment_depth(nests[m], host));
      FusedGroup gp;
      for (int m : chain) gp.members.push_back(nests[m]);
      gp.depth = depth;
      for (size_t m = 0; m + 1 < gp.members.size(); ++m) compute_at(gp.members[m], host, depth);
      auto part = emit_group(gp);
      prog.stmts.insert(prog.stmts.end(), part.begin(), part.end());
      continue;
    }
    if (in_group.count(node)) continue;  // emitted with its host
    auto part = emit_nest(nests[node]);
    prog.stmts.insert(prog.stmts.end(), part.begin(), part.end());
  }
  return prog;
}

}  // namespace lf
