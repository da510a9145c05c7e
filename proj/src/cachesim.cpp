// SPDX-License-Identifier: Apache-2.0

#include "layoutforge/cachesim.hpp"

#include <algorithm>
#include <list>
#include <unordered_map>

namespace lf {

namespace {

class LruCache {
 public:
  explicit LruCache(int64_t capacity) : capacity_(capacity) {}

  bool contains(int64_t line) const { return map_.count(line) != 0; }

  void touch(int64_t line) {
    auto it = map_.find(line);
    if (it == map_.end()) return;
    order_.splice(order_.begin(), order_, it->second);
  }

  void insert(int64_t line) {
    auto it = map_.find(line);
    if (it != map_.end()) {
      order_.splice(order_.begin(), order_, it->second);
      return;
    }
    order_.push_front(line);
    map_[line] = order_.begin();
    while (static_cast<int64_t>(order_.size()) > capacity_) {
      map_.erase(order_.back());
      order_.pop_back();
    }
  }

 private:
  int64_t capacity_;
  std::list<int64_t> order_;
  std::unordered_map<int64_t, std::list<int64_t>::iterator> map_;
};

struct Sim {
  const Program& prog;
  const CacheConfig& cfg;
  LruCache cache;
  ProfileCounters counters;
  double cost_insts = 0, cost_loads = 0, cost_stores = 0, cost_loop = 0;
  std::vector<int64_t> base;  // per-tensor base address (elements)
  std::vector<std::vector<int64_t>> ext;
  std::vector<int64_t> env;
  double mult = 1.0;  // annotation cost multiplier

  explicit Sim(const Program& p, const CacheConfig& c) : prog(p), cfg(c), cache(c.num_lines) {}

  int64_t addr(int tensor, const std::vector<Expr>& idxs) {
    const auto& e = ext[tensor];
    int64_t f = 0;
    for (size_t i = 0; i < idxs.size(); ++i) f = f * e[i] + expr_eval(idxs[i], env.data());
    return base[tensor] + f;
  }

  void load(int64_t a) {
    ++counters.l1_loads;
    cost_loads += mult;
    int64_t line = a / cfg.line_elems;
    if (cache.contains(line)) {
      cache.touch(line);
      return;
    }
    ++counters.l1_misses;
    for (int64_t k = cfg.prefetch_lines - 1; k >= 0; --k) cache.insert(line + k);
  }

  void store(int64_t a) {
    ++counters.l1_stores;
    cost_stores += mult;
    cache.insert(a / cfg.line_elems);
  }

  double eval(const Val& v) {
    switch (v->kind) {
      case ValKind::Load:
        load(addr(v->tensor, v->idxs));
        return 0.0;
      case ValKind::Imm:
        return 0.0;
      case ValKind::Add:
      case ValKind::Mul:
      case ValKind::Max:
        eval(v->a);
        eval(v->b);
        ++counters.insts;
        cost_insts += mult;
        return 0.0;
    }
    return 0.0;
  }

  void run(const Stmt& s) {
    switch (s.kind) {
      case StmtKind::For: {
        double saved = mult;
        if (s.ann == Annotation::Vectorize)
          mult /= static_cast<double>(std::min(s.extent, cfg.vector_lanes));
        if (s.ann == Annotation::Parallel)
          mult /= static_cast<double>(std::min(s.extent, cfg.parallel_threads));
        double header = s.ann == Annotation::Unroll ? 0.0 : 1.0;
        for (int64_t i = 0; i < s.extent; ++i) {
          env[s.var_id] = i;
          cost_loop += header * mult;
          for (const auto& c : s.body) run(c);
        }
        mult = saved;
        break;
      }
      case StmtKind::Store:
        eval(s.value);
        store(addr(s.tensor, s.idxs));
        break;
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
        eval(s.eval);
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

ProfileCounters simulate_cache(const Program& p, const CacheConfig& cfg) {
  Sim sim(p, cfg);
  sim.base.resize(p.tensors.size(), 0);
  sim.ext.resize(p.tensors.size());
  int64_t next = 0;
  for (size_t i = 0; i < p.tensors.size(); ++i) {
    const ProgTensor& t = p.tensors[i];
    for (const auto& d : t.dims) sim.ext[i].push_back(d.extent);
    if (t.absorbed) continue;
    sim.base[i] = next;
    int64_t words = t.num_elements();
    next += ((words + cfg.line_elems - 1) / cfg.line_elems) * cfg.line_elems;
  }
  int vmax = 0;
  for (const auto& s : p.stmts) vmax = std::max(vmax, max_var_id(s));
  sim.env.assign(vmax + 2, 0);
  for (const auto& s : p.stmts) sim.run(s);

  sim.counters.cost = cfg.weights[0] * sim.cost_insts + cfg.weights[1] * sim.cost_loads +
                      cfg.weights[2] * static_cast<double>(sim.counters.l1_misses) +
                      cfg.weights[3] * sim.cost_stores + sim.cost_loop;
  return sim.counters;
}

}  // namespace lf
