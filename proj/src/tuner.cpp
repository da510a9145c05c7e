// SPDX-License-Identifier: Apache-2.0

#include "layoutforge/tuner.hpp"

#include <algorithm>
#include <future>
#include <numeric>
#include <sstream>

#include "layoutforge/log.hpp"

namespace lf {

namespace {

constexpr int kActionBins = 16;
constexpr int kStateDim = 64;

std::vector<double> pack_state(const std::vector<double>& layout_state,
                               const std::vector<double>& loop_state, int selector) {
  std::vector<double> s(kStateDim, 0.0);
  for (size_t i = 0; i < layout_state.size() && i < 48; ++i)
    s[i] = std::log2(1.0 + layout_state[i]);
  for (size_t i = 0; i < loop_state.size() && i < 8; ++i) s[48 + i] = loop_state[i];
  if (selector >= 0) s[56 + (selector % 8)] = 1.0;
  return s;
}

bool space_equal(const LoopSpace& a, const LoopSpace& b) {
  if (a.spatial_names != b.spatial_names) return false;
  if (a.spatial_extents != b.spatial_extents) return false;
  if (a.reduction_names != b.reduction_names) return false;
  if (a.params.size() != b.params.size()) return false;
  for (size_t i = 0; i < a.params.size(); ++i)
    if (a.params[i].name != b.params[i].name || a.params[i].values != b.params[i].values)
      return false;
  return true;
}

struct EvalOut {
  bool ok = false;
  double cost = std::numeric_limits<double>::infinity();
  ProfileCounters counters;
  FeatureVector feats;
};

}  // namespace

class Tuner {
 public:
  Tuner(const Graph& g, const Budget& b, const CacheConfig& cfg, const TuneOptions& opts)
      : g_(g), budget_(b), cfg_(cfg), opts_(opts), rng_(b.seed) {
    budget_.validate();
    auto violations = validate_graph(g_);
    if (!violations.empty()) throw Error("tune: invalid graph: " + violations.front());
    templates_ = build_layout_space(g_, opts.tiling_levels);
    for (int n : topo_order(g_))
      if (templates_.count(n)) complex_order_.push_back(n);
    ppo_cfg_ = PpoConfig{};
    critic_ = Critic(kStateDim, ppo_cfg_, &rng_);
    for (int op : complex_order_) {
      layout_actors_.emplace(op, CategoricalActor(kStateDim, kActionBins, ppo_cfg_, &rng_));
      layout_factors_[op] = identity_factors(templates_[op]);
    }
    remaining_joint_ = opts_.joint_enabled ? budget_.joint : 0;
    remaining_loop_ = budget_.loop_only + (opts_.joint_enabled ? 0 : budget_.joint);
  }

  TuneResult run() {
    TuneResult r;
    r.seed = budget_.seed;
    if (opts_.joint_enabled) {
      refresh_ctx();
    } else {
      ctx_plan_ = opts_.preset_plan;
      rebuild_graph_from_plan();
      rebuilds_joint_ = 0;
    }

    // Baseline measurement of the current (default or preset) configuration.
    if (remaining_joint_ + remaining_loop_ > 0) {
      evaluate(loop_points_, /*measure=*/true, /*want_feats=*/true,
               remaining_joint_ > 0 ? "joint" : "loop-only");
      if (remaining_joint_ > 0)
        --remaining_joint_;
      else
        --remaining_loop_;
    }

    if (opts_.joint_enabled) joint_stage();
    loop_only_stage();

    r.plan = ctx_plan_;
    r.final_graph = ctx_graph_;
    r.schedules = best_schedules_;
    r.best_cost = best_cost_;
    r.best_counters = best_counters_;
    r.history = history_;
    r.sim_calls = sims_;
    r.rebuilds_joint = rebuilds_joint_;
    r.rebuilds_loop_only = rebuilds_loop_;
    return r;
  }

 private:
  // --- context management ----------------------------------------------

  void refresh_ctx() {
    LayoutPlanner planner(g_);
    for (int op : complex_order_)
      planner.claim_operator(op, decode_layout(g_, templates_[op], layout_factors_[op]));
    ctx_plan_ = planner.take_plan();
    rebuild_graph_from_plan();
  }

  void rebuild_graph_from_plan() {
    PropagationPlan plan_copy = ctx_plan_;
    ConversionResult conv = insert_conversions(g_, &plan_copy);
    ctx_plan_ = plan_copy;
    ctx_graph_ = conv.graph;
    node_map_ = conv.node_map;

    PassResult pass = rewrite_accesses_pass(ctx_graph_, ctx_plan_.assignments);
    int counter = 0;
    std::map<int, LoopSpace> fresh;
    for (int op : complex_order_) {
      int nn = node_map_[op];
      LoopNest nest = build_loop_nest(ctx_graph_, pass, nn, &counter);
      bool has_consumer = false;
      auto consumers = ctx_graph_.consumers_of(ctx_graph_.nodes[nn].output);
      if (consumers.size() == 1 && is_elementwise_op(ctx_graph_.nodes[consumers[0]].kind))
        has_consumer = true;
      fresh[op] = build_loop_space(ctx_graph_, nest, has_consumer);

      auto old = spaces_.find(op);
      bool structurally_new = old == spaces_.end() || !space_equal(old->second, fresh[op]);
      if (structurally_new) {
        if (old != spaces_.end()) {
          if (in_loop_only_)
            ++rebuilds_loop_;
          else
            ++rebuilds_joint_;
        }
        loop_points_[op] = default_loop_point(fresh[op]);
      }
    }
    spaces_ = std::move(fresh);
  }

  // --- evaluation --------------------------------------------------------

  std::vector<LoopSchedule> schedules_for(const std::map<int, LoopPoint>& points) const {
    std::vector<LoopSchedule> out;
    for (int op : complex_order_) {
      auto it = points.find(op);
      if (it == points.end()) continue;
      LoopSchedule s;
      s.node = node_map_[op];
      s.prims = decode_loop_point(spaces_.at(op), it->second);
      out.push_back(s);
    }
    return out;
  }

  EvalOut evaluate(const std::map<int, LoopPoint>& points, bool measure, bool want_feats,
                   const std::string& stage) {
    EvalOut out;
    Program prog;
    try {
      prog = lower(ctx_graph_, ctx_plan_.assignments, schedules_for(points));
    } catch (const Error& e) {
      LF_LOG_DEBUG(std::string("candidate rejected: ") + e.what());
      return out;
    }
    out.ok = true;
    if (want_feats) out.feats = extract_features(prog);
    if (measure) {
      out.counters = simulate_cache(prog, cfg_);
      out.cost = out.counters.cost;
      ++sims_;
      history_.push_back({sims_, stage, out.cost});
      u_bound_ = std::max(u_bound_, out.cost);
      if (!out.feats.empty()) surrogate_.add(out.feats, out.cost);
      if (out.cost < best_cost_) {
        best_cost_ = out.cost;
        best_counters_ = out.counters;
        best_schedules_ = schedules_for(points);
      }
    }
    return out;
  }

  // Features (and validity) for candidate points of one operator, other
  // operators pinned at their current points. Optionally parallel; results
  // are consumed in candidate-index order regardless.
  std::vector<EvalOut> features_batch(int op, const std::vector<LoopPoint>& candidates) {
    std::vector<EvalOut> outs(candidates.size());
    auto job = [&](size_t i) {
      std::map<int, LoopPoint> pts = loop_points_;
      pts[op] = candidates[i];
      EvalOut e;
      try {
        Program prog = lower(ctx_graph_, ctx_plan_.assignments, schedules_for(pts));
        e.ok = true;
        e.feats = extract_features(prog);
      } catch (const Error&) {
        e.ok = false;
      }
      return e;
    };
    if (opts_.parallel_eval) {
      std::vector<std::future<EvalOut>> futs;
      futs.reserve(candidates.size());
      for (size_t i = 0; i < candidates.size(); ++i)
        futs.push_back(std::async(std::launch::async, job, i));
      for (size_t i = 0; i < candidates.size(); ++i) outs[i] = futs[i].get();
    } else {
      for (size_t i = 0; i < candidates.size(); ++i) outs[i] = job(i);
    }
    return outs;
  }

  // --- loop exploration ----------------------------------------------------

  struct ExploreResult {
    LoopPoint best_point;
    double best_cost = std::numeric_limits<double>::infinity();
    int consumed = 0;
  };

  std::vector<CategoricalActor>& direction_actors(int op) {
    auto it = loop_actors_.find(op);
    if (it == loop_actors_.end() || it->second.size() != spaces_.at(op).params.size()) {
      std::vector<CategoricalActor> actors;
      for (size_t i = 0; i < spaces_.at(op).params.size(); ++i)
        actors.emplace_back(kStateDim, 3, ppo_cfg_, &rng_);
      loop_actors_[op] = std::move(actors);
      it = loop_actors_.find(op);
    }
    return it->second;
  }

  ExploreResult measure_top(int op, const std::vector<LoopPoint>& candidates,
                            std::vector<EvalOut>* feats, int* remaining,
                            const std::string& stage) {
    ExploreResult res;
    std::vector<size_t> idx;
    for (size_t i = 0; i < candidates.size(); ++i)
      if ((*feats)[i].ok) idx.push_back(i);
    if (surrogate_.size() >= 8) {
      std::vector<double> pred(candidates.size(), 0.0);
      for (size_t i : idx) {
        auto p = surrogate_.predict((*feats)[i].feats);
        pred[i] = p ? *p : std::numeric_limits<double>::infinity();
      }
      std::stable_sort(idx.begin(), idx.end(),
                       [&](size_t a, size_t b) { return pred[a] < pred[b]; });
    }
    int to_measure = std::min<int>(budget_.top_k, *remaining);
    for (int k = 0; k < to_measure && k < static_cast<int>(idx.size()); ++k) {
      size_t i = idx[k];
      std::map<int, LoopPoint> pts = loop_points_;
      pts[op] = candidates[i];
      EvalOut e = evaluate(pts, /*measure=*/true, /*want_feats=*/true, stage);
      --*remaining;
      ++res.consumed;
      (*feats)[i].cost = e.cost;
      if (e.ok && e.cost < res.best_cost) {
        res.best_cost = e.cost;
        res.best_point = candidates[i];
      }
    }
    return res;
  }

  // One batch phase plus (rounds-1) guided-walk episodes, budget-bounded.
  ExploreResult explore_loop(int op, int rounds, int* remaining, const std::string& stage) {
    const LoopSpace& space = spaces_.at(op);
    ExploreResult best;

    if (*remaining > 0) {
      std::vector<LoopPoint> cand;
      cand.reserve(budget_.batch);
      cand.push_back(loop_points_[op]);
      while (static_cast<int>(cand.size()) < budget_.batch)
        cand.push_back(random_loop_point(space, &rng_));
      auto feats = features_batch(op, cand);
      ExploreResult r = measure_top(op, cand, &feats, remaining, stage);
      best.consumed += r.consumed;
      if (r.best_cost < best.best_cost) {
        best.best_cost = r.best_cost;
        best.best_point = r.best_point;
      }
    }

    auto& actors = direction_actors(op);
    std::vector<double> layout_state =
        encode_state(g_, templates_[op], layout_factors_[op], templates_[op].tunables.size());
    for (int round = 1; round < rounds && *remaining > 0; ++round) {
      LoopPoint cur = best.best_point.empty() ? loop_points_[op] : best.best_point;
      std::vector<LoopPoint> visited;
      std::vector<std::vector<PpoSample>> trajs(actors.size());
      for (int step = 0; step < budget_.episode; ++step) {
        for (size_t p = 0; p < actors.size(); ++p) {
          std::vector<double> st =
              pack_state(layout_state, encode_loop_state(space, cur), static_cast<int>(p));
          double logp = 0;
          int a = actors[p].sample(st, &rng_, &logp);
          int dir = a - 1;
          int nv = static_cast<int>(space.params[p].values.size());
          cur[p] = std::max(0, std::min(nv - 1, cur[p] + dir));
          trajs[p].push_back({st, a, logp, 0.0});
        }
        visited.push_back(cur);
      }
      auto feats = features_batch(op, visited);
      ExploreResult r = measure_top(op, visited, &feats, remaining, stage);
      best.consumed += r.consumed;
      if (r.best_cost < best.best_cost) {
        best.best_cost = r.best_cost;
        best.best_point = r.best_point;
      }

      // Rewards: simulated cost where measured, surrogate estimate otherwise.
      std::vector<double> rewards(visited.size(), 0.0);
      double fallback = std::isfinite(best.best_cost) ? best.best_cost : u_bound_;
      for (size_t i = 0; i < visited.size(); ++i) {
        double cost = fallback;
        if (std::isfinite(feats[i].cost)) {
          cost = feats[i].cost;
        } else if (feats[i].ok && surrogate_.size() >= 8) {
          auto p = surrogate_.predict(feats[i].feats);
          if (p) cost = *p;
        }
        rewards[i] = compute_reward(u_bound_, cost);
      }
      std::vector<std::vector<double>> states;
      std::vector<double> targets;
      for (size_t p = 0; p < actors.size(); ++p) {
        for (size_t stp = 0; stp < trajs[p].size(); ++stp) {
          trajs[p][stp].advantage = rewards[stp] - critic_.value(trajs[p][stp].state);
          states.push_back(trajs[p][stp].state);
          targets.push_back(rewards[stp]);
        }
        if (!actors[p].update(trajs[p]))
          LF_LOG_INFO("loop actor update skipped (non-finite gradients)");
      }
      critic_.update(states, targets);
    }
    return best;
  }

  // --- stages ----------------------------------------------------------------

  std::vector<int64_t> sample_layout(int op, std::vector<PpoSample>* traj) {
    const LayoutTemplate& t = templates_[op];
    std::vector<int64_t> factors = identity_factors(t);
    traj->clear();
    for (size_t i = 0; i < t.tunables.size(); ++i) {
      std::vector<double> st =
          pack_state(encode_state(g_, t, factors, i), {}, static_cast<int>(i));
      double logp = 0;
      int bin = layout_actors_.at(op).sample(st, &rng_, &logp);
      double a_s = (bin + 0.5) / static_cast<double>(kActionBins);
      factors[i] = action_to_factor(a_s, t.tunables[i].extent);
      traj->push_back({st, bin, logp, 0.0});
    }
    return factors;
  }

  void joint_stage() {
    if (complex_order_.empty() || remaining_joint_ <= 0) {
      remaining_loop_ += std::max(0, remaining_joint_);
      remaining_joint_ = 0;
      return;
    }
    int per_op = remaining_joint_ / static_cast<int>(complex_order_.size());
    int extra = remaining_joint_ - per_op * static_cast<int>(complex_order_.size());
    for (size_t oi = 0; oi < complex_order_.size(); ++oi) {
      int op = complex_order_[oi];
      int share = per_op + (oi == 0 ? extra : 0);
      double op_best = std::numeric_limits<double>::infinity();
      std::vector<int64_t> op_best_factors = identity_factors(templates_[op]);
      LoopPoint op_best_point;
      std::vector<int64_t> last_factors;
      int proposal = 0;
      while (share > 0) {
        std::vector<PpoSample> traj;
        std::vector<int64_t> factors =
            proposal == 0 ? identity_factors(templates_[op]) : sample_layout(op, &traj);
        ++proposal;
        if (factors != last_factors) {
          layout_factors_[op] = factors;
          refresh_ctx();
          last_factors = factors;
        }
        ExploreResult res = explore_loop(op, budget_.rounds, &share, "joint");
        remaining_joint_ -= res.consumed;
        if (res.consumed == 0) break;  // nothing measurable left
        double l = std::isfinite(res.best_cost) ? res.best_cost : u_bound_;
        double reward = compute_reward(u_bound_, l);
        if (!traj.empty()) {
          std::vector<std::vector<double>> states;
          std::vector<double> targets;
          for (auto& s : traj) {
            s.advantage = reward - critic_.value(s.state);
            states.push_back(s.state);
            targets.push_back(reward);
          }
          if (!layout_actors_.at(op).update(traj))
            LF_LOG_INFO("layout actor update skipped (non-finite gradients)");
          critic_.update(states, targets);
        }
        if (res.best_cost < op_best) {
          op_best = res.best_cost;
          op_best_factors = factors;
          op_best_point = res.best_point;
        }
      }
      if (layout_factors_[op] != op_best_factors) {
        layout_factors_[op] = op_best_factors;
        refresh_ctx();
      }
      if (!op_best_point.empty() &&
          op_best_point.size() == spaces_.at(op).params.size())
        loop_points_[op] = op_best_point;
    }
    remaining_loop_ += std::max(0, remaining_joint_);
    remaining_joint_ = 0;
  }

  void loop_only_stage() {
    in_loop_only_ = true;
    if (complex_order_.empty()) return;
    size_t oi = 0;
    int stalls = 0;
    while (remaining_loop_ > 0 && stalls < static_cast<int>(complex_order_.size())) {
      int op = complex_order_[oi % complex_order_.size()];
      ++oi;
      ExploreResult res = explore_loop(op, budget_.rounds, &remaining_loop_, "loop-only");
      if (res.consumed == 0) {
        ++stalls;
        continue;
      }
      stalls = 0;
      if (std::isfinite(res.best_cost) && !res.best_point.empty() &&
          res.best_cost <= best_cost_ + 1e-12)
        loop_points_[op] = res.best_point;
    }
  }

  // --- members -----------------------------------------------------------------

  Graph g_;
  Budget budget_;
  CacheConfig cfg_;
  TuneOptions opts_;
  std::mt19937_64 rng_;
  CostModel surrogate_;
  PpoConfig ppo_cfg_;
  Critic critic_;

  std::map<int, LayoutTemplate> templates_;
  std::vector<int> complex_order_;
  std::map<int, CategoricalActor> layout_actors_;
  std::map<int, std::vector<CategoricalActor>> loop_actors_;

  std::map<int, std::vector<int64_t>> layout_factors_;
  std::map<int, LoopPoint> loop_points_;

  PropagationPlan ctx_plan_;
  Graph ctx_graph_;
  std::vector<int> node_map_;
  std::map<int, LoopSpace> spaces_;

  int remaining_joint_ = 0;
  int remaining_loop_ = 0;
  bool in_loop_only_ = false;
  int sims_ = 0;
  double u_bound_ = 0;
  double best_cost_ = std::numeric_limits<double>::infinity();
  ProfileCounters best_counters_;
  std::vector<LoopSchedule> best_schedules_;
  std::vector<TuneHistoryEntry> history_;
  int rebuilds_joint_ = 0;
  int rebuilds_loop_ = 0;
};

TuneResult tune(const Graph& g, const Budget& budget, const CacheConfig& cfg,
                const TuneOptions& opts) {
  Tuner t(g, budget, cfg, opts);
  return t.run();
}

}  // namespace lf
