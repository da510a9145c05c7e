// SPDX-License-Identifier: Apache-2.0

#include "layoutforge/json_io.hpp"

#include <fstream>

namespace lf {

namespace {

OpKind op_kind_from_string(const std::string& s) {
  if (s == "C2D") return OpKind::C2D;
  if (s == "DEP") return OpKind::DEP;
  if (s == "GMM") return OpKind::GMM;
  if (s == "Padding") return OpKind::Padding;
  if (s == "ReLU") return OpKind::ReLU;
  if (s == "BiasAdd") return OpKind::BiasAdd;
  if (s == "EwAdd") return OpKind::EwAdd;
  if (s == "LayoutConvert") return OpKind::LayoutConvert;
  throw Error("unknown operator kind '" + s + "'");
}

Role role_from_string(const std::string& s) {
  if (s == "input") return Role::Input;
  if (s == "constant") return Role::Constant;
  if (s == "intermediate") return Role::Intermediate;
  if (s == "output") return Role::Output;
  throw Error("unknown tensor role '" + s + "'");
}

const char* role_to_string(Role r) {
  switch (r) {
    case Role::Input: return "input";
    case Role::Constant: return "constant";
    case Role::Intermediate: return "intermediate";
    case Role::Output: return "output";
  }
  return "?";
}

Annotation annotation_from_string(const std::string& s) {
  if (s == "parallel") return Annotation::Parallel;
  if (s == "unroll") return Annotation::Unroll;
  if (s == "vectorize") return Annotation::Vectorize;
  throw Error("unknown annotation '" + s + "'");
}

int node_index_by_output(const Graph& g, const std::string& out) {
  int idx = g.producer_of(out);
  if (idx < 0) throw Error("schedule references unknown node output '" + out + "'");
  return idx;
}

}  // namespace

Graph graph_from_json(const Json& j) {
  Graph g;
  if (!j.contains("tensors") || !j.contains("nodes"))
    throw Error("graph JSON must contain 'tensors' and 'nodes'");
  for (const auto& t : j.at("tensors")) {
    TensorDecl d;
    d.id = t.at("id").get<std::string>();
    for (const auto& dim : t.at("dims")) {
      Dim dd;
      dd.name = dim.at("name").get<std::string>();
      dd.extent = dim.value("extent", int64_t{0});
      d.dims.push_back(dd);
    }
    std::string dtype = t.value("dtype", std::string("float32"));
    d.dtype = dtype == "int32" ? DType::Int32 : DType::Float32;
    d.role = role_from_string(t.value("role", std::string("intermediate")));
    g.tensors.push_back(d);
  }
  for (const auto& n : j.at("nodes")) {
    OperatorNode node;
    node.kind = op_kind_from_string(n.at("kind").get<std::string>());
    if (n.contains("attrs"))
      for (auto it = n.at("attrs").begin(); it != n.at("attrs").end(); ++it)
        node.attrs[it.key()] = it.value().get<int64_t>();
    for (const auto& in : n.at("inputs")) node.inputs.push_back(in.get<std::string>());
    node.output = n.at("output").get<std::string>();
    g.nodes.push_back(node);
  }
  return g;
}

Json graph_to_json(const Graph& g) {
  Json j;
  j["tensors"] = Json::array();
  for (const auto& t : g.tensors) {
    Json jt;
    jt["id"] = t.id;
    jt["dims"] = Json::array();
    for (const auto& d : t.dims) jt["dims"].push_back({{"name", d.name}, {"extent", d.extent}});
    jt["dtype"] = t.dtype == DType::Int32 ? "int32" : "float32";
    jt["role"] = role_to_string(t.role);
    j["tensors"].push_back(jt);
  }
  j["nodes"] = Json::array();
  for (const auto& n : g.nodes) {
    Json jn;
    jn["kind"] = op_kind_name(n.kind);
    jn["attrs"] = Json::object();
    for (const auto& [k, v] : n.attrs) jn["attrs"][k] = v;
    jn["inputs"] = n.inputs;
    jn["output"] = n.output;
    j["nodes"].push_back(jn);
  }
  return j;
}

std::vector<LayoutPrimitive> seq_from_json(const Json& j) {
  std::vector<LayoutPrimitive> seq;
  for (const auto& p : j) {
    std::string op = p.at("op").get<std::string>();
    if (op == "split") {
      seq.push_back(LayoutPrimitive::split(p.at("dim").get<int>() - 1,
                                           p.at("factors").get<std::vector<int64_t>>()));
    } else if (op == "reorder") {
      std::vector<int> perm = p.at("perm").get<std::vector<int>>();
      for (auto& x : perm) --x;
      seq.push_back(LayoutPrimitive::reorder(perm));
    } else if (op == "fuse") {
      std::vector<int> dims = p.at("dims").get<std::vector<int>>();
      for (size_t i = 1; i < dims.size(); ++i)
        if (dims[i] != dims[i - 1] + 1) throw Error("fuse: dims must be contiguous");
      seq.push_back(LayoutPrimitive::fuse(dims.front() - 1, static_cast<int>(dims.size())));
    } else if (op == "unfold") {
      seq.push_back(LayoutPrimitive::unfold(p.at("dim").get<int>() - 1,
                                            p.at("tile").get<int64_t>(),
                                            p.at("stride").get<int64_t>()));
    } else if (op == "pad") {
      seq.push_back(LayoutPrimitive::padding(p.at("dim").get<int>() - 1,
                                             p.at("size").get<int64_t>()));
    } else if (op == "store_at") {
      seq.push_back(LayoutPrimitive::store_at(p.at("target").get<std::string>(),
                                              p.at("dim").get<int>() - 1));
    } else {
      throw Error("unknown layout primitive '" + op + "'");
    }
  }
  return seq;
}

Json seq_to_json(const std::vector<LayoutPrimitive>& seq) {
  Json j = Json::array();
  for (const auto& p : seq) {
    Json jp;
    switch (p.kind) {
      case PrimKind::Split:
        jp = {{"op", "split"}, {"dim", p.dim + 1}, {"factors", p.factors}};
        break;
      case PrimKind::Reorder: {
        std::vector<int> perm = p.perm;
        for (auto& x : perm) ++x;
        jp = {{"op", "reorder"}, {"perm", perm}};
        break;
      }
      case PrimKind::Fuse: {
        std::vector<int> dims;
        for (int k = 0; k < p.span; ++k) dims.push_back(p.dim + 1 + k);
        jp = {{"op", "fuse"}, {"dims", dims}};
        break;
      }
      case PrimKind::Unfold:
        jp = {{"op", "unfold"}, {"dim", p.dim + 1}, {"tile", p.tile}, {"stride", p.stride}};
        break;
      case PrimKind::Pad:
        jp = {{"op", "pad"}, {"dim", p.dim + 1}, {"size", p.pad}};
        break;
      case PrimKind::StoreAt:
        jp = {{"op", "store_at"}, {"target", p.target}, {"dim", p.dim + 1}};
        break;
      default:
        throw Error("inverse primitives are not serialized");
    }
    j.push_back(jp);
  }
  return j;
}

PropagationPlan plan_from_json(const Json& j, const Graph& g) {
  PropagationPlan plan;
  if (j.contains("assignments"))
    for (auto it = j.at("assignments").begin(); it != j.at("assignments").end(); ++it)
      plan.assignments[it.key()] = seq_from_json(it.value());
  if (j.contains("conversions"))
    for (const auto& c : j.at("conversions")) {
      ConversionSpec spec;
      spec.tensor = c.at("edge").at(0).get<std::string>();
      std::string consumer_out = c.at("edge").at(1).get<std::string>();
      spec.consumer = node_index_by_output(g, consumer_out);
      spec.to_seq = seq_from_json(c.at("seq"));
      plan.conversions.push_back(spec);
    }
  return plan;
}

Json plan_to_json(const PropagationPlan& plan) {
  Json j;
  j["assignments"] = Json::object();
  for (const auto& [t, seq] : plan.assignments) j["assignments"][t] = seq_to_json(seq);
  j["conversions"] = Json::array();
  for (const auto& c : plan.conversions) {
    // The consumer is stored by node index at planning time; serialization
    // happens against the original graph where the edge is (tensor, node).
    j["conversions"].push_back(
        {{"edge", {c.tensor, c.consumer}}, {"seq", seq_to_json(c.to_seq)}});
  }
  return j;
}

std::vector<LoopSchedule> schedules_from_json(const Json& j, const Graph& g) {
  std::vector<LoopSchedule> out;
  for (const auto& s : j) {
    LoopSchedule ls;
    if (s.contains("output"))
      ls.node = node_index_by_output(g, s.at("output").get<std::string>());
    else
      ls.node = s.at("node").get<int>();
    for (const auto& p : s.at("prims")) {
      std::string op = p.at("op").get<std::string>();
      LoopSchedPrim sp;
      if (op == "split") {
        sp.kind = LoopSchedPrim::Kind::Split;
        sp.var = p.at("var").get<std::string>();
        sp.factor = p.at("factor").get<int64_t>();
      } else if (op == "reorder") {
        sp.kind = LoopSchedPrim::Kind::Reorder;
        sp.order = p.at("order").get<std::vector<std::string>>();
      } else if (op == "annotate") {
        sp.kind = LoopSchedPrim::Kind::Annotate;
        sp.var = p.at("var").get<std::string>();
        sp.ann = annotation_from_string(p.at("ann").get<std::string>());
      } else if (op == "fuse_consumer") {
        sp.kind = LoopSchedPrim::Kind::FuseConsumer;
      } else {
        throw Error("unknown loop primitive '" + op + "'");
      }
      ls.prims.push_back(sp);
    }
    out.push_back(ls);
  }
  return out;
}

Json schedules_to_json(const std::vector<LoopSchedule>& s, const Graph& g) {
  Json j = Json::array();
  for (const auto& ls : s) {
    Json js;
    js["output"] = g.nodes.at(ls.node).output;
    js["prims"] = Json::array();
    for (const auto& p : ls.prims) {
      switch (p.kind) {
        case LoopSchedPrim::Kind::Split:
          js["prims"].push_back({{"op", "split"}, {"var", p.var}, {"factor", p.factor}});
          break;
        case LoopSchedPrim::Kind::Reorder:
          js["prims"].push_back({{"op", "reorder"}, {"order", p.order}});
          break;
        case LoopSchedPrim::Kind::Annotate:
          js["prims"].push_back(
              {{"op", "annotate"}, {"var", p.var}, {"ann", annotation_name(p.ann)}});
          break;
        case LoopSchedPrim::Kind::FuseConsumer:
          js["prims"].push_back({{"op", "fuse_consumer"}});
          break;
      }
    }
    j.push_back(js);
  }
  return j;
}

CacheConfig cache_config_from_json(const Json& j) {
  CacheConfig c;
  c.line_elems = j.value("line_elems", c.line_elems);
  c.num_lines = j.value("num_lines", c.num_lines);
  c.prefetch_lines = j.value("prefetch_lines", c.prefetch_lines);
  if (j.contains("weights")) {
    auto w = j.at("weights").get<std::vector<double>>();
    if (w.size() != 4) throw Error("cache config: weights must have 4 entries");
    for (int i = 0; i < 4; ++i) c.weights[i] = w[i];
  }
  c.vector_lanes = j.value("vector_lanes", c.vector_lanes);
  c.parallel_threads = j.value("parallel_threads", c.parallel_threads);
  if (c.line_elems < 1 || c.num_lines < 1 || c.prefetch_lines < 1)
    throw Error("cache config: line_elems, num_lines, prefetch_lines must be positive");
  return c;
}

Json cache_config_to_json(const CacheConfig& c) {
  return Json{{"line_elems", c.line_elems},
              {"num_lines", c.num_lines},
              {"prefetch_lines", c.prefetch_lines},
              {"weights", {c.weights[0], c.weights[1], c.weights[2], c.weights[3]}},
              {"vector_lanes", c.vector_lanes},
              {"parallel_threads", c.parallel_threads}};
}

Json counters_to_json(const ProfileCounters& c) {
  return Json{{"insts", c.insts},
              {"l1_loads", c.l1_loads},
              {"l1_misses", c.l1_misses},
              {"l1_stores", c.l1_stores},
              {"cost", c.cost}};
}

Json tune_result_to_json(const TuneResult& r, const Graph& original) {
  Json j;
  Json plan = plan_to_json(r.plan);
  // Conversions serialize the consumer as its output tensor in the original
  // graph so reports stay valid across node insertion.
  plan["conversions"] = Json::array();
  for (const auto& c : r.plan.conversions)
    plan["conversions"].push_back({{"edge", {c.tensor, original.nodes.at(c.consumer).output}},
                                   {"seq", seq_to_json(c.to_seq)}});
  j["plan"] = plan;
  j["schedules"] = schedules_to_json(r.schedules, r.final_graph);
  j["best_cost"] = r.best_cost;
  j["counters"] = counters_to_json(r.best_counters);
  j["history"] = Json::array();
  for (const auto& h : r.history)
    j["history"].push_back({{"step", h.step}, {"stage", h.stage}, {"cost", h.cost}});
  j["seed"] = r.seed;
  j["sim_calls"] = r.sim_calls;
  j["rebuilds"] = {{"joint", r.rebuilds_joint}, {"loop_only", r.rebuilds_loop_only}};
  return j;
}

Json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  Json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw Error("invalid JSON in '" + path + "': " + e.what());
  }
  return j;
}

void write_json_file(const std::string& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  out << j.dump(2) << "\n";
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  out << text;
}

}  // namespace lf
