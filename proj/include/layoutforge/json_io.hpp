// SPDX-License-Identifier: Apache-2.0
//
// JSON (de)serialization for graphs, primitive sequences, plans, schedules,
// cache configs and tuning reports. Dimension indices and permutations are
// 1-based on the wire, 0-based in code.

#pragma once

#include <nlohmann/json.hpp>
#include <string>

#include "layoutforge/cachesim.hpp"
#include "layoutforge/propagation.hpp"
#include "layoutforge/tuner.hpp"

namespace lf {

using Json = nlohmann::ordered_json;

Graph graph_from_json(const Json& j);
Json graph_to_json(const Graph& g);

std::vector<LayoutPrimitive> seq_from_json(const Json& j);
Json seq_to_json(const std::vector<LayoutPrimitive>& seq);

PropagationPlan plan_from_json(const Json& j, const Graph& g);
Json plan_to_json(const PropagationPlan& plan);

std::vector<LoopSchedule> schedules_from_json(const Json& j, const Graph& g);
Json schedules_to_json(const std::vector<LoopSchedule>& s, const Graph& g);

CacheConfig cache_config_from_json(const Json& j);
Json cache_config_to_json(const CacheConfig& c);

Json counters_to_json(const ProfileCounters& c);
Json tune_result_to_json(const TuneResult& r, const Graph& original);

Json load_json_file(const std::string& path);
void write_json_file(const std::string& path, const Json& j);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace lf
