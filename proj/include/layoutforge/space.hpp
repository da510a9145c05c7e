// SPDX-License-Identifier: Apache-2.0
//
// Layout tuning templates for complex operators, point decoding into
// primitive sequences, the divisor-snapped action mapping, and the RL state
// encoding.

#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "layoutforge/lower.hpp"

namespace lf {

/// One tunable split parameter: a divisor choice for one dimension of one of
/// the operator's tensors.
struct TunableDim {
  std::string label;       // "h_t", "o_t2", ...
  std::string tensor;      // tensor id the parameter applies to
  int64_t extent = 0;      // dimension extent being tiled
  std::vector<int64_t> divisors;
};

struct LayoutTemplate {
  int node = -1;
  OpKind kind = OpKind::C2D;
  int tiling_levels = 1;
  std::vector<TunableDim> tunables;

  int64_t space_size() const {
    int64_t s = 1;
    for (const auto& t : tunables) s *= static_cast<int64_t>(t.divisors.size());
    return s;
  }
};

/// One template per complex operator; simple operators receive propagated
/// layouts and get none.
std::map<int, LayoutTemplate> build_layout_space(const Graph& g, int tiling_levels = 1);

/// F = R(D * a_s): the divisor of D nearest to D*a_s, ties toward the
/// smaller divisor.
int64_t action_to_factor(double a_s, int64_t d);

std::vector<int64_t> divisors_of(int64_t n);

/// Factor values for a template (one per tunable, template order) decoded
/// into primitive sequences for the operator's tensors. A factor equal to
/// the full extent means "no tiling" for that dimension.
SeqMap decode_layout(const Graph& g, const LayoutTemplate& t, const std::vector<int64_t>& factors);

/// Identity choice: every factor at the full extent.
std::vector<int64_t> identity_factors(const LayoutTemplate& t);

inline constexpr int kLayoutStateWidth = 48;

/// Concatenated (count, size) sub-states across the operator's tensors,
/// zero-padded to a fixed width. Initial sub-state per dimension is [1, D].
std::vector<double> encode_state(const Graph& g, const LayoutTemplate& t,
                                 const std::vector<int64_t>& factors, size_t decided);

// ---------------------------------------------------------------------------
// Loop schedule space for one operator under a fixed layout.

struct LoopParam {
  std::string name;
  std::vector<int64_t> values;
};

struct LoopSpace {
  int node = -1;
  std::vector<LoopParam> params;
  std::vector<std::string> spatial_names;  // base nest order
  std::vector<std::string> reduction_names;
  std::vector<int64_t> spatial_extents;
  bool has_ew_consumer = false;

  int64_t size() const {
    int64_t s = 1;
    for (const auto& p : params) s *= static_cast<int64_t>(p.values.size());
    return s;
  }
};

using LoopPoint = std::vector<int>;  // value index per param

LoopSpace build_loop_space(const Graph& g, const LoopNest& nest, bool has_ew_consumer);

/// Renders a point as loop-schedule primitives (splits, one reorder, the
/// annotations and the fusion flag).
std::vector<LoopSchedPrim> decode_loop_point(const LoopSpace& space, const LoopPoint& point);

LoopPoint random_loop_point(const LoopSpace& space, std::mt19937_64* rng);
LoopPoint default_loop_point(const LoopSpace& space);

/// Normalized parameter-position vector used as the RL loop state.
std::vector<double> encode_loop_state(const LoopSpace& space, const LoopPoint& point);

}  // namespace lf
