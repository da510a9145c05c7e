// SPDX-License-Identifier: Apache-2.0
//
// Static program features for the cost surrogate.

#pragma once

#include <vector>

#include "layoutforge/program.hpp"

namespace lf {

inline constexpr int kMaxFeatureLoops = 32;
inline constexpr int kLoopFeatureWidth = 8;
inline constexpr int kGlobalFeatureWidth = 16;
inline constexpr int kFeatureLength =
    kMaxFeatureLoops * kLoopFeatureWidth + kGlobalFeatureWidth;

using FeatureVector = std::vector<double>;

/// Fixed-length, deterministic features: per-loop trip counts, depths,
/// arithmetic density, annotations and innermost access strides, plus global
/// static load/store/instruction estimates and tensor footprints.
FeatureVector extract_features(const Program& p);

}  // namespace lf
