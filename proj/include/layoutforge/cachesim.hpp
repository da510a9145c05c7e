// SPDX-License-Identifier: Apache-2.0
//
// Deterministic L1 cache simulator with hardware-prefetch modeling: the cost
// oracle standing in for on-device latency measurements.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "layoutforge/program.hpp"

namespace lf {

struct CacheConfig {
  int64_t line_elems = 16;     // elements per cache line (float32 x 16 = 64B)
  int64_t num_lines = 512;     // fully-associative LRU capacity
  int64_t prefetch_lines = 4;  // contiguous lines fetched per load miss
  double weights[4] = {1, 1, 30, 2};  // insts, loads, misses, stores
  int64_t vector_lanes = 4;    // vectorize cost divisor
  int64_t parallel_threads = 4;  // parallel cost divisor
};

struct ProfileCounters {
  int64_t insts = 0;      // arithmetic operations executed
  int64_t l1_loads = 0;
  int64_t l1_misses = 0;  // load misses only
  int64_t l1_stores = 0;
  double cost = 0.0;      // annotation-weighted latency surrogate
};

/// Replays every load/store through the LRU model. Tensor base addresses are
/// assigned contiguously in declaration order, each aligned to a line
/// boundary. A load miss fetches prefetch_lines contiguous lines; stores
/// write-allocate without counting misses.
ProfileCounters simulate_cache(const Program& p, const CacheConfig& cfg);

}  // namespace lf
