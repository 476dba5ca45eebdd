// SPDX-License-Identifier: Apache-2.0
//
// The fused executor: P workers walk a Stream-K plan over the tile space,
// each unit fetching an activation tile plus the matching weight slices and
// scales, combining bit slices, dequantizing pairs through the vectorized
// table, and accumulating fragment MMAs in binary32. Split output tiles are
// reconciled through binary16 partial buffers guarded by counting semaphores;
// the reduction order is fixed (contributors in ascending k order, finisher
// last), so results are bitwise identical across runs, thread counts, and
// serial-vs-parallel execution.
#pragma once

#include <cstdint>

#include "flutesim/matrix.hpp"
#include "flutesim/pack.hpp"
#include "flutesim/quantize.hpp"
#include "flutesim/streamk.hpp"
#include "flutesim/vec_lut.hpp"

namespace flutesim {

// Global-memory traffic counters (bytes) and the MAC count (x2 flops).
struct TrafficStats {
  std::uint64_t bytes_weights = 0;
  std::uint64_t bytes_scales = 0;
  std::uint64_t bytes_table = 0;
  std::uint64_t bytes_activations = 0;
  std::uint64_t bytes_partials_rw = 0;
  std::uint64_t bytes_output = 0;
  std::uint64_t flops = 0;

  std::uint64_t total_bytes() const {
    return bytes_weights + bytes_scales + bytes_table + bytes_activations +
           bytes_partials_rw + bytes_output;
  }
  double arithmetic_intensity() const {
    return total_bytes() == 0
               ? 0.0
               : static_cast<double>(flops) / static_cast<double>(total_bytes());
  }

  TrafficStats& operator+=(const TrafficStats& o);
};

enum class ExecMode {
  kSerial,    // P logical workers multiplexed on the calling thread
  kParallel,  // OpenMP workers with real signal/wait fixup
};

struct MatmulProblem {
  const MatH* x = nullptr;                 // m x k activations
  const PackedWeights* weights = nullptr;  // packed k x n indices + layout
  const std::vector<Half>* scales = nullptr;
  const VectorizedTable* lut = nullptr;
  QuantConfig cfg;
  int workers = 1;
  int stages = 2;    // prefetch pipeline depth (bookkeeping only)
  int tile_m = 0;    // 0: use the layout's tile_m
  ExecMode mode = ExecMode::kParallel;
};

struct MatmulResult {
  MatH y;
  TrafficStats stats;
};

// Runs the full pipeline. Rows beyond m are zero-padded inside tiles and
// never counted as global traffic. Throws ConfigError / InputError on
// malformed problems; a worker failure surfaces as InternalError naming the
// worker.
MatmulResult execute(const MatmulProblem& problem);

// Index bits plus one binary16 scale per group; the tensor-level table
// amortizes to zero.
double bits_per_param(const QuantConfig& cfg);

// Quantized weight+scale bytes over 16-bit dense weight bytes for the same
// fetch schedule.
double weight_traffic_ratio(const TrafficStats& stats,
                            double dense_weight_bytes);

// Dry run: the traffic and flop counters execute() would produce for this
// shape, without touching any data.
struct ProblemShape {
  int m = 1;
  int k = 0;
  int n = 0;
  QuantConfig cfg;
  LayoutDescriptor layout;
  int workers = 1;
  int stages = 2;
  int dup = 1;
  int tile_m = 0;
};
TrafficStats plan_traffic(const ProblemShape& shape);

}  // namespace flutesim
