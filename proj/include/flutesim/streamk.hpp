// SPDX-License-Identifier: Apache-2.0
//
// Stream-K work decomposition over the flattened tile-iteration space.
// Units flatten output-tile-major with K innermost: unit u covers output
// tile u / tiles_k and k-slice u % tiles_k, where output tile
// ot = m_tile * tiles_n + n_tile. Worker w owns the contiguous range
// [floor(w*U/P), floor((w+1)*U/P)), so range lengths differ by at most one.
// An output tile split across workers is reconciled through per-contributor
// partial slots; the finisher is the worker owning the tile's last k-slice.
#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace flutesim {

struct TileGrid {
  int tiles_m = 1;
  int tiles_n = 1;
  int tiles_k = 1;

  long total_units() const {
    return static_cast<long>(tiles_m) * tiles_n * tiles_k;
  }
  long output_tiles() const { return static_cast<long>(tiles_m) * tiles_n; }
  void validate() const;
};

struct WorkerRange {
  long begin = 0;
  long end = 0;
  long size() const { return end - begin; }
};

// Fixup bookkeeping for one output tile split across workers.
struct TileFixup {
  long tile = 0;
  std::vector<int> contributors;  // ascending k-range order; excludes finisher
  int finisher = 0;
  long slot_base = 0;  // contributors.size() consecutive partial slots
};

struct StreamKPlan {
  TileGrid grid;
  int workers = 1;
  std::vector<WorkerRange> ranges;       // one per worker
  std::vector<TileFixup> fixups;         // split tiles only
  std::vector<long> fixup_of_tile;       // output tile -> fixups index or -1
  long total_slots = 0;

  const TileFixup* fixup_for(long tile) const {
    const long f = fixup_of_tile[tile];
    return f < 0 ? nullptr : &fixups[f];
  }
};

StreamKPlan plan_stream_k(const TileGrid& grid, int workers);

// Classic data-parallel baseline: output tiles dealt round-robin, each worker
// sweeps the whole K extent of its tiles, no fixup.
struct SliceKPlan {
  TileGrid grid;
  int workers = 1;
  std::vector<std::vector<long>> tiles_per_worker;
};

SliceKPlan plan_slice_k(const TileGrid& grid, int workers);

struct BalanceMetrics {
  long max_units = 0;
  long min_units = 0;
  long imbalance = 0;  // max - min, in k-units
  long waves = 0;      // ceil(output tiles / workers) for Slice-K, 1 otherwise
};

BalanceMetrics balance_metrics(const StreamKPlan& plan);
BalanceMetrics balance_metrics(const SliceKPlan& plan);

// Per-worker walk over a Stream-K range in ascending unit order. Mirrors the
// device-side tile scheduler interface: construction is `initialize(w)`.
class SchedulerCursor {
 public:
  SchedulerCursor(const StreamKPlan& plan, int worker);

  bool done() const { return unit_ >= range_.end; }
  long unit() const { return unit_; }

  // (m_tile, n_tile, k_slice) of the current unit.
  std::array<long, 3> tile_index() const;
  long output_tile_index() const;
  long k_slice() const;

  // True when the next unit belongs to a different output tile or the range
  // ends here.
  bool end_of_output_tile() const;
  // This worker owns the tile's first / last k-slice.
  bool started_output_tile() const;
  bool finished_output_tile() const;
  // True on the first unit this worker runs for the current output tile.
  bool at_output_tile_start() const;

  // Contributor: its own partial slot. Finisher: the tile's slot_base (it
  // reads all contributor slots in ascending k order). Unsplit tile: -1.
  long fixup_index() const;

  // Throws InternalError when stepping past done().
  void step();

 private:
  void require_active(const char* what) const;

  const StreamKPlan* plan_;
  int worker_;
  WorkerRange range_;
  long unit_ = 0;
};

}  // namespace flutesim
