// SPDX-License-Identifier: Apache-2.0
#include "flutesim/streamk.hpp"

#include <algorithm>
#include <string>

#include "flutesim/errors.hpp"

namespace flutesim {

void TileGrid::validate() const {
  if (tiles_m < 1 || tiles_n < 1 || tiles_k < 1) {
    throw ConfigError("tile grid counts must be >= 1");
  }
}

StreamKPlan plan_stream_k(const TileGrid& grid, int workers) {
  grid.validate();
  if (workers < 1) throw ConfigError("workers must be >= 1");

  StreamKPlan plan;
  plan.grid = grid;
  plan.workers = workers;

  const long units = grid.total_units();
  plan.ranges.resize(workers);
  for (int w = 0; w < workers; ++w) {
    plan.ranges[w] = {units * w / workers, units * (w + 1) / workers};
  }

  plan.fixup_of_tile.assign(grid.output_tiles(), -1);
  const long tiles_k = grid.tiles_k;
  for (long tile = 0; tile < grid.output_tiles(); ++tile) {
    const long first_unit = tile * tiles_k;
    const long last_unit = first_unit + tiles_k - 1;

    // Ranges ascend with worker id, so the workers touching this tile are a
    // contiguous id interval and their k sub-ranges ascend with id.
    std::vector<int> touching;
    for (int w = 0; w < workers; ++w) {
      const WorkerRange& r = plan.ranges[w];
      if (r.begin <= last_unit && r.end > first_unit && r.size() > 0) {
        touching.push_back(w);
      }
    }
    if (touching.size() <= 1) continue;

    TileFixup fixup;
    fixup.tile = tile;
    fixup.finisher = touching.back();
    fixup.contributors.assign(touching.begin(), touching.end() - 1);
    fixup.slot_base = plan.total_slots;
    plan.total_slots += static_cast<long>(fixup.contributors.size());
    plan.fixup_of_tile[tile] = static_cast<long>(plan.fixups.size());
    plan.fixups.push_back(std::move(fixup));
  }
  return plan;
}

SliceKPlan plan_slice_k(const TileGrid& grid, int workers) {
  grid.validate();
  if (workers < 1) throw ConfigError("workers must be >= 1");
  SliceKPlan plan;
  plan.grid = grid;
  plan.workers = workers;
  plan.tiles_per_worker.resize(workers);
  for (long tile = 0; tile < grid.output_tiles(); ++tile) {
    plan.tiles_per_worker[tile % workers].push_back(tile);
  }
  return plan;
}

BalanceMetrics balance_metrics(const StreamKPlan& plan) {
  BalanceMetrics m;
  m.min_units = plan.ranges.empty() ? 0 : plan.ranges[0].size();
  for (const WorkerRange& r : plan.ranges) {
    m.max_units = std::max(m.max_units, r.size());
    m.min_units = std::min(m.min_units, r.size());
  }
  m.imbalance = m.max_units - m.min_units;
  m.waves = 1;
  return m;
}

BalanceMetrics balance_metrics(const SliceKPlan& plan) {
  BalanceMetrics m;
  m.min_units = plan.tiles_per_worker.empty()
                    ? 0
                    : static_cast<long>(plan.tiles_per_worker[0].size()) *
                          plan.grid.tiles_k;
  for (const auto& tiles : plan.tiles_per_worker) {
    const long units = static_cast<long>(tiles.size()) * plan.grid.tiles_k;
    m.max_units = std::max(m.max_units, units);
    m.min_units = std::min(m.min_units, units);
  }
  m.imbalance = m.max_units - m.min_units;
  m.waves = (plan.grid.output_tiles() + plan.workers - 1) / plan.workers;
  return m;
}

SchedulerCursor::SchedulerCursor(const StreamKPlan& plan, int worker)
    : plan_(&plan), worker_(worker) {
  if (worker < 0 || worker >= plan.workers) {
    throw InputError("cursor: worker " + std::to_string(worker) +
                     " out of range");
  }
  range_ = plan.ranges[worker];
  unit_ = range_.begin;
}

void SchedulerCursor::require_active(const char* what) const {
  if (done()) {
    throw InternalError(std::string("cursor: ") + what +
                        " called on a finished cursor");
  }
}

std::array<long, 3> SchedulerCursor::tile_index() const {
  require_active("tile_index");
  const long tile = unit_ / plan_->grid.tiles_k;
  return {tile / plan_->grid.tiles_n, tile % plan_->grid.tiles_n,
          unit_ % plan_->grid.tiles_k};
}

long SchedulerCursor::output_tile_index() const {
  require_active("output_tile_index");
  return unit_ / plan_->grid.tiles_k;
}

long SchedulerCursor::k_slice() const {
  require_active("k_slice");
  return unit_ % plan_->grid.tiles_k;
}

bool SchedulerCursor::end_of_output_tile() const {
  require_active("end_of_output_tile");
  if (unit_ + 1 >= range_.end) return true;
  return (unit_ + 1) / plan_->grid.tiles_k != unit_ / plan_->grid.tiles_k;
}

bool SchedulerCursor::started_output_tile() const {
  require_active("started_output_tile");
  const long first_unit = output_tile_index() * plan_->grid.tiles_k;
  return range_.begin <= first_unit;
}

bool SchedulerCursor::finished_output_tile() const {
  require_active("finished_output_tile");
  const long last_unit =
      output_tile_index() * plan_->grid.tiles_k + plan_->grid.tiles_k - 1;
  return range_.end > last_unit;
}

bool SchedulerCursor::at_output_tile_start() const {
  require_active("at_output_tile_start");
  if (unit_ == range_.begin) return true;
  return (unit_ - 1) / plan_->grid.tiles_k != unit_ / plan_->grid.tiles_k;
}

long SchedulerCursor::fixup_index() const {
  require_active("fixup_index");
  const TileFixup* fixup = plan_->fixup_for(output_tile_index());
  if (fixup == nullptr) return -1;
  if (worker_ == fixup->finisher) return fixup->slot_base;
  const auto it = std::find(fixup->contributors.begin(),
                            fixup->contributors.end(), worker_);
  if (it == fixup->contributors.end()) {
    throw InternalError("cursor: worker touches a split tile but is neither "
                        "contributor nor finisher");
  }
  return fixup->slot_base + (it - fixup->contributors.begin());
}

void SchedulerCursor::step() {
  require_active("step");
  ++unit_;
}

}  // namespace flutesim
