// SPDX-License-Identifier: Apache-2.0
#include "flutesim/engine.hpp"

#include <algorithm>
#include <atomic>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "flutesim/errors.hpp"
#include "flutesim/mma.hpp"

namespace flutesim {

TrafficStats& TrafficStats::operator+=(const TrafficStats& o) {
  bytes_weights += o.bytes_weights;
  bytes_scales += o.bytes_scales;
  bytes_table += o.bytes_table;
  bytes_activations += o.bytes_activations;
  bytes_partials_rw += o.bytes_partials_rw;
  bytes_output += o.bytes_output;
  flops += o.flops;
  return *this;
}

namespace {

struct EngineShape {
  int m = 0, k = 0, n = 0;
  int tile_m = 0;
  LayoutDescriptor layout;
  QuantConfig cfg;
  int stages = 2;
  std::size_t table_bytes = 0;
  TileGrid grid;

  int real_rows(long m_tile) const {
    return static_cast<int>(
        std::min<long>(tile_m, static_cast<long>(m) - m_tile * tile_m));
  }
  // Distinct scale groups intersecting one weight tile's K range.
  long groups_per_weight_tile(long k_tile) const {
    const long k0 = k_tile * layout.tile_k;
    const long k1 = k0 + layout.tile_k - 1;
    return (k1 / cfg.group_size - k0 / cfg.group_size + 1) * layout.tile_n;
  }
  std::size_t weight_tile_bytes() const {
    // Whole words per slice per tile (tile_elems is a multiple of 32), so the
    // slice widths just sum to cfg.bits.
    return static_cast<std::size_t>(layout.tile_elems()) * cfg.bits / 8;
  }
  std::size_t out_tile_elems() const {
    return static_cast<std::size_t>(tile_m) * layout.tile_n;
  }
};

EngineShape make_shape(int m, int k, int n, const LayoutDescriptor& layout,
                       const QuantConfig& cfg, int tile_m_override, int stages,
                       int workers, std::size_t table_bytes) {
  layout.validate();
  cfg.validate(k);
  EngineShape s;
  s.m = m;
  s.k = k;
  s.n = n;
  s.layout = layout;
  s.cfg = cfg;
  s.stages = stages;
  s.table_bytes = table_bytes;
  s.tile_m = tile_m_override > 0 ? tile_m_override : layout.tile_m;
  if (m < 1) throw ConfigError("matmul: m must be >= 1");
  if (workers < 1) throw ConfigError("matmul: workers must be >= 1");
  if (stages < 1) throw ConfigError("matmul: pipeline stages must be >= 1");
  if (s.tile_m % layout.frag_m != 0) {
    throw ConfigError("matmul: tile_m must divide by frag_m");
  }
  if (k % layout.tile_k != 0 || n % layout.tile_n != 0) {
    throw ConfigError("matmul: dims must divide by tile dims");
  }
  s.grid = TileGrid{static_cast<int>((m + s.tile_m - 1) / s.tile_m),
                    n / layout.tile_n, k / layout.tile_k};
  return s;
}

void count_unit_fetch(const EngineShape& s, long unit, TrafficStats& t) {
  const long tile = unit / s.grid.tiles_k;
  const long mt = tile / s.grid.tiles_n;
  const long kt = unit % s.grid.tiles_k;
  t.bytes_activations +=
      static_cast<std::uint64_t>(s.real_rows(mt)) * s.layout.tile_k * 2;
  t.bytes_weights += s.weight_tile_bytes();
  t.bytes_scales += static_cast<std::uint64_t>(s.groups_per_weight_tile(kt)) * 2;
}

std::uint64_t unit_flops(const EngineShape& s) {
  const long mmas = static_cast<long>(s.tile_m / s.layout.frag_m) *
                    s.layout.frags_per_tile_n() * s.layout.frags_per_tile_k();
  return static_cast<std::uint64_t>(mmas) * 2 * s.layout.frag_m *
         s.layout.frag_n * s.layout.frag_k;
}

// Walks one worker's range, counting prefetch-issued traffic; `compute` and
// `epilogue` run per unit / per finished output tile.
template <class ComputeFn, class EpilogueFn>
void walk_worker(const EngineShape& s, const StreamKPlan& plan, int worker,
                 TrafficStats& local, ComputeFn&& compute,
                 EpilogueFn&& epilogue) {
  SchedulerCursor cur(plan, worker);
  if (cur.done()) return;
  local.bytes_table += s.table_bytes;

  const WorkerRange range = plan.ranges[worker];
  long fetch_ptr = range.begin;
  const auto prefetch_to = [&](long target) {
    target = std::min(target, range.end);
    for (; fetch_ptr < target; ++fetch_ptr) count_unit_fetch(s, fetch_ptr, local);
  };

  // Fill the pipeline, then keep at most `stages` tiles in flight.
  prefetch_to(range.begin + s.stages);
  while (!cur.done()) {
    prefetch_to(cur.unit() + s.stages);
    local.flops += unit_flops(s);
    compute(cur);
    if (cur.end_of_output_tile()) epilogue(cur);
    cur.step();
  }
}

struct Scratch {
  std::vector<std::vector<Half>> slots;              // per (tile, contributor)
  std::unique_ptr<std::atomic<int>[]> semaphores;    // per split tile
};

class Executor {
 public:
  Executor(const MatmulProblem& p, EngineShape shape, StreamKPlan plan)
      : p_(p),
        s_(std::move(shape)),
        plan_(std::move(plan)),
        y_(s_.m, s_.n),
        worker_stats_(p.workers) {
    scratch_.slots.assign(static_cast<std::size_t>(plan_.total_slots),
                          std::vector<Half>());
    scratch_.semaphores =
        std::make_unique<std::atomic<int>[]>(plan_.fixups.size());
    for (std::size_t f = 0; f < plan_.fixups.size(); ++f) {
      scratch_.semaphores[f].store(0, std::memory_order_relaxed);
    }
  }

  MatmulResult run() {
    if (p_.mode == ExecMode::kSerial) {
      for (int w = 0; w < p_.workers; ++w) run_worker(w);
    } else {
      run_parallel();
    }
    MatmulResult result;
    result.y = std::move(y_);
    for (const TrafficStats& t : worker_stats_) result.stats += t;
    return result;
  }

 private:
  void run_parallel() {
    std::atomic<bool> failed{false};
    std::mutex error_mutex;
    std::string error;

    // schedule(static) assigns each thread a contiguous ascending block of
    // workers, and a finisher only ever waits on lower worker ids, so the
    // spin below cannot deadlock at any thread count.
#pragma omp parallel for schedule(static)
    for (int w = 0; w < p_.workers; ++w) {
      try {
        run_worker(w);
      } catch (const std::exception& e) {
        const std::lock_guard<std::mutex> lock(error_mutex);
        if (!failed.exchange(true)) {
          error = "worker " + std::to_string(w) + ": " + e.what();
        }
      }
    }
    if (failed.load()) throw InternalError("execution failed: " + error);
  }

  void run_worker(int w) {
    const LayoutDescriptor& L = s_.layout;
    const int frag_elems = L.frag_k * L.frag_n;
    std::vector<float> acc(s_.out_tile_elems());
    std::vector<Half> w_frag(frag_elems);
    std::vector<Half> x_frag(static_cast<std::size_t>(L.frag_m) * L.frag_k);
    std::vector<float> c_frag(static_cast<std::size_t>(L.frag_m) * L.frag_n);
    std::vector<Half> y16(s_.out_tile_elems());

    walk_worker(
        s_, plan_, w, worker_stats_[w],
        [&](const SchedulerCursor& cur) {
          if (cur.at_output_tile_start()) {
            std::fill(acc.begin(), acc.end(), 0.0f);
          }
          compute_unit(cur, acc, w_frag, x_frag, c_frag);
        },
        [&](const SchedulerCursor& cur) {
          for (std::size_t t = 0; t < acc.size(); ++t) {
            y16[t] = f32_to_f16(acc[t]);
          }
          epilogue(cur, w, y16);
        });
  }

  void compute_unit(const SchedulerCursor& cur, std::vector<float>& acc,
                    std::vector<Half>& w_frag, std::vector<Half>& x_frag,
                    std::vector<float>& c_frag) {
    const LayoutDescriptor& L = s_.layout;
    const auto [mt, nt, kt] = cur.tile_index();
    const long w_tile = nt * s_.grid.tiles_k + kt;
    const int gpc = s_.k / s_.cfg.group_size;
    const FragDims dims{L.frag_m, L.frag_n, L.frag_k};
    const MatH& x = *p_.x;

    for (int kf = 0; kf < L.frags_per_tile_k(); ++kf) {
      for (int nf = 0; nf < L.frags_per_tile_n(); ++nf) {
        const long frag_idx =
            static_cast<long>(kf) * L.frags_per_tile_n() + nf;
        const std::vector<std::uint8_t> idx =
            unpack_fragment(*p_.weights, w_tile, frag_idx);

        // Pairs run down K (two consecutive rows of one column), which by
        // group alignment always share a scale.
        for (int fk = 0; fk < L.frag_k; fk += 2) {
          const long i0 = kt * L.tile_k + static_cast<long>(kf) * L.frag_k + fk;
          for (int fn = 0; fn < L.frag_n; ++fn) {
            const long j = nt * L.tile_n + static_cast<long>(nf) * L.frag_n + fn;
            const std::uint32_t pair =
                (static_cast<std::uint32_t>(idx[fk * L.frag_n + fn])
                 << s_.cfg.bits) |
                idx[(fk + 1) * L.frag_n + fn];
            const Half scale =
                (*p_.scales)[j * gpc + i0 / s_.cfg.group_size];
            const auto [w0, w1] = vec_dequantize(pair, scale, *p_.lut);
            w_frag[fk * L.frag_n + fn] = w0;
            w_frag[(fk + 1) * L.frag_n + fn] = w1;
          }
        }

        for (int mf = 0; mf < s_.tile_m / L.frag_m; ++mf) {
          // Gather the activation fragment, zero-padding rows beyond m.
          for (int r = 0; r < L.frag_m; ++r) {
            const long mi = mt * s_.tile_m + static_cast<long>(mf) * L.frag_m + r;
            for (int c = 0; c < L.frag_k; ++c) {
              const long ki = kt * L.tile_k + static_cast<long>(kf) * L.frag_k + c;
              x_frag[r * L.frag_k + c] =
                  mi < s_.m ? x(static_cast<int>(mi), static_cast<int>(ki))
                            : Half{};
            }
          }
          for (int r = 0; r < L.frag_m; ++r) {
            for (int c = 0; c < L.frag_n; ++c) {
              c_frag[r * L.frag_n + c] =
                  acc[(static_cast<std::size_t>(mf) * L.frag_m + r) * L.tile_n +
                      nf * L.frag_n + c];
            }
          }
          mma_fragment(x_frag, w_frag, c_frag, dims);
          for (int r = 0; r < L.frag_m; ++r) {
            for (int c = 0; c < L.frag_n; ++c) {
              acc[(static_cast<std::size_t>(mf) * L.frag_m + r) * L.tile_n +
                  nf * L.frag_n + c] = c_frag[r * L.frag_n + c];
            }
          }
        }
      }
    }
  }

  void epilogue(const SchedulerCursor& cur, int w, std::vector<Half>& y16) {
    TrafficStats& local = worker_stats_[w];
    const std::uint64_t tile_bytes = s_.out_tile_elems() * 2;
    const long tile = cur.output_tile_index();

    if (!cur.finished_output_tile()) {
      // Contributor: park the binary16 partial and signal.
      scratch_.slots[cur.fixup_index()] = y16;
      local.bytes_partials_rw += tile_bytes;
      scratch_.semaphores[plan_.fixup_of_tile[tile]].fetch_add(
          1, std::memory_order_release);
      return;
    }

    if (!cur.started_output_tile()) {
      const TileFixup& fixup = *plan_.fixup_for(tile);
      const auto expected = static_cast<int>(fixup.contributors.size());
      std::atomic<int>& sem = scratch_.semaphores[plan_.fixup_of_tile[tile]];
      if (p_.mode == ExecMode::kSerial) {
        if (sem.load(std::memory_order_acquire) != expected) {
          throw InternalError("serial fixup: contributor partials missing");
        }
      } else {
        while (sem.load(std::memory_order_acquire) < expected) {
          std::this_thread::yield();
        }
      }
      // Reduce in binary16, ascending k order: contributors first (slots are
      // laid out in ascending k order), the finisher's own tile last.
      std::vector<Half> sum = scratch_.slots[fixup.slot_base];
      for (int c = 1; c < expected; ++c) {
        const std::vector<Half>& part = scratch_.slots[fixup.slot_base + c];
        for (std::size_t t = 0; t < sum.size(); ++t) {
          sum[t] = f16_add(sum[t], part[t]);
        }
      }
      for (std::size_t t = 0; t < sum.size(); ++t) {
        y16[t] = f16_add(sum[t], y16[t]);
      }
      local.bytes_partials_rw += tile_bytes * expected;
    }

    const long mt = tile / s_.grid.tiles_n;
    const long nt = tile % s_.grid.tiles_n;
    const int rows = s_.real_rows(mt);
    for (int r = 0; r < rows; ++r) {
      const long mi = mt * s_.tile_m + r;
      for (int c = 0; c < s_.layout.tile_n; ++c) {
        y_(static_cast<int>(mi), static_cast<int>(nt * s_.layout.tile_n + c)) =
            y16[static_cast<std::size_t>(r) * s_.layout.tile_n + c];
      }
    }
    local.bytes_output +=
        static_cast<std::uint64_t>(rows) * s_.layout.tile_n * 2;
  }

  const MatmulProblem& p_;
  EngineShape s_;
  StreamKPlan plan_;
  MatH y_;
  Scratch scratch_;
  std::vector<TrafficStats> worker_stats_;
};

}  // namespace

MatmulResult execute(const MatmulProblem& problem) {
  if (problem.x == nullptr || problem.weights == nullptr ||
      problem.scales == nullptr || problem.lut == nullptr) {
    throw InputError("matmul: problem is missing inputs");
  }
  const PackedWeights& pw = *problem.weights;
  if (problem.x->cols != pw.k) {
    throw ConfigError("matmul: activation K (" + std::to_string(problem.x->cols) +
                      ") does not match weight K (" + std::to_string(pw.k) + ")");
  }
  if (problem.cfg.bits != pw.bits || problem.lut->bits != pw.bits) {
    throw ConfigError("matmul: bit width mismatch between config, weights, "
                      "and table");
  }
  const long expected_scales = static_cast<long>(pw.k) * pw.n /
                               problem.cfg.group_size;
  if (static_cast<long>(problem.scales->size()) != expected_scales) {
    throw InputError("matmul: expected " + std::to_string(expected_scales) +
                     " scales, got " + std::to_string(problem.scales->size()));
  }

  EngineShape shape =
      make_shape(problem.x->rows, pw.k, pw.n, pw.layout, problem.cfg,
                 problem.tile_m, problem.stages, problem.workers,
                 problem.lut->entries.size() * 4);
  StreamKPlan plan = plan_stream_k(shape.grid, problem.workers);
  Executor executor(problem, std::move(shape), std::move(plan));
  return executor.run();
}

double bits_per_param(const QuantConfig& cfg) {
  cfg.validate();
  return cfg.bits + 16.0 / cfg.group_size;
}

double weight_traffic_ratio(const TrafficStats& stats,
                            double dense_weight_bytes) {
  if (dense_weight_bytes <= 0.0) {
    throw InputError("weight_traffic_ratio: dense byte count must be positive");
  }
  return static_cast<double>(stats.bytes_weights + stats.bytes_scales) /
         dense_weight_bytes;
}

TrafficStats plan_traffic(const ProblemShape& shape) {
  EngineShape s = make_shape(shape.m, shape.k, shape.n, shape.layout, shape.cfg,
                             shape.tile_m, shape.stages, shape.workers,
                             (static_cast<std::size_t>(1) << (2 * shape.cfg.bits)) * 4);
  const StreamKPlan plan = plan_stream_k(s.grid, shape.workers);
  const std::uint64_t tile_bytes = s.out_tile_elems() * 2;

  TrafficStats total;
  for (int w = 0; w < shape.workers; ++w) {
    TrafficStats local;
    walk_worker(
        s, plan, w, local, [](const SchedulerCursor&) {},
        [&](const SchedulerCursor& cur) {
          if (!cur.finished_output_tile()) {
            local.bytes_partials_rw += tile_bytes;
            return;
          }
          if (!cur.started_output_tile()) {
            const TileFixup& fixup = *plan.fixup_for(cur.output_tile_index());
            local.bytes_partials_rw +=
                tile_bytes * fixup.contributors.size();
          }
          const long mt = cur.output_tile_index() / s.grid.tiles_n;
          local.bytes_output +=
              static_cast<std::uint64_t>(s.real_rows(mt)) * s.layout.tile_n * 2;
        });
    total += local;
  }
  return total;
}

}  // namespace flutesim
