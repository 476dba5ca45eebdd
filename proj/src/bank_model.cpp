// SPDX-License-Identifier: Apache-2.0
#include "flutesim/bank_model.hpp"

#include <algorithm>
#include <random>
#include <string>

#include "flutesim/errors.hpp"
#include "flutesim/nf_table.hpp"

namespace flutesim {

BankAccessReport conflict_degree(std::span<const std::uint32_t> lane_addresses) {
  if (lane_addresses.size() != kWarpSize) {
    throw InputError("conflict_degree: expected 32 lane addresses, got " +
                     std::to_string(lane_addresses.size()));
  }
  std::array<std::array<std::uint32_t, kWarpSize>, kNumBanks> per_bank{};
  std::array<int, kNumBanks> counts{};
  for (const std::uint32_t addr : lane_addresses) {
    per_bank[addr % kNumBanks][counts[addr % kNumBanks]++] = addr;
  }
  BankAccessReport report;
  for (int b = 0; b < kNumBanks; ++b) {
    auto begin = per_bank[b].begin();
    auto end = begin + counts[b];
    std::sort(begin, end);
    report.distinct_per_bank[b] =
        static_cast<int>(std::unique(begin, end) - begin);
    report.conflict_degree =
        std::max(report.conflict_degree, report.distinct_per_bank[b]);
  }
  return report;
}

BankAccessReport simulate_warp_lookup(std::span<const std::uint32_t> pair_indices,
                                      const VectorizedTable& vt) {
  if (pair_indices.size() != kWarpSize) {
    throw InputError("simulate_warp_lookup: expected 32 lane indices");
  }
  std::array<std::uint32_t, kWarpSize> addrs{};
  for (int l = 0; l < kWarpSize; ++l) {
    if (pair_indices[l] >= vt.pair_count()) {
      throw InputError("simulate_warp_lookup: pair index out of range");
    }
    addrs[l] = vt.address(pair_indices[l],
                          static_cast<std::uint32_t>(l % vt.dup));
  }
  return conflict_degree(addrs);
}

int analytic_worst_degree(int bits) {
  const int entries = 1 << (2 * bits);
  return std::min(kWarpSize, (entries + kNumBanks - 1) / kNumBanks);
}

std::vector<std::uint32_t> worst_case_warp(int bits, int bank) {
  const std::uint32_t entries = 1u << (2 * bits);
  const std::uint32_t column =
      std::max<std::uint32_t>(1, entries / kNumBanks);  // entries in one bank
  std::vector<std::uint32_t> warp(kWarpSize);
  for (int l = 0; l < kWarpSize; ++l) {
    warp[l] = (static_cast<std::uint32_t>(bank) +
               kNumBanks * (static_cast<std::uint32_t>(l) % column)) %
              entries;
  }
  return warp;
}

WarpStats monte_carlo_degree(int bits, int dup, int warps, std::uint64_t seed,
                             WarpPattern pattern) {
  if (warps <= 0) throw InputError("monte_carlo_degree: warps must be > 0");
  const VectorizedTable vt = make_vectorized_lut(build_nf_table(bits), dup);
  const std::uint32_t entries = vt.pair_count();
  const std::uint32_t column = std::max<std::uint32_t>(1, entries / kNumBanks);

  std::vector<int> degrees(warps);
#pragma omp parallel for schedule(static)
  for (int w = 0; w < warps; ++w) {
    // Independent per-warp stream keyed on (seed, warp) so results do not
    // depend on the thread count.
    std::mt19937_64 rng(seed + 0x9E3779B97F4A7C15ull * (w + 1));
    std::array<std::uint32_t, kWarpSize> idx{};
    if (pattern == WarpPattern::kUniform) {
      for (int l = 0; l < kWarpSize; ++l) {
        idx[l] = static_cast<std::uint32_t>(rng() % entries);
      }
    } else {
      const std::uint32_t bank =
          static_cast<std::uint32_t>(rng() % std::min<std::uint32_t>(entries, kNumBanks));
      for (int l = 0; l < kWarpSize; ++l) {
        idx[l] = (bank + kNumBanks * (rng() % column)) % entries;
      }
    }
    degrees[w] = simulate_warp_lookup(idx, vt).conflict_degree;
  }

  WarpStats stats;
  long sum = 0;
  for (const int d : degrees) {
    sum += d;
    stats.max_degree = std::max(stats.max_degree, d);
  }
  stats.mean_degree = static_cast<double>(sum) / warps;
  std::vector<int> sorted = degrees;
  std::sort(sorted.begin(), sorted.end());
  stats.p99_degree = sorted[static_cast<std::size_t>(warps - 1) * 99 / 100];
  return stats;
}

}  // namespace flutesim
