// SPDX-License-Identifier: Apache-2.0
//
// Shared-memory bank conflict model: 32 banks, addresses in 32-bit-word
// units, bank = addr mod 32. Lanes hitting the same bank at distinct
// addresses serialize; identical addresses broadcast and count once.
#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "flutesim/vec_lut.hpp"

namespace flutesim {

inline constexpr int kNumBanks = 32;
inline constexpr int kWarpSize = 32;

struct BankAccessReport {
  std::array<int, kNumBanks> distinct_per_bank{};
  int conflict_degree = 0;  // max over banks, in [1, 32]
};

// Exactly one word address per lane.
BankAccessReport conflict_degree(std::span<const std::uint32_t> lane_addresses);

// Lane l reads copy (l mod dup) of its entry; address = entry*dup + l mod dup.
BankAccessReport simulate_warp_lookup(std::span<const std::uint32_t> pair_indices,
                                      const VectorizedTable& vt);

// Worst possible conflict degree for a d=1 vectorized table of the given
// width: ceil(2^(2b) / 32) capped at 32.
int analytic_worst_degree(int bits);

// A warp that attains analytic_worst_degree at dup = 1: lanes read distinct
// entries of one bank column, cycling when the column is shorter than the
// warp.
std::vector<std::uint32_t> worst_case_warp(int bits, int bank = 0);

enum class WarpPattern {
  kUniform,         // every lane draws a uniform pair index
  kSameBankColumn,  // all lanes draw entries from one d=1 bank column
};

struct WarpStats {
  double mean_degree = 0.0;
  int p99_degree = 0;
  int max_degree = 0;
};

// Seeded Monte-Carlo over `warps` random warps through simulate_warp_lookup.
WarpStats monte_carlo_degree(int bits, int dup, int warps, std::uint64_t seed,
                             WarpPattern pattern = WarpPattern::kUniform);

}  // namespace flutesim
