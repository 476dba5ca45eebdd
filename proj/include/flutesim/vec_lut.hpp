// SPDX-License-Identifier: Apache-2.0
//
// Paired lookup table: entry (i << b) | j holds the binary16 pair
// (T[i], T[j]) in one 32-bit word, so one lookup dequantizes two elements.
// The table may be duplicated d times, interleaved with stride d (entry e,
// copy c lives at word address e*d + c) so copies land in different banks.
#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "flutesim/half.hpp"
#include "flutesim/nf_table.hpp"

namespace flutesim {

struct VectorizedTable {
  int bits = 0;
  int dup = 1;
  std::vector<std::pair<Half, Half>> entries;  // 2^(2*bits)

  std::uint32_t pair_count() const { return 1u << (2 * bits); }
  std::size_t word_count() const { return entries.size() * dup; }
  std::size_t byte_count() const { return word_count() * 4; }
  // Word address of one copy of an entry.
  std::uint32_t address(std::uint32_t entry, std::uint32_t copy) const {
    return entry * static_cast<std::uint32_t>(dup) + copy;
  }
};

// dup must be in {1, 2, 4, 8, 16}. Table values are rounded to binary16, as
// the kernel stores them on chip.
VectorizedTable make_vectorized_lut(const LookupTable& table, int dup);

// Scalar engine-path dequantization of one element: the table value is read
// as binary16, the product runs in binary32, the result rounds back.
Half dequantize_scalar(std::uint8_t index, Half scale, const LookupTable& table);

// Dequantize a packed pair (first << b) | second with one shared scale.
// Bitwise equal to two dequantize_scalar calls.
std::pair<Half, Half> vec_dequantize(std::uint32_t packed_pair, Half scale,
                                     const VectorizedTable& vt);

}  // namespace flutesim
