// SPDX-License-Identifier: Apache-2.0
//
// FLTE container: packed weights plus everything needed to run the engine.
// Little-endian layout, in order:
//   magic "FLTE" | version u8 (=1) | bits u8 | group u32 | k u32 | n u32
//   | slice_count u8 | table: 2^bits x u16 | scales: (k*n/group) x u16
//   | per slice: slice_bits u8, word_count u32, words u32[word_count]
//   | layout: tile_m, tile_n, tile_k, frag_m, frag_n, frag_k as u16
// Parse errors name the failing section and byte offset.
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "flutesim/half.hpp"
#include "flutesim/pack.hpp"
#include "flutesim/quantize.hpp"

namespace flutesim {

inline constexpr char kFlteMagic[4] = {'F', 'L', 'T', 'E'};
inline constexpr std::uint8_t kFlteVersion = 1;

struct FlteModel {
  QuantConfig cfg;
  int k = 0;
  int n = 0;
  std::vector<Half> table;   // 2^bits normalized values, binary16
  std::vector<Half> scales;  // (k*n)/group
  std::vector<BitSlice> slices;
  LayoutDescriptor layout;

  PackedWeights packed() const;
};

FlteModel make_flte_model(const QuantizedMatrix& q, const PackedWeights& pw);

void write_flte(std::ostream& out, const FlteModel& model);
void write_flte_file(const std::string& path, const FlteModel& model);

// Strict parse: validates magic, version, counts, slice widths, layout
// divisibility, and rejects trailing bytes.
FlteModel read_flte(std::istream& in);
FlteModel read_flte_file(const std::string& path);

}  // namespace flutesim
