// SPDX-License-Identifier: Apache-2.0
//
// Offline restructuring of the index matrix: a fragment-major permutation
// (tile, then fragment, then row-major within the fragment) followed by
// bit-slice packing into 32-bit words. Unpacking a fragment lands directly in
// the layout the simulated MMA expects, with no runtime reordering.
//
// 3-bit indices split into a 2-bit slice (index >> 1) and a 1-bit slice
// (index & 1); power-of-two widths stay in a single slice. Words pack
// little-endian with element 0 in the least-significant bits.
#pragma once

#include <cstdint>
#include <vector>

#include "flutesim/quantize.hpp"

namespace flutesim {

struct LayoutDescriptor {
  int tile_m = 16;
  int tile_n = 64;
  int tile_k = 64;
  int frag_m = 16;
  int frag_n = 8;
  int frag_k = 16;

  // Tile dims must divide by fragment dims, frag_k must be even (pairwise
  // dequantization along K), and a weight tile must fill whole 32-bit words
  // in every slice width.
  void validate() const;

  int frags_per_tile_k() const { return tile_k / frag_k; }
  int frags_per_tile_n() const { return tile_n / frag_n; }
  long tile_elems() const { return static_cast<long>(tile_k) * tile_n; }
  long frag_elems() const { return static_cast<long>(frag_k) * frag_n; }
};

// Packed position of element (i, j) of a k x n index matrix: weight tiles in
// column-of-tiles-major order (n-tile outer, k-tile inner), fragments within
// a tile row-major over (k-frag, n-frag), elements within a fragment
// row-major over (k, n). Bijective over [0, k*n).
std::size_t packed_pos(const LayoutDescriptor& layout, int k, int n, int i,
                       int j);
// Inverse of packed_pos.
void unpacked_coords(const LayoutDescriptor& layout, int k, int n,
                     std::size_t pos, int& i, int& j);

struct BitSlice {
  int bits = 0;                     // power of two: 1, 2, or 4
  std::vector<std::uint32_t> words;  // ceil(k*n*bits/32), zero-padded tail
};

struct PackedWeights {
  std::vector<BitSlice> slices;  // high-to-low; widths sum to bits
  LayoutDescriptor layout;
  int bits = 0;
  int k = 0;
  int n = 0;

  long tiles_k() const { return k / layout.tile_k; }
  long tiles_n() const { return n / layout.tile_n; }
  long tile_count() const { return tiles_k() * tiles_n(); }
  long frags_per_tile() const {
    return static_cast<long>(layout.frags_per_tile_k()) *
           layout.frags_per_tile_n();
  }
};

// Permute to fragment-major order and pack bit slices. Dims must divide the
// tile dims (padding is the engine's job).
PackedWeights reorder_and_split(const QuantizedMatrix& q,
                                const LayoutDescriptor& layout);

// (hi << 1) | lo for the 3-bit two-slice case. Throws InternalError if a
// slice value is out of range.
std::uint8_t combine_slices(std::uint8_t hi, std::uint8_t lo);

// Indices of one fragment in fragment-internal row-major order
// (frag_k x frag_n). Throws InputError on an out-of-range tile or fragment.
std::vector<std::uint8_t> unpack_fragment(const PackedWeights& pw,
                                          long tile_idx, long frag_idx);

// Full k x n index matrix, the inverse of reorder_and_split's permutation.
std::vector<std::uint8_t> unpack_matrix(const PackedWeights& pw);

}  // namespace flutesim
