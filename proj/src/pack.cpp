// SPDX-License-Identifier: Apache-2.0
#include "flutesim/pack.hpp"

#include <string>

#include "flutesim/errors.hpp"

namespace flutesim {
namespace {

void check_divisible(int value, int divisor, const char* what) {
  if (divisor <= 0 || value % divisor != 0) {
    throw ConfigError(std::string(what) + ": " + std::to_string(value) +
                      " not divisible by " + std::to_string(divisor));
  }
}

std::uint32_t slice_extract(const BitSlice& slice, std::size_t pos) {
  const int w = slice.bits;
  const std::size_t bit = pos * static_cast<std::size_t>(w);
  return (slice.words[bit / 32] >> (bit % 32)) & ((1u << w) - 1u);
}

void slice_insert(BitSlice& slice, std::size_t pos, std::uint32_t value) {
  const int w = slice.bits;
  const std::size_t bit = pos * static_cast<std::size_t>(w);
  slice.words[bit / 32] |= value << (bit % 32);
}

}  // namespace

void LayoutDescriptor::validate() const {
  if (tile_m <= 0 || tile_n <= 0 || tile_k <= 0 || frag_m <= 0 || frag_n <= 0 ||
      frag_k <= 0) {
    throw ConfigError("layout: tile/fragment dims must be positive");
  }
  check_divisible(tile_m, frag_m, "layout: tile_m by frag_m");
  check_divisible(tile_n, frag_n, "layout: tile_n by frag_n");
  check_divisible(tile_k, frag_k, "layout: tile_k by frag_k");
  if (frag_k % 2 != 0) {
    throw ConfigError("layout: frag_k must be even for paired dequantization");
  }
  if (tile_elems() % 32 != 0) {
    throw ConfigError("layout: a weight tile must cover whole 32-bit words");
  }
}

std::size_t packed_pos(const LayoutDescriptor& layout, int k, int n, int i,
                       int j) {
  const long tiles_k = k / layout.tile_k;
  const long kt = i / layout.tile_k;
  const long nt = j / layout.tile_n;
  const int ki = i % layout.tile_k;
  const int nj = j % layout.tile_n;
  const long tile = nt * tiles_k + kt;
  const long frag = static_cast<long>(ki / layout.frag_k) *
                        layout.frags_per_tile_n() +
                    nj / layout.frag_n;
  const long within = static_cast<long>(ki % layout.frag_k) * layout.frag_n +
                      nj % layout.frag_n;
  return static_cast<std::size_t>(tile * layout.tile_elems() +
                                  frag * layout.frag_elems() + within);
}

void unpacked_coords(const LayoutDescriptor& layout, int k, int n,
                     std::size_t pos, int& i, int& j) {
  const long tiles_k = k / layout.tile_k;
  const long tile = static_cast<long>(pos) / layout.tile_elems();
  long rem = static_cast<long>(pos) % layout.tile_elems();
  const long frag = rem / layout.frag_elems();
  rem %= layout.frag_elems();

  const long nt = tile / tiles_k;
  const long kt = tile % tiles_k;
  const long kf = frag / layout.frags_per_tile_n();
  const long nf = frag % layout.frags_per_tile_n();
  i = static_cast<int>(kt * layout.tile_k + kf * layout.frag_k +
                       rem / layout.frag_n);
  j = static_cast<int>(nt * layout.tile_n + nf * layout.frag_n +
                       rem % layout.frag_n);
}

PackedWeights reorder_and_split(const QuantizedMatrix& q,
                                const LayoutDescriptor& layout) {
  layout.validate();
  check_divisible(q.k, layout.tile_k, "pack: k by tile_k");
  check_divisible(q.n, layout.tile_n, "pack: n by tile_n");

  PackedWeights pw;
  pw.layout = layout;
  pw.bits = q.cfg.bits;
  pw.k = q.k;
  pw.n = q.n;

  const std::size_t total = static_cast<std::size_t>(q.k) * q.n;
  if (pw.bits == 3) {
    pw.slices = {BitSlice{2, {}}, BitSlice{1, {}}};
  } else {
    pw.slices = {BitSlice{pw.bits, {}}};
  }
  for (BitSlice& s : pw.slices) {
    s.words.assign((total * s.bits + 31) / 32, 0u);
  }

  for (int i = 0; i < q.k; ++i) {
    for (int j = 0; j < q.n; ++j) {
      const std::uint32_t idx = q.indices[static_cast<std::size_t>(i) * q.n + j];
      const std::size_t pos = packed_pos(layout, q.k, q.n, i, j);
      if (pw.bits == 3) {
        slice_insert(pw.slices[0], pos, idx >> 1);
        slice_insert(pw.slices[1], pos, idx & 1u);
      } else {
        slice_insert(pw.slices[0], pos, idx);
      }
    }
  }
  return pw;
}

std::uint8_t combine_slices(std::uint8_t hi, std::uint8_t lo) {
  if (hi >= 4 || lo >= 2) {
    throw InternalError("combine_slices: slice value out of range");
  }
  return static_cast<std::uint8_t>((hi << 1) | lo);
}

std::vector<std::uint8_t> unpack_fragment(const PackedWeights& pw,
                                          long tile_idx, long frag_idx) {
  if (tile_idx < 0 || tile_idx >= pw.tile_count()) {
    throw InputError("unpack_fragment: tile index " + std::to_string(tile_idx) +
                     " out of range");
  }
  if (frag_idx < 0 || frag_idx >= pw.frags_per_tile()) {
    throw InputError("unpack_fragment: fragment index " +
                     std::to_string(frag_idx) + " out of range");
  }
  const long frag_elems = pw.layout.frag_elems();
  const std::size_t base = static_cast<std::size_t>(
      tile_idx * pw.layout.tile_elems() + frag_idx * frag_elems);

  std::vector<std::uint8_t> out(static_cast<std::size_t>(frag_elems));
  if (pw.bits == 3) {
    for (long t = 0; t < frag_elems; ++t) {
      out[t] = combine_slices(
          static_cast<std::uint8_t>(slice_extract(pw.slices[0], base + t)),
          static_cast<std::uint8_t>(slice_extract(pw.slices[1], base + t)));
    }
  } else {
    for (long t = 0; t < frag_elems; ++t) {
      out[t] = static_cast<std::uint8_t>(slice_extract(pw.slices[0], base + t));
    }
  }
  return out;
}

std::vector<std::uint8_t> unpack_matrix(const PackedWeights& pw) {
  std::vector<std::uint8_t> out(static_cast<std::size_t>(pw.k) * pw.n);
  const long frags = pw.frags_per_tile();
  for (long tile = 0; tile < pw.tile_count(); ++tile) {
    for (long frag = 0; frag < frags; ++frag) {
      const std::vector<std::uint8_t> f = unpack_fragment(pw, tile, frag);
      const std::size_t base = static_cast<std::size_t>(
          tile * pw.layout.tile_elems() + frag * pw.layout.frag_elems());
      for (std::size_t t = 0; t < f.size(); ++t) {
        int i = 0;
        int j = 0;
        unpacked_coords(pw.layout, pw.k, pw.n, base + t, i, j);
        out[static_cast<std::size_t>(i) * pw.n + j] = f[t];
      }
    }
  }
  return out;
}

}  // namespace flutesim
