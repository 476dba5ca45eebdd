// SPDX-License-Identifier: Apache-2.0
#include "flutesim/vec_lut.hpp"

#include <string>

#include "flutesim/errors.hpp"

namespace flutesim {

VectorizedTable make_vectorized_lut(const LookupTable& table, int dup) {
  if (dup != 1 && dup != 2 && dup != 4 && dup != 8 && dup != 16) {
    throw ConfigError("table duplication factor must be in {1,2,4,8,16}, got " +
                      std::to_string(dup));
  }
  VectorizedTable vt;
  vt.bits = table.bits;
  vt.dup = dup;

  const int count = table.index_count();
  std::vector<Half> narrowed(count);
  for (int i = 0; i < count; ++i) narrowed[i] = f32_to_f16(table.values[i]);

  vt.entries.resize(static_cast<std::size_t>(count) * count);
  for (int i = 0; i < count; ++i) {
    for (int j = 0; j < count; ++j) {
      vt.entries[(static_cast<std::size_t>(i) << table.bits) | j] = {
          narrowed[i], narrowed[j]};
    }
  }
  return vt;
}

Half dequantize_scalar(std::uint8_t index, Half scale,
                       const LookupTable& table) {
  const Half v = f32_to_f16(table.values[index]);
  return f32_to_f16(f16_to_f32(scale) * f16_to_f32(v));
}

std::pair<Half, Half> vec_dequantize(std::uint32_t packed_pair, Half scale,
                                     const VectorizedTable& vt) {
  if (packed_pair >= vt.pair_count()) {
    throw InputError("vec_dequantize: pair index " +
                     std::to_string(packed_pair) + " out of range");
  }
  const auto& [first, second] = vt.entries[packed_pair];
  const float s = f16_to_f32(scale);
  return {f32_to_f16(s * f16_to_f32(first)), f32_to_f16(s * f16_to_f32(second))};
}

}  // namespace flutesim
