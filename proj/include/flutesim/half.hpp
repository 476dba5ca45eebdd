// SPDX-License-Identifier: Apache-2.0
//
// IEEE 754 binary16 emulated on top of binary32. The type stores the raw
// 16-bit pattern; every pattern (including NaN/Inf) is valid. Widening to
// binary32 is exact; narrowing rounds to nearest-even, overflows to signed
// infinity, and produces subnormals exactly.
#pragma once

#include <bit>
#include <cstdint>

namespace flutesim {

struct Half {
  std::uint16_t bits = 0;

  static constexpr Half from_bits(std::uint16_t b) { return Half{b}; }
  constexpr std::uint16_t to_bits() const { return bits; }

  friend constexpr bool operator==(Half a, Half b) { return a.bits == b.bits; }
  friend constexpr bool operator!=(Half a, Half b) { return a.bits != b.bits; }
};

constexpr std::uint16_t f32_bits_to_f16_bits(std::uint32_t x) {
  const std::uint32_t sign = (x >> 16) & 0x8000u;
  const std::uint32_t abs32 = x & 0x7FFFFFFFu;

  if (abs32 >= 0x7F800000u) {
    if (abs32 == 0x7F800000u) return static_cast<std::uint16_t>(sign | 0x7C00u);
    // NaN: quiet it and keep the top payload bits.
    return static_cast<std::uint16_t>(sign | 0x7E00u |
                                      ((abs32 & 0x007FFFFFu) >> 13));
  }

  const std::int32_t exp32 = static_cast<std::int32_t>(abs32 >> 23);
  const std::uint32_t mant = abs32 & 0x007FFFFFu;
  const std::int32_t exp16 = exp32 - 127 + 15;

  if (exp16 >= 31) return static_cast<std::uint16_t>(sign | 0x7C00u);

  if (exp16 <= 0) {
    // Subnormal half or zero. Below 2^-25 everything rounds to zero
    // (binary32 subnormals included).
    if (exp16 < -10) return static_cast<std::uint16_t>(sign);
    const std::uint32_t sig = mant | 0x00800000u;
    const int shift = 14 - exp16;  // in [14, 24]
    const std::uint32_t shifted = sig >> shift;
    const std::uint32_t rem = sig & ((1u << shift) - 1u);
    const std::uint32_t halfway = 1u << (shift - 1);
    std::uint32_t r = shifted;
    if (rem > halfway || (rem == halfway && (r & 1u))) ++r;
    // r == 1024 carries into the smallest normal encoding, which is correct.
    return static_cast<std::uint16_t>(sign | r);
  }

  std::uint32_t r = mant >> 13;
  const std::uint32_t rem = mant & 0x1FFFu;
  if (rem > 0x1000u || (rem == 0x1000u && (r & 1u))) ++r;
  const std::uint32_t out = (static_cast<std::uint32_t>(exp16) << 10) + r;
  if (out >= 0x7C00u) return static_cast<std::uint16_t>(sign | 0x7C00u);
  return static_cast<std::uint16_t>(sign | out);
}

constexpr std::uint32_t f16_bits_to_f32_bits(std::uint16_t h) {
  const std::uint32_t sign = static_cast<std::uint32_t>(h & 0x8000u) << 16;
  const std::uint32_t exp = (h >> 10) & 0x1Fu;
  const std::uint32_t mant = h & 0x3FFu;

  if (exp == 0) {
    if (mant == 0) return sign;
    // Subnormal: normalize. bit_width(mant) is in [1, 10].
    const int w = std::bit_width(mant);
    const std::uint32_t mant32 = (mant ^ (1u << (w - 1))) << (23 - (w - 1));
    const std::uint32_t exp32 = static_cast<std::uint32_t>(w + 102);
    return sign | (exp32 << 23) | mant32;
  }
  if (exp == 0x1F) return sign | 0x7F800000u | (mant << 13);
  return sign | ((exp - 15 + 127) << 23) | (mant << 13);
}

inline Half f32_to_f16(float x) {
  return Half::from_bits(f32_bits_to_f16_bits(std::bit_cast<std::uint32_t>(x)));
}

inline float f16_to_f32(Half h) {
  return std::bit_cast<float>(f16_bits_to_f32_bits(h.bits));
}

// Sum in binary32, rounded back; the arithmetic used for the global partial
// sum reduction.
inline Half f16_add(Half a, Half b) {
  return f32_to_f16(f16_to_f32(a) + f16_to_f32(b));
}

}  // namespace flutesim
