// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <bit>
#include <cmath>
#include <cstdint>
#include <random>

#include "flutesim/half.hpp"
#include "oracles.hpp"

using namespace flutesim;

namespace {
bool is_f16_nan(std::uint16_t bits) {
  return (bits & 0x7C00u) == 0x7C00u && (bits & 0x3FFu) != 0;
}
}  // namespace

TEST_CASE("narrowing: canonical patterns") {
  CHECK(f32_to_f16(1.0f).to_bits() == 0x3C00);
  CHECK(f32_to_f16(0.0f).to_bits() == 0x0000);
  CHECK(f32_to_f16(-0.0f).to_bits() == 0x8000);
  CHECK(f32_to_f16(0.1f).to_bits() == 0x2E66);
  CHECK(f32_to_f16(-2.0f).to_bits() == 0xC000);
  CHECK(f32_to_f16(65504.0f).to_bits() == 0x7BFF);
  // Beyond the largest finite half: rounds to infinity.
  CHECK(f32_to_f16(65520.0f).to_bits() == 0x7C00);
  CHECK(f32_to_f16(1e30f).to_bits() == 0x7C00);
  CHECK(f32_to_f16(-1e30f).to_bits() == 0xFC00);
  // Smallest subnormal and the tie just below it.
  CHECK(f32_to_f16(std::ldexp(1.0f, -24)).to_bits() == 0x0001);
  CHECK(f32_to_f16(std::ldexp(1.0f, -25)).to_bits() == 0x0000);  // tie to even
  CHECK(f32_to_f16(std::ldexp(1.5f, -25)).to_bits() == 0x0001);
}

TEST_CASE("widening: canonical patterns") {
  CHECK(f16_to_f32(Half::from_bits(0x3C00)) == 1.0f);
  CHECK(f16_to_f32(Half::from_bits(0x7C00)) ==
        std::numeric_limits<float>::infinity());
  CHECK(f16_to_f32(Half::from_bits(0xFC00)) ==
        -std::numeric_limits<float>::infinity());
  CHECK(f16_to_f32(Half::from_bits(0x0001)) == std::ldexp(1.0f, -24));
  CHECK(std::isnan(f16_to_f32(Half::from_bits(0x7E01))));
}

TEST_CASE("widening matches the format-definition reference for all patterns") {
  for (std::uint32_t b = 0; b <= 0xFFFF; ++b) {
    const auto h = static_cast<std::uint16_t>(b);
    const float got = f16_to_f32(Half::from_bits(h));
    const float want = test::ref_f16_to_f32(h);
    if (is_f16_nan(h)) {
      CHECK(std::isnan(got));
    } else {
      REQUIRE(std::bit_cast<std::uint32_t>(got) ==
              std::bit_cast<std::uint32_t>(want));
    }
  }
}

TEST_CASE("round-trip identity over all patterns, modulo NaN quieting") {
  for (std::uint32_t b = 0; b <= 0xFFFF; ++b) {
    const auto h = static_cast<std::uint16_t>(b);
    const std::uint16_t back = f32_to_f16(f16_to_f32(Half::from_bits(h))).to_bits();
    if (is_f16_nan(h)) {
      REQUIRE(back == (h | 0x0200u));  // signaling NaNs come back quiet
    } else {
      REQUIRE(back == h);
    }
  }
}

TEST_CASE("narrowing matches the software-float reference on random inputs") {
  std::mt19937 rng(0xF16F16u);
  int checked = 0;
  while (checked < 10000) {
    const auto u = static_cast<std::uint32_t>(rng());
    const float x = std::bit_cast<float>(u);
    if (std::isnan(x)) continue;
    REQUIRE(f32_to_f16(x).to_bits() == test::ref_f32_to_f16_bits(x));
    ++checked;
  }
  // Values concentrated in the half range, where rounding actually bites.
  std::uniform_real_distribution<float> dist(-70000.0f, 70000.0f);
  for (int i = 0; i < 10000; ++i) {
    const float x = dist(rng);
    REQUIRE(f32_to_f16(x).to_bits() == test::ref_f32_to_f16_bits(x));
  }
  std::uniform_real_distribution<float> tiny(-1e-4f, 1e-4f);
  for (int i = 0; i < 10000; ++i) {
    const float x = tiny(rng);
    REQUIRE(f32_to_f16(x).to_bits() == test::ref_f32_to_f16_bits(x));
  }
}

TEST_CASE("narrowing is monotone on finite inputs") {
  std::mt19937 rng(424242);
  std::uniform_real_distribution<float> dist(-80000.0f, 80000.0f);
  for (int i = 0; i < 20000; ++i) {
    float a = dist(rng);
    float b = dist(rng);
    if (a > b) std::swap(a, b);
    const float fa = f16_to_f32(f32_to_f16(a));
    const float fb = f16_to_f32(f32_to_f16(b));
    REQUIRE(fa <= fb);
  }
}

TEST_CASE("NaN narrows to a quiet NaN") {
  const std::uint16_t q = f32_to_f16(std::numeric_limits<float>::quiet_NaN()).to_bits();
  CHECK(is_f16_nan(q));
  CHECK((q & 0x0200u) != 0);
}
