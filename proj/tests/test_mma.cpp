// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "flutesim/errors.hpp"
#include "flutesim/mma.hpp"
#include "oracles.hpp"

using namespace flutesim;

namespace {

std::vector<Half> random_fragment(std::mt19937& rng, int count, float lo,
                                  float hi) {
  std::uniform_real_distribution<float> dist(lo, hi);
  std::vector<Half> out(count);
  for (Half& h : out) h = f32_to_f16(dist(rng));
  return out;
}

}  // namespace

TEST_CASE("mma: identity rows pass b through widened") {
  const FragDims d{4, 3, 4};
  std::vector<Half> a(16);
  for (int i = 0; i < 4; ++i) a[i * 4 + i] = f32_to_f16(1.0f);
  std::mt19937 rng(7);
  const std::vector<Half> b = random_fragment(rng, 12, -4.0f, 4.0f);
  std::vector<float> c(12, 0.0f);
  mma_fragment(a, b, c, d);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 3; ++j) {
      REQUIRE(c[i * 3 + j] == f16_to_f32(b[i * 3 + j]));
    }
  }
}

TEST_CASE("mma: zero a leaves c unchanged") {
  const FragDims d{2, 2, 2};
  std::vector<Half> a(4);
  std::mt19937 rng(8);
  const std::vector<Half> b = random_fragment(rng, 4, -1.0f, 1.0f);
  std::vector<float> c = {1.5f, -2.25f, 0.125f, 3.0f};
  const std::vector<float> before = c;
  mma_fragment(a, b, c, d);
  CHECK(c == before);
}

TEST_CASE("mma: random fragments stay within the binary64 error bound") {
  const FragDims d{16, 8, 16};
  std::mt19937 rng(0xACC);
  for (int trial = 0; trial < 50; ++trial) {
    const std::vector<Half> a = random_fragment(rng, d.m * d.k, -1.0f, 1.0f);
    const std::vector<Half> b = random_fragment(rng, d.k * d.n, -1.0f, 1.0f);
    std::vector<float> c(d.m * d.n, 0.0f);
    mma_fragment(a, b, c, d);

    for (int i = 0; i < d.m; ++i) {
      double max_row = 0.0;
      for (int kk = 0; kk < d.k; ++kk) {
        max_row = std::max(max_row,
                           std::abs(static_cast<double>(f16_to_f32(a[i * d.k + kk]))));
      }
      for (int j = 0; j < d.n; ++j) {
        double max_col = 0.0;
        double ref = 0.0;
        for (int kk = 0; kk < d.k; ++kk) {
          const double bv = f16_to_f32(b[kk * d.n + j]);
          max_col = std::max(max_col, std::abs(bv));
          ref += static_cast<double>(f16_to_f32(a[i * d.k + kk])) * bv;
        }
        const double bound = d.k * std::ldexp(1.0, -24) * max_row * max_col;
        REQUIRE(std::abs(c[i * d.n + j] - ref) <= bound);
      }
    }
  }
}

TEST_CASE("mma: bitwise deterministic across repeated runs") {
  const FragDims d{16, 8, 16};
  std::mt19937 rng(99);
  const std::vector<Half> a = random_fragment(rng, d.m * d.k, -2.0f, 2.0f);
  const std::vector<Half> b = random_fragment(rng, d.k * d.n, -2.0f, 2.0f);
  std::vector<float> c1(d.m * d.n, 0.25f);
  std::vector<float> c2(d.m * d.n, 0.25f);
  mma_fragment(a, b, c1, d);
  mma_fragment(a, b, c2, d);
  CHECK(c1 == c2);
}

TEST_CASE("mma: dimension mismatch is a configuration error") {
  std::vector<Half> a(4);
  std::vector<Half> b(4);
  std::vector<float> c(4);
  CHECK_THROWS_AS(mma_fragment(a, b, c, FragDims{2, 2, 3}), ConfigError);
  CHECK_THROWS_AS(mma_fragment(a, b, c, FragDims{0, 2, 2}), ConfigError);
}
