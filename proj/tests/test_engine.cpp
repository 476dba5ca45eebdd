// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <random>

#include "flutesim/engine.hpp"
#include "flutesim/errors.hpp"
#include "oracles.hpp"

using namespace flutesim;

namespace {

struct Built {
  QuantizedMatrix q;
  PackedWeights pw;
  VectorizedTable lut;
};

Built build_weights(std::mt19937& rng, int k, int n, const QuantConfig& cfg,
                    const LayoutDescriptor& layout, int dup = 1) {
  std::normal_distribution<float> dist(0.0f, 1.0f);
  MatF w(k, n);
  for (float& v : w.data) v = dist(rng);
  Built b;
  b.q = quantize_matrix(w, cfg);
  b.pw = reorder_and_split(b.q, layout);
  b.lut = make_vectorized_lut(b.q.table, dup);
  return b;
}

MatH random_x(std::mt19937& rng, int m, int k, float spread = 0.5f) {
  std::normal_distribution<float> dist(0.0f, spread);
  MatH x(m, k);
  for (Half& h : x.data) h = f32_to_f16(dist(rng));
  return x;
}

MatmulProblem problem_for(const MatH& x, const Built& b, int workers,
                          ExecMode mode, int stages = 2) {
  MatmulProblem p;
  p.x = &x;
  p.weights = &b.pw;
  p.scales = &b.q.scales;
  p.lut = &b.lut;
  p.cfg = b.q.cfg;
  p.workers = workers;
  p.stages = stages;
  p.mode = mode;
  return p;
}

// Binary64 reference: X * dequantize(W), both lifted to double.
MatD reference_f64(const MatH& x, const QuantizedMatrix& q) {
  MatD xd(x.rows, x.cols);
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    xd.data[i] = f16_to_f32(x.data[i]);
  }
  const MatF wf = dequantize_matrix(q);
  MatD wd(wf.rows, wf.cols);
  for (std::size_t i = 0; i < wf.data.size(); ++i) wd.data[i] = wf.data[i];
  return test::matmul_f64(xd, wd);
}

void check_against_reference(const MatH& y, const MatD& ref) {
  REQUIRE(y.rows == ref.rows);
  REQUIRE(y.cols == ref.cols);
  for (int i = 0; i < y.rows; ++i) {
    for (int j = 0; j < y.cols; ++j) {
      const double got = f16_to_f32(y(i, j));
      const double want = ref(i, j);
      REQUIRE(std::abs(got - want) <=
              std::max(1e-2 * std::abs(want), 1e-2));
    }
  }
}

}  // namespace

TEST_CASE("engine: all-ones row against a constant column") {
  const LayoutDescriptor layout{16, 16, 32, 16, 8, 16};
  const QuantConfig cfg{4, 32};
  const int k = 64;
  const int n = 16;

  // One column pinned to quantile index 12, scale folded through absmax.
  const LookupTable t = build_nf_table(4);
  MatF w(k, n);
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < n; ++j) {
      w(i, j) = (j == 3) ? 2.0f * t.values[12] : 0.0f;
    }
  }
  // Make the absmax of column 3's groups exactly 2 so indices stay at 12.
  for (int g = 0; g < 2; ++g) w(g * 32, 3) = 2.0f;

  QuantizedMatrix q = quantize_matrix(w, cfg);
  const PackedWeights pw = reorder_and_split(q, layout);
  const VectorizedTable lut = make_vectorized_lut(q.table, 1);

  MatH x(1, k);
  for (Half& h : x.data) h = f32_to_f16(1.0f);

  Built b{q, pw, lut};
  const MatmulResult r = execute(problem_for(x, b, 1, ExecMode::kSerial));

  // y ~= sum of column 3: 2 * (62 * T[12] + 2 * T[15]) within loose f16
  // accumulation tolerance.
  const double expect =
      2.0 * (62.0 * f16_to_f32(f32_to_f16(t.values[12])) + 2.0);
  CHECK(std::abs(f16_to_f32(r.y(0, 3)) - expect) <= 0.05 * expect);
  for (int j = 0; j < n; ++j) {
    if (j != 3) CHECK(std::abs(f16_to_f32(r.y(0, j))) <= 1e-3);
  }
}

TEST_CASE("engine: identity activations reproduce dequantized rows") {
  const LayoutDescriptor layout{16, 16, 16, 16, 8, 16};
  const QuantConfig cfg{4, 32};
  std::mt19937 rng(0xE1);
  const int m = 32;  // m = k
  const Built b = build_weights(rng, 32, 16, cfg, layout);

  MatH x(m, 32);
  for (int i = 0; i < m; ++i) x(i, i) = f32_to_f16(1.0f);

  const MatmulResult r = execute(problem_for(x, b, 2, ExecMode::kSerial));
  const MatF wf = dequantize_matrix(b.q);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < 16; ++j) {
      const float got = f16_to_f32(r.y(i, j));
      const float want = wf(i, j);
      // One binary16 rounding of the dequantized value.
      REQUIRE(std::abs(got - want) <=
              std::max(std::abs(want) * 1e-3f, 6e-8f));
    }
  }
}

TEST_CASE("engine: matches the binary64 oracle across the randomized sweep") {
  std::mt19937 rng(0xE2);
  const LayoutDescriptor layout{16, 64, 64, 16, 8, 16};
  for (const int k : {256, 512}) {
    for (const int n : {128, 256}) {
      for (const int bits : {3, 4}) {
        const QuantConfig cfg{bits, 128};
        const Built b = build_weights(rng, k, n, cfg, layout, 2);
        const int m = 1 + static_cast<int>(rng() % 16);
        const MatH x = random_x(rng, m, k);
        const MatD ref = reference_f64(x, b.q);
        for (const int workers : {1, 2, 3, 8}) {
          const MatmulResult r =
              execute(problem_for(x, b, workers, ExecMode::kParallel));
          check_against_reference(r.y, ref);
        }
      }
    }
  }
}

TEST_CASE("engine: serial and parallel modes agree bitwise") {
  std::mt19937 rng(0xE3);
  const LayoutDescriptor layout{16, 32, 32, 16, 8, 16};
  const QuantConfig cfg{3, 64};
  const Built b = build_weights(rng, 128, 64, cfg, layout);
  const MatH x = random_x(rng, 5, 128);

  for (const int workers : {1, 2, 3, 7, 16}) {
    const MatmulResult serial =
        execute(problem_for(x, b, workers, ExecMode::kSerial));
    const MatmulResult parallel =
        execute(problem_for(x, b, workers, ExecMode::kParallel));
    REQUIRE(serial.y.data.size() == parallel.y.data.size());
    for (std::size_t i = 0; i < serial.y.data.size(); ++i) {
      REQUIRE(serial.y.data[i] == parallel.y.data[i]);
    }
    CHECK(serial.stats.total_bytes() == parallel.stats.total_bytes());
    CHECK(serial.stats.flops == parallel.stats.flops);
  }
}

TEST_CASE("engine: P = 1 output is bitwise stable when no tile is split") {
  std::mt19937 rng(0xE4);
  const LayoutDescriptor layout{16, 32, 32, 16, 8, 16};
  const QuantConfig cfg{4, 32};
  const Built b = build_weights(rng, 64, 64, cfg, layout);
  const MatH x = random_x(rng, 3, 64);

  // Grid: 1 x 2 x 2 = 4 units. P = 2 splits them into whole output tiles
  // (2 units each), so no fixup happens and results match P = 1 bitwise.
  const MatmulResult one = execute(problem_for(x, b, 1, ExecMode::kSerial));
  const MatmulResult two = execute(problem_for(x, b, 2, ExecMode::kSerial));
  for (std::size_t i = 0; i < one.y.data.size(); ++i) {
    REQUIRE(one.y.data[i] == two.y.data[i]);
  }

  // P = 4 splits every output tile across two workers; the fixup path stays
  // within one binary16 rounding per contributor of the P = 1 result.
  const MatmulResult four = execute(problem_for(x, b, 4, ExecMode::kSerial));
  for (std::size_t i = 0; i < one.y.data.size(); ++i) {
    const float a = f16_to_f32(one.y.data[i]);
    const float c = f16_to_f32(four.y.data[i]);
    REQUIRE(std::abs(a - c) <= std::max(2e-3f * std::abs(a), 2e-3f));
  }
}

TEST_CASE("engine: traffic conservation at P = 1") {
  std::mt19937 rng(0xE5);
  const LayoutDescriptor layout{16, 32, 64, 16, 8, 16};
  for (const int bits : {2, 3, 4}) {
    const QuantConfig cfg{bits, 64};
    const Built b = build_weights(rng, 128, 64, cfg, layout);
    const MatH x = random_x(rng, 8, 128);
    const MatmulResult r = execute(problem_for(x, b, 1, ExecMode::kSerial));

    std::uint64_t slice_bytes = 0;
    for (const BitSlice& s : b.pw.slices) slice_bytes += s.words.size() * 4;
    // tiles_m = 1, so each weight tile is fetched exactly once.
    CHECK(r.stats.bytes_weights == slice_bytes);
    CHECK(r.stats.bytes_table == b.lut.entries.size() * 4);
    CHECK(r.stats.bytes_partials_rw == 0);
    CHECK(r.stats.bytes_activations ==
          static_cast<std::uint64_t>(8) * 128 * 2 * (64 / 32));
    CHECK(r.stats.bytes_output == static_cast<std::uint64_t>(8) * 64 * 2);
    CHECK(r.stats.flops ==
          static_cast<std::uint64_t>(2) * 16 * 128 * 64);  // padded m = 16
  }
}

TEST_CASE("engine: dry-run traffic matches execution") {
  std::mt19937 rng(0xE6);
  const LayoutDescriptor layout{16, 32, 32, 16, 8, 16};
  const QuantConfig cfg{4, 128};
  const Built b = build_weights(rng, 128, 64, cfg, layout, 2);
  const MatH x = random_x(rng, 4, 128);

  for (const int workers : {1, 3, 8}) {
    const MatmulResult r =
        execute(problem_for(x, b, workers, ExecMode::kSerial));
    ProblemShape shape;
    shape.m = 4;
    shape.k = 128;
    shape.n = 64;
    shape.cfg = cfg;
    shape.layout = layout;
    shape.workers = workers;
    shape.stages = 2;
    shape.dup = 2;
    const TrafficStats t = plan_traffic(shape);
    CHECK(t.bytes_weights == r.stats.bytes_weights);
    CHECK(t.bytes_scales == r.stats.bytes_scales);
    CHECK(t.bytes_table == r.stats.bytes_table);
    CHECK(t.bytes_activations == r.stats.bytes_activations);
    CHECK(t.bytes_partials_rw == r.stats.bytes_partials_rw);
    CHECK(t.bytes_output == r.stats.bytes_output);
    CHECK(t.flops == r.stats.flops);
  }
}

TEST_CASE("engine: stages only reorder prefetch, totals are unchanged") {
  std::mt19937 rng(0xE7);
  const LayoutDescriptor layout{16, 32, 32, 16, 8, 16};
  const QuantConfig cfg{4, 32};
  const Built b = build_weights(rng, 64, 64, cfg, layout);
  const MatH x = random_x(rng, 2, 64);

  const MatmulResult s2 = execute(problem_for(x, b, 3, ExecMode::kSerial, 2));
  const MatmulResult s4 = execute(problem_for(x, b, 3, ExecMode::kSerial, 4));
  CHECK(s2.stats.total_bytes() == s4.stats.total_bytes());
  for (std::size_t i = 0; i < s2.y.data.size(); ++i) {
    REQUIRE(s2.y.data[i] == s4.y.data[i]);
  }
}

TEST_CASE("engine: bits_per_param reproduces the compression table") {
  CHECK(bits_per_param(QuantConfig{4, 32}) == doctest::Approx(4.50));
  CHECK(bits_per_param(QuantConfig{4, 64}) == doctest::Approx(4.25));
  CHECK(bits_per_param(QuantConfig{4, 128}) == doctest::Approx(4.125));
  CHECK(bits_per_param(QuantConfig{4, 256}) == doctest::Approx(4.0625));
  CHECK(bits_per_param(QuantConfig{3, 128}) == doctest::Approx(3.125));
  CHECK(bits_per_param(QuantConfig{3, 256}) == doctest::Approx(3.0625));
}

TEST_CASE("engine: weight traffic ratio") {
  TrafficStats t;
  t.bytes_weights = 4125;
  t.bytes_scales = 0;
  // Passthrough: quantized bytes equal dense bytes.
  CHECK(weight_traffic_ratio(t, 4125.0) == doctest::Approx(1.0));
  // W4G128 with each tile fetched once: (4 + 16/128) / 16 of dense.
  TrafficStats w4;
  w4.bytes_weights = 1000 * 4 / 8;
  w4.bytes_scales = 1000 / 128 * 2;
  CHECK(weight_traffic_ratio(w4, 1000.0 * 2) ==
        doctest::Approx(4.125 / 16.0).epsilon(1e-3));
  CHECK_THROWS_AS(weight_traffic_ratio(t, 0.0), InputError);
}

TEST_CASE("engine: malformed problems are rejected") {
  std::mt19937 rng(0xE8);
  const LayoutDescriptor layout{16, 32, 32, 16, 8, 16};
  const QuantConfig cfg{4, 32};
  const Built b = build_weights(rng, 64, 64, cfg, layout);
  const MatH x = random_x(rng, 2, 64);

  MatmulProblem p = problem_for(x, b, 2, ExecMode::kSerial);
  p.workers = 0;
  CHECK_THROWS_AS(execute(p), ConfigError);
  p = problem_for(x, b, 2, ExecMode::kSerial);
  p.stages = 0;
  CHECK_THROWS_AS(execute(p), ConfigError);
  p = problem_for(x, b, 2, ExecMode::kSerial);
  p.tile_m = 20;  // not divisible by frag_m
  CHECK_THROWS_AS(execute(p), ConfigError);

  const MatH bad_x = random_x(rng, 2, 32);
  MatmulProblem mismatched = problem_for(bad_x, b, 2, ExecMode::kSerial);
  CHECK_THROWS_AS(execute(mismatched), ConfigError);

  MatmulProblem missing = problem_for(x, b, 2, ExecMode::kSerial);
  missing.lut = nullptr;
  CHECK_THROWS_AS(execute(missing), InputError);
}
