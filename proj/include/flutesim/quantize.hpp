// SPDX-License-Identifier: Apache-2.0
//
// Group-wise NormalFloat quantization. A group is group_size consecutive
// entries down the K dimension of one column; each group stores one absmax
// scale in binary16 and b-bit indices into the shared normalized table.
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "flutesim/matrix.hpp"
#include "flutesim/nf_table.hpp"

namespace flutesim {

struct QuantConfig {
  int bits = 4;        // in {2, 3, 4}
  int group_size = 128;  // power of two in {32, 64, 128, 256}

  // Throws ConfigError on an unsupported combination; if k >= 0 also checks
  // divisibility of the quantized dimension.
  void validate(int k = -1) const;
};

struct QuantizedMatrix {
  std::vector<std::uint8_t> indices;  // k*n row-major, each < 2^bits
  std::vector<Half> scales;           // (k*n)/group_size, group-major
  LookupTable table;
  int k = 0;
  int n = 0;
  QuantConfig cfg;

  int groups_per_column() const { return k / cfg.group_size; }
  // Group of element (i, j): groups are contiguous along K within a column.
  int group_of(int i, int j) const {
    return j * groups_per_column() + i / cfg.group_size;
  }
};

// Nearest-quantile quantization. Per group: scale = absmax (binary32), each
// entry's index minimizes |values[c] - w/scale| with ties toward the smaller
// index. An all-zero group maps every entry to the zero-quantile index with
// scale 0. Throws InputError on non-finite weights, ConfigError on bad dims.
QuantizedMatrix quantize_matrix(const MatF& w, const QuantConfig& cfg);

// w_hat(i,j) = widen(scales[group]) * values[index], in binary32.
MatF dequantize_matrix(const QuantizedMatrix& q);

// One straight-through-estimator evaluation of the calibration objective
// L = ||X*(W_hat - W)||_F^2 at fixed per-group sigma values, where
// W_hat(i,j) = absmax_g * sigma_tilde_g * raw_quantile[c(i,j)] and the
// indices c are re-quantized for the given sigma_tilde then treated as
// constants. grad[g] = dL/d(sigma_tilde_g) under that freezing.
struct SteEval {
  double loss = 0.0;
  std::vector<double> grad;
  std::vector<std::uint8_t> indices;
};
SteEval ste_evaluate(const MatF& w, const MatF& x_calib, const QuantConfig& cfg,
                     std::span<const double> sigma_tilde);

// Calibration-learned scale refinement: plain gradient descent on the
// per-group sigma_tilde, initialized to nf_sigma(), using the straight-through
// estimator. On exit the learned factor is folded into the stored scale
// (scale_g = absmax_g * sigma_tilde_g / nf_sigma()) so dequantization still
// reads one scalar per group from the normalized table.
// steps == 0 returns the plain quantize_matrix result unchanged.
// Throws OptimizationError (with step index) if the loss goes non-finite.
struct RefineResult {
  QuantizedMatrix quantized;
  std::vector<double> sigma_tilde;
  double initial_loss = 0.0;
  double final_loss = 0.0;
};
RefineResult refine_scales(const MatF& w, const MatF& x_calib,
                           const QuantConfig& cfg, int steps, double lr);

}  // namespace flutesim
