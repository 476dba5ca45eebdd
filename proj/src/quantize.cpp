// SPDX-License-Identifier: Apache-2.0
#include "flutesim/quantize.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "flutesim/errors.hpp"

namespace flutesim {
namespace {

bool power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

// Index of the table value nearest to r, ties toward the smaller index.
// values is strictly increasing and r is in [-1, 1], so the winner is one of
// the two lower_bound neighbors.
int nearest_index(const std::vector<float>& values, float r) {
  auto it = std::lower_bound(values.begin(), values.end(), r);
  if (it == values.begin()) return 0;
  if (it == values.end()) return static_cast<int>(values.size()) - 1;
  const int hi = static_cast<int>(it - values.begin());
  const int lo = hi - 1;
  const float d_lo = r - values[lo];
  const float d_hi = values[hi] - r;
  return d_hi < d_lo ? hi : lo;
}

// Argmin over |candidates[c] - u|, first minimum wins. Candidates need not be
// sorted (sigma_tilde may have any sign during optimization).
int nearest_candidate(std::span<const double> candidates, double u) {
  int best = 0;
  double best_dist = std::abs(candidates[0] - u);
  for (std::size_t c = 1; c < candidates.size(); ++c) {
    const double d = std::abs(candidates[c] - u);
    if (d < best_dist) {
      best_dist = d;
      best = static_cast<int>(c);
    }
  }
  return best;
}

std::vector<float> group_absmax(const MatF& w, const QuantConfig& cfg) {
  const int k = w.rows;
  const int n = w.cols;
  const int gpc = k / cfg.group_size;
  std::vector<float> absmax(static_cast<std::size_t>(gpc) * n, 0.0f);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < k; ++i) {
      const float v = w(i, j);
      if (!std::isfinite(v)) {
        throw InputError("quantize: non-finite weight at (" +
                         std::to_string(i) + ", " + std::to_string(j) + ")");
      }
      float& s = absmax[static_cast<std::size_t>(j) * gpc + i / cfg.group_size];
      s = std::max(s, std::abs(v));
    }
  }
  return absmax;
}

}  // namespace

void QuantConfig::validate(int k) const {
  if (bits < 2 || bits > 4) {
    throw ConfigError("quantization bits must be in {2,3,4}, got " +
                      std::to_string(bits));
  }
  if (!power_of_two(group_size) || group_size < 32 || group_size > 256) {
    throw ConfigError("group size must be a power of two in [32, 256], got " +
                      std::to_string(group_size));
  }
  if (k >= 0 && k % group_size != 0) {
    throw ConfigError("quantized dimension " + std::to_string(k) +
                      " is not divisible by group size " +
                      std::to_string(group_size));
  }
}

QuantizedMatrix quantize_matrix(const MatF& w, const QuantConfig& cfg) {
  cfg.validate(w.rows);
  const int k = w.rows;
  const int n = w.cols;
  const int b_size = cfg.group_size;
  const int gpc = k / b_size;

  QuantizedMatrix q;
  q.k = k;
  q.n = n;
  q.cfg = cfg;
  q.table = build_nf_table(cfg.bits);
  q.indices.resize(static_cast<std::size_t>(k) * n);
  q.scales.resize(static_cast<std::size_t>(gpc) * n);

  const std::vector<float> absmax = group_absmax(w, cfg);
  const int zero_idx = q.table.zero_index();
  const long total_groups = static_cast<long>(gpc) * n;

  for (long g = 0; g < total_groups; ++g) {
    const Half s16 = f32_to_f16(absmax[g]);
    if ((s16.to_bits() & 0x7C00u) == 0x7C00u) {
      throw InputError("quantize: group " + std::to_string(g) +
                       " absmax overflows binary16");
    }
    q.scales[g] = s16;
  }

#pragma omp parallel for schedule(static)
  for (long g = 0; g < total_groups; ++g) {
    const int j = static_cast<int>(g / gpc);
    const int i0 = static_cast<int>(g % gpc) * b_size;
    const float s = absmax[g];
    if (s == 0.0f) {
      for (int i = i0; i < i0 + b_size; ++i) {
        q.indices[static_cast<std::size_t>(i) * n + j] =
            static_cast<std::uint8_t>(zero_idx);
      }
      continue;
    }
    for (int i = i0; i < i0 + b_size; ++i) {
      const float r = w(i, j) / s;
      q.indices[static_cast<std::size_t>(i) * n + j] =
          static_cast<std::uint8_t>(nearest_index(q.table.values, r));
    }
  }
  return q;
}

MatF dequantize_matrix(const QuantizedMatrix& q) {
  MatF out(q.k, q.n);
  for (int j = 0; j < q.n; ++j) {
    for (int i = 0; i < q.k; ++i) {
      const float s = f16_to_f32(q.scales[q.group_of(i, j)]);
      out(i, j) = s * q.table.values[q.indices[static_cast<std::size_t>(i) * q.n + j]];
    }
  }
  return out;
}

SteEval ste_evaluate(const MatF& w, const MatF& x_calib, const QuantConfig& cfg,
                     std::span<const double> sigma_tilde) {
  cfg.validate(w.rows);
  if (x_calib.cols != w.rows) {
    throw InputError("calibration matrix has " + std::to_string(x_calib.cols) +
                     " columns, weights have " + std::to_string(w.rows) +
                     " rows");
  }
  const int k = w.rows;
  const int n = w.cols;
  const int m = x_calib.rows;
  const int gpc = k / cfg.group_size;
  const long total_groups = static_cast<long>(gpc) * n;
  if (sigma_tilde.size() != static_cast<std::size_t>(total_groups)) {
    throw InputError("sigma_tilde has wrong group count");
  }

  const std::vector<float> absmax = group_absmax(w, cfg);
  const std::vector<double> quantiles = nf_quantiles(cfg.bits);
  const int zero_idx = (1 << (cfg.bits - 1)) - 1;

  SteEval eval;
  eval.indices.resize(static_cast<std::size_t>(k) * n);
  eval.grad.assign(total_groups, 0.0);

  // Re-quantize against the scaled raw quantiles, then freeze the indices.
  MatD w_hat(k, n);
  std::vector<double> candidates(quantiles.size());
  for (long g = 0; g < total_groups; ++g) {
    const int j = static_cast<int>(g / gpc);
    const int i0 = static_cast<int>(g % gpc) * cfg.group_size;
    const double eff = static_cast<double>(absmax[g]) * sigma_tilde[g];
    if (absmax[g] == 0.0f) {
      for (int i = i0; i < i0 + cfg.group_size; ++i) {
        eval.indices[static_cast<std::size_t>(i) * n + j] =
            static_cast<std::uint8_t>(zero_idx);
        w_hat(i, j) = 0.0;
      }
      continue;
    }
    for (std::size_t c = 0; c < quantiles.size(); ++c) {
      candidates[c] = eff * quantiles[c];
    }
    for (int i = i0; i < i0 + cfg.group_size; ++i) {
      const int c = nearest_candidate(candidates, w(i, j));
      eval.indices[static_cast<std::size_t>(i) * n + j] =
          static_cast<std::uint8_t>(c);
      w_hat(i, j) = candidates[c];
    }
  }

  // E = X * (W_hat - W), loss = ||E||^2.
  MatD err(m, n);
#pragma omp parallel for schedule(static)
  for (int t = 0; t < m; ++t) {
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int i = 0; i < k; ++i) {
        acc += static_cast<double>(x_calib(t, i)) *
               (w_hat(i, j) - static_cast<double>(w(i, j)));
      }
      err(t, j) = acc;
    }
  }
  double loss = 0.0;
  for (const double e : err.data) loss += e * e;
  eval.loss = loss;

  // grad_g = sum over (i,j) in g of [2 X^T E]_ij * absmax_g * q[c(i,j)].
#pragma omp parallel for schedule(static)
  for (long g = 0; g < total_groups; ++g) {
    const int j = static_cast<int>(g / gpc);
    const int i0 = static_cast<int>(g % gpc) * cfg.group_size;
    if (absmax[g] == 0.0f) continue;
    double acc = 0.0;
    for (int i = i0; i < i0 + cfg.group_size; ++i) {
      double gij = 0.0;
      for (int t = 0; t < m; ++t) {
        gij += static_cast<double>(x_calib(t, i)) * err(t, j);
      }
      const int c = eval.indices[static_cast<std::size_t>(i) * n + j];
      acc += 2.0 * gij * static_cast<double>(absmax[g]) * quantiles[c];
    }
    eval.grad[g] = acc;
  }
  return eval;
}

RefineResult refine_scales(const MatF& w, const MatF& x_calib,
                           const QuantConfig& cfg, int steps, double lr) {
  if (steps < 0) throw InputError("refine_scales: steps must be >= 0");
  RefineResult result;
  result.quantized = quantize_matrix(w, cfg);

  const long total_groups =
      static_cast<long>(result.quantized.scales.size());
  const double sigma = nf_sigma();
  result.sigma_tilde.assign(total_groups, sigma);

  if (steps == 0) {
    const SteEval eval = ste_evaluate(w, x_calib, cfg, result.sigma_tilde);
    result.initial_loss = result.final_loss = eval.loss;
    return result;
  }

  for (int step = 0; step < steps; ++step) {
    const SteEval eval = ste_evaluate(w, x_calib, cfg, result.sigma_tilde);
    if (!std::isfinite(eval.loss)) {
      throw OptimizationError("refine_scales: loss diverged", step);
    }
    if (step == 0) result.initial_loss = eval.loss;
    for (long g = 0; g < total_groups; ++g) {
      result.sigma_tilde[g] -= lr * eval.grad[g];
    }
  }

  const SteEval final_eval = ste_evaluate(w, x_calib, cfg, result.sigma_tilde);
  if (!std::isfinite(final_eval.loss)) {
    throw OptimizationError("refine_scales: loss diverged", steps);
  }
  result.final_loss = final_eval.loss;
  result.quantized.indices = final_eval.indices;

  // Fold the learned factor into the stored scale; dequantization keeps
  // reading the normalized table.
  const std::vector<float> absmax = group_absmax(w, cfg);
  for (long g = 0; g < total_groups; ++g) {
    const double folded =
        static_cast<double>(absmax[g]) * result.sigma_tilde[g] / sigma;
    if (!(folded >= 0.0) || !std::isfinite(folded)) {
      throw OptimizationError(
          "refine_scales: folded scale is negative or non-finite", steps);
    }
    const Half h = f32_to_f16(static_cast<float>(folded));
    if ((h.to_bits() & 0x7C00u) == 0x7C00u) {
      throw OptimizationError("refine_scales: folded scale overflows binary16",
                              steps);
    }
    result.quantized.scales[g] = h;
  }
  return result;
}

}  // namespace flutesim
