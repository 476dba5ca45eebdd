// SPDX-License-Identifier: Apache-2.0
//
// NormalFloat lookup tables: 2^b Gaussian quantiles at evenly spaced
// probabilities, normalized so the table spans [-1, 1] with an exact zero at
// the midpoint index.
#pragma once

#include <vector>

namespace flutesim {

struct LookupTable {
  int bits = 0;
  // Normalized quantiles, strictly increasing. values[0] == -1,
  // values[2^(b-1)-1] == 0, values[2^b-1] == 1, exactly.
  std::vector<float> values;
  // Unnormalized Gaussian quantiles.
  std::vector<float> raw_quantiles;
  float delta = 0.0f;

  int index_count() const { return 1 << bits; }
  int zero_index() const { return (1 << (bits - 1)) - 1; }
};

// Inverse standard-normal CDF. Rational approximation refined with one
// Halley step; absolute error below 1e-9 over the table's probability range
// (well below 1e-15 in practice). Antisymmetric by construction:
// inverse_normal_cdf(p) == -inverse_normal_cdf(1-p) bitwise.
// Throws DomainError unless 0 < p < 1.
double inverse_normal_cdf(double p);

// The probability margin delta = (1/30 + 1/32) / 2.
double nf_delta();

// Standard deviation of the Gaussian whose quantiles the normalized table
// represents: 1 / Phi^-1(1 - delta).
double nf_sigma();

// Probability grid for a b-bit table: 2^(b-1) evenly spaced values on
// [delta, 1/2] followed by 2^(b-1)+1 evenly spaced values on [1/2, 1-delta],
// the two grids sharing the midpoint.
std::vector<double> nf_probability_grid(int bits);

// Unnormalized quantiles of the grid above, in double precision.
std::vector<double> nf_quantiles(int bits);

// Supported bit widths: 2, 3, 4. Throws ConfigError otherwise.
LookupTable build_nf_table(int bits);

}  // namespace flutesim
