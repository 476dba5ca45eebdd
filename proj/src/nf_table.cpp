// SPDX-License-Identifier: Apache-2.0
#include "flutesim/nf_table.hpp"

#include <cmath>
#include <string>

#include "flutesim/errors.hpp"

namespace flutesim {
namespace {

// Acklam's rational approximation for the inverse normal CDF, valid on the
// upper half p in [0.5, 1).
double acklam_upper(double p) {
  static constexpr double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                  -2.759285104469687e+02, 1.383577518672690e+02,
                                  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                  -1.556989798598866e+02, 6.680131188771972e+01,
                                  -1.328068155288572e+01};
  static constexpr double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                  -2.400758277161838e+00, -2.549732539343734e+00,
                                  4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                                  2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_high = 1.0 - 0.02425;

  if (p <= p_high) {
    const double q = p - 0.5;
    const double r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  }
  const double q = std::sqrt(-2.0 * std::log(1.0 - p));
  return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
         ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
}

double halley_refine(double x, double p) {
  constexpr double sqrt2 = 1.4142135623730951;
  constexpr double sqrt_2pi = 2.5066282746310002;
  const double err = 0.5 * std::erfc(-x / sqrt2) - p;
  const double u = err * sqrt_2pi * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

}  // namespace

double inverse_normal_cdf(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw DomainError("inverse_normal_cdf: p must lie in (0,1), got " +
                      std::to_string(p));
  }
  if (p == 0.5) return 0.0;
  // Evaluate on the upper half only so that Phi^-1(p) == -Phi^-1(1-p) holds
  // bitwise.
  if (p < 0.5) return -inverse_normal_cdf(1.0 - p);
  double x = acklam_upper(p);
  x = halley_refine(x, p);
  x = halley_refine(x, p);
  return x;
}

double nf_delta() { return 0.5 * (1.0 / 30.0 + 1.0 / 32.0); }

double nf_sigma() { return 1.0 / inverse_normal_cdf(1.0 - nf_delta()); }

std::vector<double> nf_probability_grid(int bits) {
  if (bits < 2 || bits > 4) {
    throw ConfigError("NormalFloat tables support 2..4 bits, got " +
                      std::to_string(bits));
  }
  const double delta = nf_delta();
  const int half = 1 << (bits - 1);
  std::vector<double> p(static_cast<std::size_t>(1) << bits);
  p.front() = delta;
  p[half - 1] = 0.5;
  p.back() = 1.0 - delta;
  for (int i = 1; i < half - 1; ++i) {
    p[i] = delta + (0.5 - delta) * i / (half - 1);
  }
  for (int j = 1; j < half; ++j) {
    p[half - 1 + j] = 0.5 + (0.5 - delta) * j / half;
  }
  return p;
}

std::vector<double> nf_quantiles(int bits) {
  const std::vector<double> p = nf_probability_grid(bits);
  std::vector<double> q(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) q[i] = inverse_normal_cdf(p[i]);
  return q;
}

LookupTable build_nf_table(int bits) {
  const std::vector<double> q = nf_quantiles(bits);
  const double q_max = q.back();

  LookupTable t;
  t.bits = bits;
  t.delta = static_cast<float>(nf_delta());
  t.values.resize(q.size());
  t.raw_quantiles.resize(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) {
    t.raw_quantiles[i] = static_cast<float>(q[i]);
    t.values[i] = static_cast<float>(q[i] / q_max);
  }
  for (std::size_t i = 1; i < t.values.size(); ++i) {
    if (!(t.values[i - 1] < t.values[i])) {
      throw InternalError("NormalFloat table is not strictly increasing");
    }
  }
  return t;
}

}  // namespace flutesim
