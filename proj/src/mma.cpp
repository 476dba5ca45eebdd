// SPDX-License-Identifier: Apache-2.0
#include "flutesim/mma.hpp"

#include <string>

#include "flutesim/errors.hpp"

namespace flutesim {

void mma_fragment(std::span<const Half> a, std::span<const Half> b,
                  std::span<float> c, const FragDims& dims) {
  const auto m = static_cast<std::size_t>(dims.m);
  const auto n = static_cast<std::size_t>(dims.n);
  const auto k = static_cast<std::size_t>(dims.k);
  if (dims.m <= 0 || dims.n <= 0 || dims.k <= 0 || a.size() != m * k ||
      b.size() != k * n || c.size() != m * n) {
    throw ConfigError("mma_fragment: fragment shape mismatch (m=" +
                      std::to_string(dims.m) + " n=" + std::to_string(dims.n) +
                      " k=" + std::to_string(dims.k) + ")");
  }
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      float acc = c[i * n + j];
      for (std::size_t kk = 0; kk < k; ++kk) {
        acc += f16_to_f32(a[i * k + kk]) * f16_to_f32(b[kk * n + j]);
      }
      c[i * n + j] = acc;
    }
  }
}

}  // namespace flutesim
