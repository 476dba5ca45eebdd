// SPDX-License-Identifier: Apache-2.0
//
// Simulated matrix-multiply-accumulate on register fragments. Operands are
// binary16, every product is formed in binary32 and summed into the binary32
// accumulator in ascending-k order, so results are bitwise reproducible
// regardless of threading.
#pragma once

#include <span>

#include "flutesim/half.hpp"

namespace flutesim {

struct FragDims {
  int m = 16;
  int n = 8;
  int k = 16;
};

// c[m][n] += sum over k of widen(a[m][k]) * widen(b[k][n]).
// a is m*k, b is k*n, c is m*n, all row-major and contiguous.
void mma_fragment(std::span<const Half> a, std::span<const Half> b,
                  std::span<float> c, const FragDims& dims);

}  // namespace flutesim
