// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

#include "flutesim/half.hpp"

namespace flutesim {

// Dense row-major matrix.
template <class T>
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<T> data;

  Matrix() = default;
  Matrix(int r, int c, T fill = T{})
      : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, fill) {}

  T& operator()(int i, int j) {
    return data[static_cast<std::size_t>(i) * cols + j];
  }
  const T& operator()(int i, int j) const {
    return data[static_cast<std::size_t>(i) * cols + j];
  }
  std::size_t size() const { return data.size(); }
};

using MatF = Matrix<float>;
using MatD = Matrix<double>;
using MatH = Matrix<Half>;

}  // namespace flutesim
