// SPDX-License-Identifier: Apache-2.0
//
// Headerless raw matrix interchange: little-endian, row-major, dims passed
// out of band.
#pragma once

#include <string>

#include "flutesim/matrix.hpp"

namespace flutesim {

MatF read_f32_raw(const std::string& path, int rows, int cols);
MatH read_f16_raw(const std::string& path, int rows, int cols);
void write_f32_raw(const std::string& path, const MatF& m);
void write_f16_raw(const std::string& path, const MatH& m);

}  // namespace flutesim
