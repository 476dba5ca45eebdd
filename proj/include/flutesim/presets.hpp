// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

namespace flutesim {

// Benchmark matmul shapes modeled on the projection layers of public
// Llama-3 configurations. Config data; edit freely.
struct ShapePreset {
  std::string name;
  int k = 0;
  std::vector<int> n_list;
};

const std::vector<ShapePreset>& shape_presets();

// Throws InputError for an unknown name.
const ShapePreset& find_preset(const std::string& name);

}  // namespace flutesim
