// SPDX-License-Identifier: Apache-2.0
#include "flutesim/presets.hpp"

#include "flutesim/errors.hpp"

namespace flutesim {

const std::vector<ShapePreset>& shape_presets() {
  static const std::vector<ShapePreset> presets = {
      {"llama3-8b", 4096, {6144, 4096, 28672, 14336}},
      {"llama3-70b", 8192, {10240, 8192, 57344, 28672}},
  };
  return presets;
}

const ShapePreset& find_preset(const std::string& name) {
  for (const ShapePreset& p : shape_presets()) {
    if (p.name == name) return p;
  }
  std::string known;
  for (const ShapePreset& p : shape_presets()) {
    known += (known.empty() ? "" : ", ") + p.name;
  }
  throw InputError("unknown preset '" + name + "' (known: " + known + ")");
}

}  // namespace flutesim
