// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace flutesim {

// Command-line driver. Exit codes: 0 ok, 1 usage, 2 input error,
// 3 numerical/optimization error. CSV output goes to `out` (stdout in the
// binary; capturable in tests). The FLUTE_SIM_SEED environment variable
// fixes every randomized path.
int run_cli(const std::vector<std::string>& args, std::ostream& out);

}  // namespace flutesim
