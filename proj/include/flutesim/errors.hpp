// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace flutesim {

// Invalid static configuration: unsupported bit width, bad tiling, dims that
// do not divide.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad runtime input: non-finite weights, mismatched file sizes, out-of-range
// arguments.
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Argument outside a mathematical domain (e.g. a probability not in (0,1)).
struct DomainError : InputError {
  using InputError::InputError;
};

// A violated internal invariant; indicates a bug, not bad input.
struct InternalError : std::logic_error {
  using std::logic_error::logic_error;
};

// Gradient-descent divergence; carries the step at which the loss went
// non-finite.
struct OptimizationError : std::runtime_error {
  int step;
  OptimizationError(const std::string& what, int step_idx)
      : std::runtime_error(what + " (step " + std::to_string(step_idx) + ")"),
        step(step_idx) {}
};

// Malformed serialized data; carries the failing section and byte offset.
struct ParseError : InputError {
  std::string section;
  std::size_t offset;
  ParseError(const std::string& what, std::string sec, std::size_t off)
      : InputError(what + " [section '" + sec + "' at byte offset " +
                   std::to_string(off) + "]"),
        section(std::move(sec)),
        offset(off) {}
};

}  // namespace flutesim
