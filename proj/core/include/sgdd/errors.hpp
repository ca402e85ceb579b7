#pragma once

#include <stdexcept>
#include <string>

namespace sgdd {

// Bad caller input: shape mismatches, out-of-range indices, invalid configs.
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numerical failure: singular systems, non-PSD matrices, diverged training.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed on-disk data (graphs, checkpoints, configs).
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Filesystem-level failure: missing file, unwritable path.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace sgdd
