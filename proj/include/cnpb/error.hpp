#pragma once

#include <stdexcept>
#include <string>

namespace cnpb {

// Rejected parameters: non-positive strengths, malformed grids, bad potentials.
struct InvalidParameter : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// A time or grid request falls outside the stored window of a path or grid.
struct WindowError : std::out_of_range {
  using std::out_of_range::out_of_range;
};

// Blow-up, mass leakage, CFL violation, non-convergence.
struct NumericalFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed run configuration; the message names the offending field.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace cnpb
