#pragma once

#include <stdexcept>
#include <string>

namespace fluxcal {

struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct SingularMatrixError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Correlation peak could not be fitted (flat curve, peak on the search edge, ...).
struct FitError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DeviceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct OptimizerAbort : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace fluxcal
