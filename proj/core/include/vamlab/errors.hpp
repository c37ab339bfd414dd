#pragma once

#include <stdexcept>
#include <string>

namespace vamlab {

/// Invalid shapes, malformed specs, bad config files, out-of-range options.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Non-finite values, singular systems, log-domain underflow.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace vamlab
