#pragma once

#include <stdexcept>
#include <string>

namespace mtfb {

/// Raised when a numerical procedure (quadrature, Lloyd iteration, root
/// bracketing) fails to reach its tolerance. The message carries the
/// diagnostics (last estimate, error estimate, iteration count).
class NumericError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Raised when an input exceeds a documented implementation limit.
class CapacityError : public std::length_error {
public:
  using std::length_error::length_error;
};

/// Raised for malformed or inconsistent experiment configuration.
class ConfigError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

} // namespace mtfb
