#pragma once

#include <stdexcept>
#include <string>

namespace mup {

// Precondition violated by the caller (bad shapes, out-of-range hyperparameters).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A computation produced a non-finite value or failed to converge hard enough
// that no usable result exists.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed configuration text or an inconsistent experiment description.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// File system failures; the message always names the path.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mup
