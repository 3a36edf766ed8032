#pragma once

#include <stdexcept>
#include <string>

namespace dc {

// Bad input or violated precondition. CLI exit code 2.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Root finding, training divergence, precision loss. CLI exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dc
