#pragma once

#include <stdexcept>
#include <string>

namespace c2g {

// Bad input: malformed files, out-of-domain arguments, violated preconditions.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A numerical routine could not produce a result for valid input.
class EstimatorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace c2g
