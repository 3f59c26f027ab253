#pragma once

#include <stdexcept>
#include <string>

namespace pcm {

/// Bad input: a precondition on a parameter was violated.
/// The CLI maps this to exit code 1.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical procedure failed (non-convergence, loss of definiteness,
/// insufficient statistics). The CLI maps this to exit code 2.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace pcm
