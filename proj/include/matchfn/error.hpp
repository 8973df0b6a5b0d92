#pragma once

#include <stdexcept>
#include <string>

namespace matchfn {

/// Malformed or invalid user input (CSV, config, DGP spec). Maps to exit code 2.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A kernel query fell outside the support of the observed (U, V) cloud.
class SupportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Estimation ran but too many observations were clamped to be trusted. Maps to exit code 3.
class DegradedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical routine failed to converge.
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace matchfn
