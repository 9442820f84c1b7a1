#pragma once

#include <stdexcept>
#include <string>

namespace ics {

/// Malformed or inconsistent input (files, flags, parameter/spec mismatch).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A computation produced a non-finite or otherwise unusable result.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ics
