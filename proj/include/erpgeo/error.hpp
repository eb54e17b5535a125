#pragma once

#include <stdexcept>
#include <string>

namespace erpgeo {

// Base of every exception raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Inputs violate an operation's preconditions (shape mismatch, degenerate
// geometry, no consensus, ...). The CLI maps these to exit code 1.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Filesystem or codec failure. Messages carry the offending path.
// The CLI maps these to exit code 2.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace erpgeo
