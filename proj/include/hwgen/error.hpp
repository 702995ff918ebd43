#pragma once

#include <stdexcept>
#include <string>

namespace hwgen {

// Base for every error raised by the library. The CLI maps the subclasses
// onto distinct exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor shapes or arities do not satisfy an operation's contract.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf produced where finite values are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

// A CTC target cannot be aligned to the available number of frames.
class InfeasibleTarget : public Error {
 public:
  using Error::Error;
};

// Bad input data: malformed files, split leakage, unknown symbols.
class DataError : public Error {
 public:
  using Error::Error;
};

// Invalid request from the caller (bad flag, unknown config key, ...).
class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace hwgen
