#pragma once

#include <stdexcept>
#include <string>

namespace tvr {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad arguments or shapes handed to an operation.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Malformed, truncated or invalid dataset / checkpoint content.
class DataError : public Error {
 public:
  using Error::Error;
};

// Non-finite objective, divergent sampling chain, degenerate geometry.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace tvr
