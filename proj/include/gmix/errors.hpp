#pragma once

#include <stdexcept>

namespace gmix {

/// Base class of every error thrown by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input violates a model invariant (weights, dimensions, definiteness, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Malformed or version-incompatible document / expression text.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Numeric breakdown: evidence underflow, singular or ill-conditioned matrix.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Filesystem failure while reading or writing artifacts.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace gmix
