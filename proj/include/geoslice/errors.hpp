#pragma once

#include <stdexcept>
#include <string>

namespace geoslice {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A bound formula was evaluated outside the hyperparameter range where it holds.
class BoundInapplicable : public Error {
 public:
  using Error::Error;
};

/// Stepping-out with m = inf ran past its expansion cap; the geodesic level
/// set is effectively unbounded.
class ExpansionCapExceeded : public Error {
 public:
  using Error::Error;
};

class ShrinkCapExceeded : public Error {
 public:
  using Error::Error;
};

class RngFailure : public Error {
 public:
  using Error::Error;
};

class Unsupported : public Error {
 public:
  using Error::Error;
};

class InsufficientData : public Error {
 public:
  using Error::Error;
};

}  // namespace geoslice
