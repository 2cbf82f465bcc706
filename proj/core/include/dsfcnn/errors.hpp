#pragma once

#include <stdexcept>
#include <string>

namespace dsf {

/// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Tensor/layer dimension mismatch.
struct ShapeError : Error {
  using Error::Error;
};

/// Argument outside an operation's stated domain.
struct InvalidArgument : Error {
  using Error::Error;
};

/// Operation called in the wrong order (e.g. eval-mode batch norm before
/// any training step, backward before forward).
struct StateError : Error {
  using Error::Error;
};

/// Malformed external bytes: IDX headers, checkpoints, PGM targets.
struct FormatError : Error {
  using Error::Error;
};

/// Bad run configuration (unknown key, unparsable value, missing file path).
struct ConfigError : Error {
  using Error::Error;
};

/// Dataset-level inconsistency (image/label count mismatch, missing files).
struct DataError : Error {
  using Error::Error;
};

/// Non-finite values where finite ones are required (NaN loss).
struct NumericError : Error {
  using Error::Error;
};

}  // namespace dsf
