#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace graphident {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A value violates a documented type invariant (asymmetric W, negative weight, ...).
struct InvariantError : Error {
  using Error::Error;
};

struct DimensionError : Error {
  using Error::Error;
};

struct DomainError : Error {
  using Error::Error;
};

/// NaN/Inf appeared inside an iterative routine.
struct NumericalError : Error {
  NumericalError(const std::string& what, long iteration)
      : Error(what + " (iteration " + std::to_string(iteration) + ")"), iteration(iteration) {}
  long iteration;
};

struct OracleError : Error {
  using Error::Error;
};

/// Configuration failed validation; `field` names the offending key.
struct ConfigError : Error {
  ConfigError(std::string field, const std::string& message)
      : Error(field + ": " + message), field(std::move(field)) {}
  std::string field;
};

struct IoError : Error {
  using Error::Error;
};

/// Malformed file content; `offset` is the byte position where parsing failed.
struct SchemaError : IoError {
  SchemaError(const std::string& message, std::size_t offset)
      : IoError(message + " at byte offset " + std::to_string(offset)), offset(offset) {}
  std::size_t offset;
};

struct UnsupportedVersionError : IoError {
  using IoError::IoError;
};

}  // namespace graphident
