// errors.hpp — exception hierarchy shared by the pipeline modules.
//
// Every contract-level failure has its own type so callers can map it to
// an exit code or a recovery path without string matching.

#pragma once

#include <stdexcept>
#include <string>

namespace scbu {

// Base for all pipeline errors. Data-shaped failures derive from DataError,
// transport/backend failures from BackendError.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class DataError : public Error {
 public:
  using Error::Error;
};

// Log record fails the schema (missing field, out-of-range value).
class SchemaError : public DataError {
 public:
  using DataError::DataError;
};

// Manifest-level inconsistency (paradigm intervals, instruction codes).
class ManifestError : public DataError {
 public:
  using DataError::DataError;
};

// The child never appears in the log.
class NoChildError : public DataError {
 public:
  using DataError::DataError;
};

// Valence series too short to differentiate.
class TooShortError : public DataError {
 public:
  using DataError::DataError;
};

// No template registered for a (paradigm, response index) pair.
class TemplateError : public DataError {
 public:
  using DataError::DataError;
};

// Rendered prompt exceeds the backend context budget.
class ContextOverflow : public DataError {
 public:
  ContextOverflow(std::size_t required, std::size_t available)
      : DataError("prompt overflows context budget: required " +
                  std::to_string(required) + " chars, available " +
                  std::to_string(available)),
        required_chars(required),
        available_chars(available) {}

  std::size_t required_chars;
  std::size_t available_chars;
};

// Neither label token found in a model answer.
class UnparseableVerdict : public DataError {
 public:
  using DataError::DataError;
};

// Transport or protocol failure talking to a model backend.
class BackendError : public Error {
 public:
  using Error::Error;
};

// External describer unreachable; the pipeline downgrades to no-emotion mode.
class DescriberUnavailable : public BackendError {
 public:
  using BackendError::BackendError;
};

// Every voter abstained (or every agent dropped out).
class NoQuorum : public Error {
 public:
  using Error::Error;
};

// A class has too few cases for the requested stratified split.
class InsufficientClass : public DataError {
 public:
  using DataError::DataError;
};

// Bad run configuration (unknown key, missing path, invalid value).
class ConfigError : public DataError {
 public:
  using DataError::DataError;
};

}  // namespace scbu
