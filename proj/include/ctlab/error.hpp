#pragma once

#include <stdexcept>
#include <string>

namespace ctlab {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input violates a documented invariant (label exclusivity, duplicate id, bad shape...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file. Carries the 1-based row number when one applies.
class ParseError : public ValidationError {
 public:
  ParseError(const std::string& what, long row = -1)
      : ValidationError(row >= 0 ? "row " + std::to_string(row) + ": " + what : what), row_(row) {}
  long row() const noexcept { return row_; }

 private:
  long row_;
};

/// Unresolvable configuration: unknown tokenizer/encoder id, bad config value, missing path.
class ConfigError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class EmptyInputError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Operation not permitted in the object's current state.
class StateError : public Error {
 public:
  using Error::Error;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

class AuthorizationError : public Error {
 public:
  using Error::Error;
};

class SessionCapError : public StateError {
 public:
  using StateError::StateError;
};

/// Test-split rows reached a component that must only see validation data.
class LeakageError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace ctlab
