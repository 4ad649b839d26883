#pragma once

#include <stdexcept>
#include <string>

namespace lqe {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input violates a documented precondition or type invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// CSV header is missing a required column.
class SchemaError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// A data row could not be parsed. Carries the 1-based line number.
class ParseError : public ValidationError {
 public:
  ParseError(std::size_t line, const std::string& what)
      : ValidationError("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Model stream has a bad magic tag, an unsupported version, or is truncated.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Optimisation produced a non-finite value.
class TrainingError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace lqe
