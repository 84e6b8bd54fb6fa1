#pragma once

#include <stdexcept>
#include <string>

namespace ngse {

// Base for every error raised by the library. The CLI maps subclasses onto
// exit codes, so new error kinds should derive from the closest category.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class NotPositiveDefinite : public Error {
 public:
  using Error::Error;
};

// Data-level failures (exit code 2 in the CLI).
class DataError : public Error {
 public:
  using Error::Error;
};

class InsufficientData : public DataError {
 public:
  using DataError::DataError;
};

class ParseError : public DataError {
 public:
  ParseError(const std::string& what, std::size_t row, std::size_t column)
      : DataError(what), row_(row), column_(column) {}

  std::size_t row() const { return row_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t row_;
  std::size_t column_;
};

class EmptyData : public DataError {
 public:
  using DataError::DataError;
};

class RaggedRows : public DataError {
 public:
  using DataError::DataError;
};

class NoConvergedStart : public Error {
 public:
  using Error::Error;
};

class SingularInformation : public Error {
 public:
  using Error::Error;
};

class DegenerateSlope : public Error {
 public:
  using Error::Error;
};

}  // namespace ngse
