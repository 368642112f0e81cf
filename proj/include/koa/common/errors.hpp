#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace koa {

// Root of every error the library raises; callers that only need a message catch this.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Structural problem with an input file (missing column, bad header).
class SchemaError : public Error {
 public:
  using Error::Error;
};

// A single row of an input file failed validation.
class ValidationError : public Error {
 public:
  ValidationError(std::size_t row, const std::string& what)
      : Error("row " + std::to_string(row) + ": " + what), row_(row) {}
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Tensor or image shapes that do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// NaN or infinity where a finite value is required.
class NumericError : public Error {
 public:
  using Error::Error;
};

class InfeasibleError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// A pipeline stage ran before the stage whose outputs it consumes.
class MissingArtifactError : public Error {
 public:
  using Error::Error;
};

}  // namespace koa
