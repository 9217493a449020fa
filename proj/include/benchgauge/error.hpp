#pragma once

#include <stdexcept>
#include <string>

namespace bg {

/// Base class for every contract failure raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input: wrong column set, value out of range, length mismatch.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// A metric whose definition needs a class that is absent from the input.
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

/// Inputs that parse but contradict each other (label conflicts, overlaps).
class IntegrityError : public Error {
 public:
  using Error::Error;
};

/// Violated operation precondition (too few subjects, bad parameters).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Load-time failure carrying the 1-based data row it refers to.
class LoadError : public SchemaError {
 public:
  LoadError(const std::string& what, std::size_t row)
      : SchemaError(what + " at row " + std::to_string(row)), row_(row) {}

  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

}  // namespace bg
