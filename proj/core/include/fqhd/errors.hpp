#pragma once

#include <stdexcept>
#include <string>

namespace fqhd {

/// Base class for every failure raised by the solver suite.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of a closed form (n <= 0, s <= 0, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Sample sequences whose lengths do not match the grid or each other.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// The current-voltage quadratic has no real root: the data leave the subsonic regime.
class SupersonicRegime : public Error {
 public:
  using Error::Error;
};

class IterationLimit : public Error {
 public:
  using Error::Error;
};

/// The a-priori box of the theory is violated (truncation active, delta too large).
class OutOfRegime : public Error {
 public:
  using Error::Error;
};

class LinearSolveFailure : public Error {
 public:
  using Error::Error;
};

/// Density collapsed below the vacuum guard during time stepping.
class Vacuum : public Error {
 public:
  using Error::Error;
};

/// Invalid experiment configuration. `field()` names the offending key path.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error(field.empty() ? what : field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Malformed JSON text; carries 1-based line and column of the failure.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, std::size_t column, const std::string& what)
      : Error("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + what),
        line_(line),
        column_(column) {}
  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

}  // namespace fqhd
