#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mpfc {

// Base of every error raised by the library. Each subclass maps to one
// failure class so callers (and the CLI exit-code logic) can dispatch on type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid parameters, stability-policy violations, malformed config files.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Snapshot header/shape/version problems and short reads.
class FormatError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class SolverError : public Error {
 public:
  using Error::Error;
};

class InputError : public Error {
 public:
  using Error::Error;
};

class ScenarioError : public Error {
 public:
  using Error::Error;
};

class ProjectionError : public Error {
 public:
  ProjectionError(const std::string& what, std::size_t cell)
      : Error(what + " (cell " + std::to_string(cell) + ")"), cell_(cell) {}
  std::size_t cell() const noexcept { return cell_; }

 private:
  std::size_t cell_;
};

class DegenerateDenominatorError : public Error {
 public:
  explicit DegenerateDenominatorError(std::size_t cell)
      : Error("multiplier denominator vanished at cell " + std::to_string(cell)),
        cell_(cell) {}
  std::size_t cell() const noexcept { return cell_; }

 private:
  std::size_t cell_;
};

class BlowUpError : public Error {
 public:
  explicit BlowUpError(long step)
      : Error("non-finite value after step " + std::to_string(step)), step_(step) {}
  long step() const noexcept { return step_; }

 private:
  long step_;
};

}  // namespace mpfc
