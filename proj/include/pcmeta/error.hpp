#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pcmeta {

/// Base of every error raised by the library. `kind()` lets front ends map
/// failures onto exit codes without string matching.
class Error : public std::runtime_error {
 public:
  enum class Kind {
    dimension,
    validation,
    parse,
    contract,
    empty_input,
    capacity,
    divergence,
    capability,
    config,
    io,
  };

  Error(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  [[nodiscard]] Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& what) : Error(Kind::dimension, what) {}
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what) : Error(Kind::validation, what) {}
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(Kind::parse, what + " (line " + std::to_string(line) + ")"), line_(line) {}
  [[nodiscard]] std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ContractError : public Error {
 public:
  explicit ContractError(const std::string& what) : Error(Kind::contract, what) {}
};

class EmptyInputError : public Error {
 public:
  explicit EmptyInputError(const std::string& what) : Error(Kind::empty_input, what) {}
};

class CapacityError : public Error {
 public:
  explicit CapacityError(const std::string& what) : Error(Kind::capacity, what) {}
};

class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, std::size_t step)
      : Error(Kind::divergence, what + " at step " + std::to_string(step)), step_(step) {}
  [[nodiscard]] std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

class CapabilityError : public Error {
 public:
  explicit CapabilityError(const std::string& what) : Error(Kind::capability, what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(Kind::config, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(Kind::io, what) {}
};

}  // namespace pcmeta
