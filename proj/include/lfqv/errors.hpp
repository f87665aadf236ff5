#pragma once

#include <stdexcept>
#include <string>

namespace lfqv {

// Operand shapes are incompatible (rank, extent, or channel mismatch).
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A structural constraint on a tensor extent is violated (e.g. frame count,
// divisibility by a stride or block size).
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A scalar argument lies outside the valid domain (token index, bit width).
class DomainError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Caller broke an API contract (non-scalar loss, missing gradient, ...).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Malformed file or stream. The message names the offending field.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite value encountered during training.
class TrainingFault : public std::runtime_error {
 public:
  TrainingFault(const std::string& component, const std::string& what)
      : std::runtime_error(component + ": " + what), component_(component) {}

  const std::string& component() const { return component_; }

 private:
  std::string component_;
};

}  // namespace lfqv
