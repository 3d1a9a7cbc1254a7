#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fakegan {

// Contract violations (bad arguments, preconditions). CLI exit status 1.
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DimensionError : public ContractError {
 public:
  using ContractError::ContractError;
};

class NumericDomainError : public ContractError {
 public:
  using ContractError::ContractError;
};

class LookupError : public ContractError {
 public:
  using ContractError::ContractError;
};

class EmptyInputError : public ContractError {
 public:
  using ContractError::ContractError;
};

class EmptyCorpusError : public ContractError {
 public:
  using ContractError::ContractError;
};

class SequenceExhaustedError : public ContractError {
 public:
  using ContractError::ContractError;
};

class InfiniteLossError : public NumericDomainError {
 public:
  using NumericDomainError::NumericDomainError;
};

// Raised when a loss turns non-finite mid-training.
class TrainingDivergedError : public std::runtime_error {
 public:
  TrainingDivergedError(std::string phase, std::size_t step)
      : std::runtime_error("training diverged in phase '" + phase + "' at step " +
                           std::to_string(step)),
        phase_(std::move(phase)),
        step_(step) {}

  const std::string& phase() const noexcept { return phase_; }
  std::size_t step() const noexcept { return step_; }

 private:
  std::string phase_;
  std::size_t step_;
};

// Filesystem problems. CLI exit status 2.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FormatError : public IoError {
 public:
  using IoError::IoError;
};

class LayoutError : public IoError {
 public:
  using IoError::IoError;
};

}  // namespace fakegan
