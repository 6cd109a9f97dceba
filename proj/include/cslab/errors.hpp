#pragma once

#include <stdexcept>
#include <string>

namespace cslab {

// Bad arguments, shape mismatches, out-of-range labels.
struct InvalidInputError : std::runtime_error {
  explicit InvalidInputError(const std::string& msg) : std::runtime_error(msg) {}
};

// File parsing and serialization problems (IDX, weight files, reports).
struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite loss during training; carries the epoch where it happened.
struct TrainingFailure : std::runtime_error {
  int epoch;
  TrainingFailure(int epoch_, const std::string& msg)
      : std::runtime_error(msg), epoch(epoch_) {}
};

// Bad run configuration (unknown keys, unknown attack/defense names).
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Raised by the oracle when an attack tries to query past its budget.
// Attacks catch this (or check beforehand) and terminate.
struct BudgetExhausted : std::runtime_error {
  BudgetExhausted() : std::runtime_error("query budget exhausted") {}
};

}  // namespace cslab
