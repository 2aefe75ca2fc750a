// SPDX-FileCopyrightText: 2026 pdo authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace pdo {

/// Root of the library's exception hierarchy.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inconsistent or out-of-range configuration, detected before any work starts.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Input data violates a documented precondition (ranges, shapes, split invariants).
class ValidationError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// On-disk content disagrees with its declared shape.
class CorruptionError : public IoError {
 public:
  using IoError::IoError;
};

/// A numerical procedure failed to converge or produced non-finite values.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// A simulator left the admissible state space.
class SimulationError : public NumericalError {
 public:
  SimulationError(const std::string& what, long step)
      : NumericalError(what + " (step " + std::to_string(step) + ")"), step_(step) {}

  long step() const noexcept { return step_; }

 private:
  long step_;
};

}  // namespace pdo
