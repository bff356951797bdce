#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace bilevel {

// Common base so callers can catch everything the toolkit reports.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Precondition violation (bad dimension, invalid spectrum, wrong mode, ...).
class InvalidArgumentError : public Error {
 public:
  using Error::Error;
};

// An operation produced or encountered a non-finite value.
class NumericDomainError : public Error {
 public:
  using Error::Error;
};

// Capability-gated operation invoked on an oracle that lacks the capability.
class UnsupportedOperationError : public Error {
 public:
  using Error::Error;
};

// Malformed input file; message carries the offending line number.
class FormatError : public Error {
 public:
  using Error::Error;
};

// An optimizer iterate left the finite regime; carries the step index.
class DivergenceError : public Error {
 public:
  DivergenceError(std::int64_t step, const std::string& what)
      : Error("divergence at step " + std::to_string(step) + ": " + what),
        step_(step) {}

  std::int64_t step() const { return step_; }

 private:
  std::int64_t step_;
};

}  // namespace bilevel
