#pragma once

#include <stdexcept>
#include <string>

namespace melmix {

/// Precondition violated by an argument value (bad shape, non-positive sigma, ...).
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Invalid configuration (STFT/mel parameters, synthetic spec, CLI flags).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed file contents: bad magic, truncated payload, unsupported encoding.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Audio shorter than the analysis window.
class LengthError : public std::length_error {
 public:
  using std::length_error::length_error;
};

/// Optimisation produced a non-finite loss.
class TrainingError : public std::runtime_error {
 public:
  TrainingError(const std::string& what, long last_finite_step)
      : std::runtime_error(what), last_finite_step_(last_finite_step) {}

  long last_finite_step() const noexcept { return last_finite_step_; }

 private:
  long last_finite_step_;
};

}  // namespace melmix
