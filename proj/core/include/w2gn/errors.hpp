#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace w2gn {

/// Invalid configuration, shape mismatch, or missing input.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite value produced during evaluation.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File could not be read, written, or parsed.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Optimization diverged. Carries the iteration at which it happened.
class TrainingError : public NumericError {
 public:
  TrainingError(const std::string& what, std::size_t iteration)
      : NumericError(what), iteration_(iteration) {}

  std::size_t iteration() const noexcept { return iteration_; }

 private:
  std::size_t iteration_;
};

}  // namespace w2gn
