#pragma once

#include <stdexcept>
#include <string>

namespace drnn {

// Bad shapes, ids or arguments supplied by the caller.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed input data: unreadable files, corrupt containers, broken stream frames.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FramingError : public DataError {
 public:
  using DataError::DataError;
};

// Training produced a non-finite loss or gradient.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, std::size_t step)
      : std::runtime_error(what), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

}  // namespace drnn
