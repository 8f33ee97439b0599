#pragma once

#include <stdexcept>
#include <string>

namespace minerwatch {

/// Failure categories. The CLI maps each onto a stable exit code.
enum class ErrorKind {
  invalid_argument,
  io,
  format,
  counters_unavailable,
  process_gone,
  training,
  model_mismatch,
  internal,
};

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

}  // namespace minerwatch
