#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace specguard {

enum class ErrorKind {
  Format,
  Unsupported,
  Domain,
  Size,
  Shape,
  Decomposition,
  Training,
  State,
  DegenerateModel,
  Io,
  Config,
};

std::string_view to_string(ErrorKind kind);

/// Single exception type for the library; `kind()` lets callers map failures
/// to exit codes without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) fail(kind, message);
}

}  // namespace specguard
