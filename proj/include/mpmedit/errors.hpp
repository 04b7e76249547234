#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mpmedit {

// Stable numeric codes. The CLI uses these as process exit codes, so never
// renumber an existing entry.
enum class ErrorCode : int {
  Ok = 0,
  DomainError = 10,
  ShapeError = 11,
  DegenerateInput = 12,
  NonSmoothPoint = 13,
  MissingMapping = 14,
  DegenerateGeometry = 20,
  LeakDetected = 21,
  GridOverflow = 30,
  EmptyScene = 31,
  NumericalError = 32,
  ParticleEscape = 33,
  ParseError = 40,
  UnknownTarget = 41,
  ClampViolation = 42,
  IoError = 50,
  FormatError = 51,
  IntegrityError = 52,
  ConfigError = 60,
};

std::string_view error_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }
  std::string_view name() const noexcept { return error_name(code_); }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace mpmedit
