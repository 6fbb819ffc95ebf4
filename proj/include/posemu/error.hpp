#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace posemu {

enum class ErrorKind {
  AntipodalPoints,
  NotTangent,
  DimensionMismatch,
  NoConvergence,
  DegenerateBone,
  BadTarget,
  ReferenceMismatch,
  KindMismatch,
  InsufficientData,
  RankDeficient,
  SingularCovariance,
  LengthMismatch,
  InvalidArgument,
  FormatError,
  ConfigError,
  IoError,
};

std::string_view to_string(ErrorKind kind);

/// Every failure raised by the library. `kind()` is stable and
/// machine-readable; `what()` is "<Kind>: <detail>".
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& detail);

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorKind kind_;
  std::string detail_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& detail);

inline void require(bool condition, ErrorKind kind, const std::string& detail) {
  if (!condition) fail(kind, detail);
}

}  // namespace posemu
