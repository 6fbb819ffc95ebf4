#include "posemu/error.hpp"

namespace posemu {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::AntipodalPoints: return "AntipodalPoints";
    case ErrorKind::NotTangent: return "NotTangent";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::DegenerateBone: return "DegenerateBone";
    case ErrorKind::BadTarget: return "BadTarget";
    case ErrorKind::ReferenceMismatch: return "ReferenceMismatch";
    case ErrorKind::KindMismatch: return "KindMismatch";
    case ErrorKind::InsufficientData: return "InsufficientData";
    case ErrorKind::RankDeficient: return "RankDeficient";
    case ErrorKind::SingularCovariance: return "SingularCovariance";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::FormatError: return "FormatError";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& detail)
    : std::runtime_error(std::string(to_string(kind)) + ": " + detail),
      kind_(kind),
      detail_(detail) {}

void fail(ErrorKind kind, const std::string& detail) { throw Error(kind, detail); }

}  // namespace posemu
