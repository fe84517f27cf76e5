#pragma once

#include <stdexcept>
#include <string>

namespace percweb {

enum class ErrorCode {
  InvalidSite,
  InvalidArgument,
  ScanLimitExceeded,
  InsufficientData,
  DegenerateSample,
  BoxTooNarrow,
  NoPath,
  PreconditionNotMet,
};

inline const char* to_string(ErrorCode c) {
  switch (c) {
    case ErrorCode::InvalidSite: return "InvalidSite";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ScanLimitExceeded: return "ScanLimitExceeded";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::DegenerateSample: return "DegenerateSample";
    case ErrorCode::BoxTooNarrow: return "BoxTooNarrow";
    case ErrorCode::NoPath: return "NoPath";
    case ErrorCode::PreconditionNotMet: return "PreconditionNotMet";
  }
  return "Unknown";
}

/// Base of every exception thrown by the library. The code lets callers
/// (the CLI in particular) map failures to exit statuses without string
/// matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), detail_(what) {}

  ErrorCode code() const noexcept { return code_; }
  /// Message without the code prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, ErrorCode code, const char* what) {
  if (!cond) fail(code, what);
}

}  // namespace percweb
