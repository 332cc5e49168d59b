#pragma once

#include <stdexcept>
#include <string>

namespace mcpa {

enum class ErrorCode {
  MalformedInput,
  UnsupportedFormat,
  UnknownFormat,
  EmptyWindow,
  InsufficientBaseline,
  MissingShapedRuns,
  UnknownDomain,
  InvalidConfig,
  Internal,
};

inline const char* to_string(ErrorCode c) {
  switch (c) {
    case ErrorCode::MalformedInput: return "MALFORMED_INPUT";
    case ErrorCode::UnsupportedFormat: return "UNSUPPORTED_FORMAT";
    case ErrorCode::UnknownFormat: return "UNKNOWN_FORMAT";
    case ErrorCode::EmptyWindow: return "EMPTY_WINDOW";
    case ErrorCode::InsufficientBaseline: return "INSUFFICIENT_BASELINE";
    case ErrorCode::MissingShapedRuns: return "MISSING_SHAPED_RUNS";
    case ErrorCode::UnknownDomain: return "UNKNOWN_DOMAIN";
    case ErrorCode::InvalidConfig: return "INVALID_CONFIG";
    case ErrorCode::Internal: return "INTERNAL";
  }
  return "UNKNOWN";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace mcpa
