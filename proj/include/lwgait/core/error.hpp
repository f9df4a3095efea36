#pragma once

#include <stdexcept>
#include <string>

namespace lwgait {

// Error codes surfaced by the CLI as machine-readable JSON on stderr.
enum class ErrorCode {
  invalid_tap,
  dimension,
  format,
  integrity,
  configuration,
  plan,
  dataset_too_small,
  empty_sequence,
  undefined_triplets,
  label,
  schedule,
  numeric,
  protocol,
  parameter,
  version,
  io,
};

inline const char* error_code_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::invalid_tap: return "invalid_tap";
    case ErrorCode::dimension: return "dimension";
    case ErrorCode::format: return "format";
    case ErrorCode::integrity: return "integrity";
    case ErrorCode::configuration: return "configuration";
    case ErrorCode::plan: return "plan";
    case ErrorCode::dataset_too_small: return "dataset_too_small";
    case ErrorCode::empty_sequence: return "empty_sequence";
    case ErrorCode::undefined_triplets: return "undefined_triplets";
    case ErrorCode::label: return "label";
    case ErrorCode::schedule: return "schedule";
    case ErrorCode::numeric: return "numeric";
    case ErrorCode::protocol: return "protocol";
    case ErrorCode::parameter: return "parameter";
    case ErrorCode::version: return "version";
    case ErrorCode::io: return "io";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}
  ErrorCode code() const { return code_; }
  const char* code_name() const { return error_code_name(code_); }

 private:
  ErrorCode code_;
};

inline void require(bool cond, ErrorCode code, const std::string& message) {
  if (!cond) throw Error(code, message);
}

}  // namespace lwgait
