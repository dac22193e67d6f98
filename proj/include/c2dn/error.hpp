#pragma once

#include <stdexcept>
#include <string>

namespace c2dn {

/// Broad error category. Each maps to one C API status code and one CLI
/// message prefix.
enum class ErrorCode {
  Config,    // invalid configuration or argument value
  Format,    // malformed file contents
  Shape,     // incompatible dimensions
  Numeric,   // degenerate or non-finite numerical condition
  Io,        // file system failure
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Format errors carry a finer-grained reason so callers can tell a foreign
/// file from a damaged one.
enum class FormatIssue { BadMagic, VersionMismatch, Truncated, Malformed };

class FormatError : public Error {
 public:
  FormatError(FormatIssue issue, const std::string& what)
      : Error(ErrorCode::Format, what), issue_(issue) {}

  FormatIssue issue() const noexcept { return issue_; }

 private:
  FormatIssue issue_;
};

[[noreturn]] inline void throw_config(const std::string& msg) {
  throw Error(ErrorCode::Config, msg);
}
[[noreturn]] inline void throw_shape(const std::string& msg) {
  throw Error(ErrorCode::Shape, msg);
}
[[noreturn]] inline void throw_numeric(const std::string& msg) {
  throw Error(ErrorCode::Numeric, msg);
}
[[noreturn]] inline void throw_io(const std::string& msg) {
  throw Error(ErrorCode::Io, msg);
}

}  // namespace c2dn
