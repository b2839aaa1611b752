#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace restlog {

enum class ErrorCode {
  MalformedDocument,
  UnsupportedVersion,
  DuplicateOperation,
  ClassifierUnavailable,
  MissingContextField,
  MalformedLine,
  MissingField,
  UnknownResource,
  NoSharedResource,
  EmptyCorpusForOp,
  EmptyCorpusForParam,
  TargetUnreachable,
  TransportError,
  AuthMissing,
  IoError,
  InvalidConfig,
};

std::string_view to_string(ErrorCode code);

// Every failure the library reports carries one of the codes above so
// callers (and the CLI exit-code mapping) can branch without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Raised by the log parsers; `line()` is 1-based within the source file.
class LineError : public Error {
 public:
  LineError(ErrorCode code, std::size_t line, const std::string& message);

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace restlog
