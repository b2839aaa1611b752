#include "restlog/error.hpp"

namespace restlog {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedDocument: return "MalformedDocument";
    case ErrorCode::UnsupportedVersion: return "UnsupportedVersion";
    case ErrorCode::DuplicateOperation: return "DuplicateOperation";
    case ErrorCode::ClassifierUnavailable: return "ClassifierUnavailable";
    case ErrorCode::MissingContextField: return "MissingContextField";
    case ErrorCode::MalformedLine: return "MalformedLine";
    case ErrorCode::MissingField: return "MissingField";
    case ErrorCode::UnknownResource: return "UnknownResource";
    case ErrorCode::NoSharedResource: return "NoSharedResource";
    case ErrorCode::EmptyCorpusForOp: return "EmptyCorpusForOp";
    case ErrorCode::EmptyCorpusForParam: return "EmptyCorpusForParam";
    case ErrorCode::TargetUnreachable: return "TargetUnreachable";
    case ErrorCode::TransportError: return "TransportError";
    case ErrorCode::AuthMissing: return "AuthMissing";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

LineError::LineError(ErrorCode code, std::size_t line, const std::string& message)
    : Error(code, "line " + std::to_string(line) + ": " + message), line_(line) {}

}  // namespace restlog
