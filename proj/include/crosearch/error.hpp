#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace crosearch {

/// Closed set of failure kinds raised across the library. The CLI maps these
/// onto process exit codes, so new kinds must be added there as well.
enum class ErrorKind {
  // corpus / registry
  DuplicateId,
  LanguageMismatch,
  EmptyQuery,
  UnknownLanguage,
  // protocol
  EmptyEvidence,
  // backends
  BackendUnavailable,
  ScenarioExhausted,
  MissingLexicon,
  // knowledge integration
  NoEvidence,
  // metrics
  EmptyGolds,
  // policy / trainer
  DimensionMismatch,
  GroupTooSmall,
  EmptyTokenSet,
  NonFiniteLoss,
  // harness / io
  SchemaError,
  SpecError,
  ConfigError,
  Io,
};

constexpr std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::DuplicateId: return "DuplicateId";
    case ErrorKind::LanguageMismatch: return "LanguageMismatch";
    case ErrorKind::EmptyQuery: return "EmptyQuery";
    case ErrorKind::UnknownLanguage: return "UnknownLanguage";
    case ErrorKind::EmptyEvidence: return "EmptyEvidence";
    case ErrorKind::BackendUnavailable: return "BackendUnavailable";
    case ErrorKind::ScenarioExhausted: return "ScenarioExhausted";
    case ErrorKind::MissingLexicon: return "MissingLexicon";
    case ErrorKind::NoEvidence: return "NoEvidence";
    case ErrorKind::EmptyGolds: return "EmptyGolds";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::GroupTooSmall: return "GroupTooSmall";
    case ErrorKind::EmptyTokenSet: return "EmptyTokenSet";
    case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorKind::SchemaError: return "SchemaError";
    case ErrorKind::SpecError: return "SpecError";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Schema error with the 1-based line number of the offending input record.
class SchemaError : public Error {
 public:
  SchemaError(std::string source, std::size_t line, const std::string& message)
      : Error(ErrorKind::SchemaError, source + ":" + std::to_string(line) + ": " + message),
        source_(std::move(source)),
        line_(line) {}

  const std::string& source() const noexcept { return source_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string source_;
  std::size_t line_;
};

}  // namespace crosearch
