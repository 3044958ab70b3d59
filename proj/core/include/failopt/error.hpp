#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace failopt {

/// Every failure the library raises carries one of these codes.
enum class Errc {
  EmptyInput,
  MissingField,
  Parse,
  Io,
  BackendTimeout,
  BackendRefusal,
  Backend,
  CacheCorruption,
  UnrecognizedPrompt,
  DegenerateText,
  PerturbationFailure,
  DegenerateData,
  NonFinite,
  SchemaMismatch,
  Transport,
  ParseShortfall,
  EmptyBatch,
  EmptyClass,
  LengthMismatch,
  OutOfRange,
  InsufficientData,
  JudgeParse,
  GenerationRefusal,
  MissingHumanAnswer,
  VersionMismatch,
  Config,
};

/// Coarse grouping used by the CLI to pick an exit status.
enum class ErrorCategory { Config, Data, Backend, Internal };

std::string_view to_string(Errc code) noexcept;
ErrorCategory category(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

/// Malformed input at a known line (1-based).
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& message)
      : Error(Errc::Parse, "line " + std::to_string(line) + ": " + message),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace failopt
