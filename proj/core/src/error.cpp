#include "failopt/error.hpp"

namespace failopt {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::MissingField: return "MissingField";
    case Errc::Parse: return "ParseError";
    case Errc::Io: return "IoError";
    case Errc::BackendTimeout: return "BackendTimeout";
    case Errc::BackendRefusal: return "BackendRefusal";
    case Errc::Backend: return "BackendError";
    case Errc::CacheCorruption: return "CacheCorruption";
    case Errc::UnrecognizedPrompt: return "UnrecognizedPrompt";
    case Errc::DegenerateText: return "DegenerateText";
    case Errc::PerturbationFailure: return "PerturbationFailure";
    case Errc::DegenerateData: return "DegenerateData";
    case Errc::NonFinite: return "NonFinite";
    case Errc::SchemaMismatch: return "SchemaMismatch";
    case Errc::Transport: return "Transport";
    case Errc::ParseShortfall: return "ParseShortfall";
    case Errc::EmptyBatch: return "EmptyBatch";
    case Errc::EmptyClass: return "EmptyClass";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::OutOfRange: return "OutOfRange";
    case Errc::InsufficientData: return "InsufficientData";
    case Errc::JudgeParse: return "JudgeParseError";
    case Errc::GenerationRefusal: return "GenerationRefusal";
    case Errc::MissingHumanAnswer: return "MissingHumanAnswer";
    case Errc::VersionMismatch: return "VersionMismatch";
    case Errc::Config: return "ConfigError";
  }
  return "Unknown";
}

ErrorCategory category(Errc code) noexcept {
  switch (code) {
    case Errc::Config:
      return ErrorCategory::Config;
    case Errc::BackendTimeout:
    case Errc::BackendRefusal:
    case Errc::Backend:
    case Errc::Transport:
    case Errc::SchemaMismatch:
    case Errc::UnrecognizedPrompt:
    case Errc::CacheCorruption:
    case Errc::PerturbationFailure:
    case Errc::JudgeParse:
    case Errc::ParseShortfall:
      return ErrorCategory::Backend;
    case Errc::EmptyInput:
    case Errc::MissingField:
    case Errc::Parse:
    case Errc::Io:
    case Errc::DegenerateText:
    case Errc::DegenerateData:
    case Errc::EmptyBatch:
    case Errc::EmptyClass:
    case Errc::LengthMismatch:
    case Errc::OutOfRange:
    case Errc::InsufficientData:
    case Errc::GenerationRefusal:
    case Errc::MissingHumanAnswer:
    case Errc::VersionMismatch:
      return ErrorCategory::Data;
    case Errc::NonFinite:
      return ErrorCategory::Internal;
  }
  return ErrorCategory::Internal;
}

}  // namespace failopt
