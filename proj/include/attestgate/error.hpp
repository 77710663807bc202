#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace attestgate {

enum class Errc {
  ParseError,
  DuplicateComponentName,
  KeyFormat,
  UnknownSigner,
  DigestMismatch,
  BadSignature,
  MalformedGraph,
  ProfileMismatch,
  UnknownAlgorithm,
  BadParameters,
  StorageFailure,
  CorruptStore,
  BindFailure,
  EmptyBundle,
  EmptyLog,
  NotBooted,
  NonceMismatch,
  UnknownDevice,
  LogPcrMismatch,
  MalformedChallenge,
  OutOfBand,
  Io,
  Protocol,
  ScenarioParseError,
  ExpectationFailure,
};

constexpr std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::ParseError: return "ParseError";
    case Errc::DuplicateComponentName: return "DuplicateComponentName";
    case Errc::KeyFormat: return "KeyFormat";
    case Errc::UnknownSigner: return "UnknownSigner";
    case Errc::DigestMismatch: return "DigestMismatch";
    case Errc::BadSignature: return "BadSignature";
    case Errc::MalformedGraph: return "MalformedGraph";
    case Errc::ProfileMismatch: return "ProfileMismatch";
    case Errc::UnknownAlgorithm: return "UnknownAlgorithm";
    case Errc::BadParameters: return "BadParameters";
    case Errc::StorageFailure: return "StorageFailure";
    case Errc::CorruptStore: return "CorruptStore";
    case Errc::BindFailure: return "BindFailure";
    case Errc::EmptyBundle: return "EmptyBundle";
    case Errc::EmptyLog: return "EmptyLog";
    case Errc::NotBooted: return "NotBooted";
    case Errc::NonceMismatch: return "NonceMismatch";
    case Errc::UnknownDevice: return "UnknownDevice";
    case Errc::LogPcrMismatch: return "LogPcrMismatch";
    case Errc::MalformedChallenge: return "MalformedChallenge";
    case Errc::OutOfBand: return "OutOfBand";
    case Errc::Io: return "Io";
    case Errc::Protocol: return "Protocol";
    case Errc::ScenarioParseError: return "ScenarioParseError";
    case Errc::ExpectationFailure: return "ExpectationFailure";
  }
  return "Unknown";
}

/// Every fallible operation in the library throws this; `code()` is the
/// machine-readable category reported on the CLI and over the wire.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& detail)
      : std::runtime_error(detail), code_(code) {}

  Errc code() const noexcept { return code_; }
  std::string_view name() const noexcept { return to_string(code_); }

 private:
  Errc code_;
};

}  // namespace attestgate
