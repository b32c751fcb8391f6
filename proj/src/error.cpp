#include "tomloom/error.hpp"

namespace tomloom {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::ParseError: return "ParseError";
    case Errc::Io: return "IoError";
    case Errc::UnknownObject: return "UnknownObject";
    case Errc::TauOutOfRange: return "TauOutOfRange";
    case Errc::EmptyGroup: return "EmptyGroup";
    case Errc::InfeasibleParams: return "InfeasibleParams";
    case Errc::UnknownQuestion: return "UnknownQuestion";
    case Errc::EmptyProblem: return "EmptyProblem";
    case Errc::BackendError: return "BackendError";
    case Errc::AuthError: return "AuthError";
    case Errc::RateLimited: return "RateLimited";
    case Errc::Timeout: return "Timeout";
    case Errc::MalformedResponse: return "MalformedResponse";
    case Errc::ConfigError: return "ConfigError";
    case Errc::UnknownBenchmark: return "UnknownBenchmark";
    case Errc::EmptyStory: return "EmptyStory";
    case Errc::SampleTooLarge: return "SampleTooLarge";
    case Errc::PreconditionFailed: return "PreconditionFailed";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::DegenerateInput: return "DegenerateInput";
    case Errc::MissingSplits: return "MissingSplits";
    case Errc::PortInUse: return "PortInUse";
  }
  return "Unknown";
}

bool Error::is_user_error() const noexcept {
  switch (code_) {
    case Errc::BackendError:
    case Errc::MalformedResponse:
      return false;
    default:
      return true;
  }
}

}  // namespace tomloom
