#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tomloom {

enum class Errc {
  InvalidArgument,
  ParseError,
  Io,
  // complexity
  UnknownObject,
  TauOutOfRange,
  EmptyGroup,
  // world oracle
  InfeasibleParams,
  UnknownQuestion,
  // strategies / gateway
  EmptyProblem,
  BackendError,
  AuthError,
  RateLimited,
  Timeout,
  MalformedResponse,
  ConfigError,
  // ingest
  UnknownBenchmark,
  EmptyStory,
  SampleTooLarge,
  // metrics / harness
  PreconditionFailed,
  EmptyInput,
  DegenerateInput,
  MissingSplits,
  PortInUse,
};

std::string_view to_string(Errc code) noexcept;

/// Every failure raised by the library. `code()` identifies the failure class;
/// `is_user_error()` separates bad input/configuration from internal faults.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  Errc code() const noexcept { return code_; }
  bool is_user_error() const noexcept;

 private:
  Errc code_;
};

}  // namespace tomloom
