#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bleloc {

enum class ErrorCode {
  // model
  ParseError,
  InvalidChannel,
  InvalidSample,
  NonMonotonicTimestamp,
  IoError,
  // codec
  FrameTooShort,
  FrameTooLong,
  UnknownProtocol,
  MalformedFrame,
  InvalidFrame,
  // filter
  EmptyTrace,
  InsufficientSamples,
  InvalidParams,
  // ranging
  InvalidDistance,
  InvalidTime,
  InvalidModel,
  // position
  NoAnchors,
  ArityError,
  DegenerateGeometry,
  NoConvergence,
  NoIntersection,
  NoSurveys,
  NoComparableEntries,
  InvalidArgument,
  // sim
  InvalidScenario,
  InvalidConfig,
  // eval
  EmptyInput,
};

/// Stable identifier used in error messages and CLI diagnostics.
std::string_view to_string(ErrorCode code);

/// The single exception type thrown by the library. The code is the contract;
/// the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace bleloc
