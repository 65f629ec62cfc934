#include "bleloc/error.hpp"

namespace bleloc {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::InvalidChannel: return "InvalidChannel";
    case ErrorCode::InvalidSample: return "InvalidSample";
    case ErrorCode::NonMonotonicTimestamp: return "NonMonotonicTimestamp";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::FrameTooShort: return "FrameTooShort";
    case ErrorCode::FrameTooLong: return "FrameTooLong";
    case ErrorCode::UnknownProtocol: return "UnknownProtocol";
    case ErrorCode::MalformedFrame: return "MalformedFrame";
    case ErrorCode::InvalidFrame: return "InvalidFrame";
    case ErrorCode::EmptyTrace: return "EmptyTrace";
    case ErrorCode::InsufficientSamples: return "InsufficientSamples";
    case ErrorCode::InvalidParams: return "InvalidParams";
    case ErrorCode::InvalidDistance: return "InvalidDistance";
    case ErrorCode::InvalidTime: return "InvalidTime";
    case ErrorCode::InvalidModel: return "InvalidModel";
    case ErrorCode::NoAnchors: return "NoAnchors";
    case ErrorCode::ArityError: return "ArityError";
    case ErrorCode::DegenerateGeometry: return "DegenerateGeometry";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::NoIntersection: return "NoIntersection";
    case ErrorCode::NoSurveys: return "NoSurveys";
    case ErrorCode::NoComparableEntries: return "NoComparableEntries";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InvalidScenario: return "InvalidScenario";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::EmptyInput: return "EmptyInput";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

}  // namespace bleloc
