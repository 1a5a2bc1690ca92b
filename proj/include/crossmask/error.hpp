#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace crossmask {

enum class ErrorKind {
  ParallelSegments,
  NoCrossing,
  DegenerateSegment,
  DegenerateArm,
  InvalidRate,
  InvalidArgument,
  EmptyMask,
  DimensionMismatch,
  DuplicateCategory,
  InsufficientData,
  NonFiniteLoss,
  NonFiniteInput,
  EmptyPseudoMask,
  EmptyCategory,
  NoLabels,
  EmptyList,
  ShapeMismatch,
  DivergenceDetected,
  SchemaError,
  GeometryError,
  BoundsError,
  IoError,
  UnsupportedBitDepth,
  MissingGt,
  VersionConflict,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ParallelSegments: return "ParallelSegments";
    case ErrorKind::NoCrossing: return "NoCrossing";
    case ErrorKind::DegenerateSegment: return "DegenerateSegment";
    case ErrorKind::DegenerateArm: return "DegenerateArm";
    case ErrorKind::InvalidRate: return "InvalidRate";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::EmptyMask: return "EmptyMask";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::DuplicateCategory: return "DuplicateCategory";
    case ErrorKind::InsufficientData: return "InsufficientData";
    case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorKind::NonFiniteInput: return "NonFiniteInput";
    case ErrorKind::EmptyPseudoMask: return "EmptyPseudoMask";
    case ErrorKind::EmptyCategory: return "EmptyCategory";
    case ErrorKind::NoLabels: return "NoLabels";
    case ErrorKind::EmptyList: return "EmptyList";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::DivergenceDetected: return "DivergenceDetected";
    case ErrorKind::SchemaError: return "SchemaError";
    case ErrorKind::GeometryError: return "GeometryError";
    case ErrorKind::BoundsError: return "BoundsError";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::UnsupportedBitDepth: return "UnsupportedBitDepth";
    case ErrorKind::MissingGt: return "MissingGt";
    case ErrorKind::VersionConflict: return "VersionConflict";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a machine-readable kind so
/// callers (CLI exit codes, HTTP status mapping) can dispatch on it.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace crossmask
