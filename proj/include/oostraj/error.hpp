#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace oostraj {

enum class Errc {
  ShapeMismatch,
  NotScalar,
  MissingGradient,
  UnknownCellKind,
  InvalidPose,
  DepthNonPositive,
  LengthMismatch,
  InsufficientCorrespondences,
  DegenerateConfiguration,
  EmptyInput,
  EmptyTrajectory,
  SceneGenerationFailed,
  NoInSightAgents,
  NonFiniteLoss,
  TooShort,
  InvalidConfig,
  Io,
  HashMismatch,
  Schema,
  InsufficientData,
};

std::string_view errc_name(Errc code);

/// Library-wide exception. `code()` identifies the failure class; the
/// message carries the detail (field name, timestamp index, ...).
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

/// Depth failure with the offending timestamp (or correspondence) index.
class DepthError : public Error {
 public:
  DepthError(std::size_t index, const std::string& what)
      : Error(Errc::DepthNonPositive, what + " at index " + std::to_string(index)), index_(index) {}

  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

}  // namespace oostraj
