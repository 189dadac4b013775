#include "oostraj/error.hpp"

namespace oostraj {

std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::NotScalar: return "NotScalar";
    case Errc::MissingGradient: return "MissingGradient";
    case Errc::UnknownCellKind: return "UnknownCellKind";
    case Errc::InvalidPose: return "InvalidPose";
    case Errc::DepthNonPositive: return "DepthNonPositive";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::InsufficientCorrespondences: return "InsufficientCorrespondences";
    case Errc::DegenerateConfiguration: return "DegenerateConfiguration";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::EmptyTrajectory: return "EmptyTrajectory";
    case Errc::SceneGenerationFailed: return "SceneGenerationFailed";
    case Errc::NoInSightAgents: return "NoInSightAgents";
    case Errc::NonFiniteLoss: return "NonFiniteLoss";
    case Errc::TooShort: return "TooShort";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::Io: return "Io";
    case Errc::HashMismatch: return "HashMismatch";
    case Errc::Schema: return "Schema";
    case Errc::InsufficientData: return "InsufficientData";
  }
  return "Unknown";
}

}  // namespace oostraj
