#include "echogcn/error.hpp"

namespace echogcn {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::LabelAbsent: return "LabelAbsent";
    case Errc::DegenerateGeometry: return "DegenerateGeometry";
    case Errc::OutOfRange: return "OutOfRange";
    case Errc::MissingStructure: return "MissingStructure";
    case Errc::NoInterface: return "NoInterface";
    case Errc::ContourTooShort: return "ContourTooShort";
    case Errc::ZeroTangent: return "ZeroTangent";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::LayoutMismatch: return "LayoutMismatch";
    case Errc::EmptyDataset: return "EmptyDataset";
    case Errc::InfeasibleGeometry: return "InfeasibleGeometry";
    case Errc::RetriesExhausted: return "RetriesExhausted";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::EmptyContour: return "EmptyContour";
    case Errc::AllZeroDifferences: return "AllZeroDifferences";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::MissingLandmark: return "MissingLandmark";
    case Errc::EmptyChord: return "EmptyChord";
    case Errc::ViewMissing: return "ViewMissing";
    case Errc::NonPositiveEDV: return "NonPositiveEDV";
    case Errc::NoUsableCycle: return "NoUsableCycle";
    case Errc::InsufficientRecords: return "InsufficientRecords";
    case Errc::ModelLoadFailure: return "ModelLoadFailure";
    case Errc::ConfigError: return "ConfigError";
    case Errc::UsageError: return "UsageError";
    case Errc::IoError: return "IoError";
    case Errc::FormatError: return "FormatError";
  }
  return "Unknown";
}

Error::Error(Errc code, std::string module, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message),
      code_(code),
      module_(std::move(module)) {}

}  // namespace echogcn
