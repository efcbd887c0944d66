#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace echogcn {

/// Error kinds raised across the library. The CLI prints these names in its
/// machine-readable error records, so keep them stable.
enum class Errc {
  LabelAbsent,
  DegenerateGeometry,
  OutOfRange,
  MissingStructure,
  NoInterface,
  ContourTooShort,
  ZeroTangent,
  ShapeMismatch,
  LayoutMismatch,
  EmptyDataset,
  InfeasibleGeometry,
  RetriesExhausted,
  DimensionMismatch,
  EmptyContour,
  AllZeroDifferences,
  LengthMismatch,
  MissingLandmark,
  EmptyChord,
  ViewMissing,
  NonPositiveEDV,
  NoUsableCycle,
  InsufficientRecords,
  ModelLoadFailure,
  ConfigError,
  UsageError,
  IoError,
  FormatError,
};

std::string_view to_string(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, std::string module, const std::string& message);

  Errc code() const noexcept { return code_; }
  const std::string& module() const noexcept { return module_; }

 private:
  Errc code_;
  std::string module_;
};

}  // namespace echogcn
