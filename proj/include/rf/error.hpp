#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rf {

enum class Errc {
  EmptyDataset,
  AllZeroFluence,
  DimensionMismatch,
  BadMagic,
  VersionUnsupported,
  TruncatedFile,
  ChecksumMismatch,
  TooFewFiles,
  NonPositiveKvp,
  BeamMissesVolume,
  IoFailure,
  AllZero,
  NegativeInput,
  OutOfRange,
  NonUnitDirection,
  NegativeBin,
  OutOfConfiguredRange,
  WidthMismatch,
  NonFiniteParameters,
  NoRecordedGraph,
  GridTooSmall,
  LengthMismatch,
  EmptySelection,
  CriterionSmallerThanVoxel,
  StepOutOfRange,
  ShapeMismatch,
  EmptySplit,
  DivergedLoss,
  EmptySpace,
  MissingNormalizer,
  InvalidConfig,
  Unimplemented,
};

std::string_view to_string(Errc code);

/// Every failure raised by the library carries one of the codes above so the
/// CLI can print a stable, machine-parsable tag.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message);

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

void warn(std::string_view message);

}  // namespace rf
