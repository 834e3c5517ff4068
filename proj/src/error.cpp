#include "rf/error.hpp"

#include <iostream>

namespace rf {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::EmptyDataset: return "EmptyDataset";
    case Errc::AllZeroFluence: return "AllZeroFluence";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::BadMagic: return "BadMagic";
    case Errc::VersionUnsupported: return "VersionUnsupported";
    case Errc::TruncatedFile: return "TruncatedFile";
    case Errc::ChecksumMismatch: return "ChecksumMismatch";
    case Errc::TooFewFiles: return "TooFewFiles";
    case Errc::NonPositiveKvp: return "NonPositiveKvp";
    case Errc::BeamMissesVolume: return "BeamMissesVolume";
    case Errc::IoFailure: return "IoFailure";
    case Errc::AllZero: return "AllZero";
    case Errc::NegativeInput: return "NegativeInput";
    case Errc::OutOfRange: return "OutOfRange";
    case Errc::NonUnitDirection: return "NonUnitDirection";
    case Errc::NegativeBin: return "NegativeBin";
    case Errc::OutOfConfiguredRange: return "OutOfConfiguredRange";
    case Errc::WidthMismatch: return "WidthMismatch";
    case Errc::NonFiniteParameters: return "NonFiniteParameters";
    case Errc::NoRecordedGraph: return "NoRecordedGraph";
    case Errc::GridTooSmall: return "GridTooSmall";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::EmptySelection: return "EmptySelection";
    case Errc::CriterionSmallerThanVoxel: return "CriterionSmallerThanVoxel";
    case Errc::StepOutOfRange: return "StepOutOfRange";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::EmptySplit: return "EmptySplit";
    case Errc::DivergedLoss: return "DivergedLoss";
    case Errc::EmptySpace: return "EmptySpace";
    case Errc::MissingNormalizer: return "MissingNormalizer";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::Unimplemented: return "Unimplemented";
  }
  return "Unknown";
}

Error::Error(Errc code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

void warn(std::string_view message) { std::cerr << "warning: " << message << '\n'; }

}  // namespace rf
