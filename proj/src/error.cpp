#include "codisp/error.hpp"

namespace codisp {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::AllMissing: return "AllMissing";
    case ErrorCode::InvalidWindow: return "InvalidWindow";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::LagOutOfRange: return "LagOutOfRange";
    case ErrorCode::UnknownMark: return "UnknownMark";
    case ErrorCode::MissingBinWidth: return "MissingBinWidth";
    case ErrorCode::InvalidRange: return "InvalidRange";
    case ErrorCode::BlockTooLarge: return "BlockTooLarge";
    case ErrorCode::GapOutOfBounds: return "GapOutOfBounds";
    case ErrorCode::EmptyResult: return "EmptyResult";
    case ErrorCode::InadmissibleParams: return "InadmissibleParams";
    case ErrorCode::MethodRequiresEqualParams: return "MethodRequiresEqualParams";
    case ErrorCode::KOutOfRange: return "KOutOfRange";
    case ErrorCode::GapNotRectangular: return "GapNotRectangular";
    case ErrorCode::NeighborhoodOutOfBounds: return "NeighborhoodOutOfBounds";
    case ErrorCode::NonPositiveInput: return "NonPositiveInput";
    case ErrorCode::TooFewCells: return "TooFewCells";
    case ErrorCode::TooFewBins: return "TooFewBins";
    case ErrorCode::DuplicatePointsWithZeroNugget: return "DuplicatePointsWithZeroNugget";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::MalformedHeader: return "MalformedHeader";
    case ErrorCode::ValueOutOfRange: return "ValueOutOfRange";
    case ErrorCode::RaggedRows: return "RaggedRows";
    case ErrorCode::UnparsableToken: return "UnparsableToken";
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::NonNumeric: return "NonNumeric";
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::DegenerateFit: return "DegenerateFit";
    case ErrorCode::SingularKrigingSystem: return "SingularKrigingSystem";
  }
  return "Unknown";
}

ErrorCategory category_of(ErrorCode code) {
  switch (code) {
    case ErrorCode::IoError:
    case ErrorCode::MalformedHeader:
    case ErrorCode::ValueOutOfRange:
    case ErrorCode::RaggedRows:
    case ErrorCode::UnparsableToken:
    case ErrorCode::MissingColumn:
    case ErrorCode::NonNumeric:
      return ErrorCategory::InputFormat;
    case ErrorCode::NotPositiveDefinite:
    case ErrorCode::SingularSystem:
    case ErrorCode::RankDeficient:
    case ErrorCode::DegenerateFit:
    case ErrorCode::SingularKrigingSystem:
      return ErrorCategory::Numerical;
    default:
      return ErrorCategory::Usage;
  }
}

}  // namespace codisp
