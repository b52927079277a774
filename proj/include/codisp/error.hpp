#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace codisp {

enum class ErrorCode {
  // argument / precondition problems
  InvalidArgument,
  AllMissing,
  InvalidWindow,
  DimensionMismatch,
  LagOutOfRange,
  UnknownMark,
  MissingBinWidth,
  InvalidRange,
  BlockTooLarge,
  GapOutOfBounds,
  EmptyResult,
  InadmissibleParams,
  MethodRequiresEqualParams,
  KOutOfRange,
  GapNotRectangular,
  NeighborhoodOutOfBounds,
  NonPositiveInput,
  TooFewCells,
  TooFewBins,
  DuplicatePointsWithZeroNugget,
  // input files
  IoError,
  MalformedHeader,
  ValueOutOfRange,
  RaggedRows,
  UnparsableToken,
  MissingColumn,
  NonNumeric,
  // numerics
  NotPositiveDefinite,
  SingularSystem,
  RankDeficient,
  DegenerateFit,
  SingularKrigingSystem,
};

enum class ErrorCategory { Usage, InputFormat, Numerical };

std::string_view to_string(ErrorCode code);
ErrorCategory category_of(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }
  ErrorCategory category() const noexcept { return category_of(code_); }

 private:
  ErrorCode code_;
};

}  // namespace codisp
