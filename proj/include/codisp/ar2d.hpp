#pragma once

// Causal AR-2D modelling of images:
//
//   X(r, s) = phi1 X(r-1, s) + phi2 X(r, s-1) + phi3 X(r-1, s-1) + e(r, s)
//
// with block-wise least-squares fits, the block-approximated image, and
// ring-by-ring imputation of a rectangular gap from its four bordering
// blocks.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "codisp/grid.hpp"

namespace codisp {

struct Ar2dCoeffs {
  double phi1 = 0.0;  ///< weight of (r-1, s)
  double phi2 = 0.0;  ///< weight of (r, s-1)
  double phi3 = 0.0;  ///< weight of (r-1, s-1)

  double predict(double up, double left, double up_left) const noexcept {
    return phi1 * up + phi2 * left + phi3 * up_left;
  }
  friend bool operator==(const Ar2dCoeffs&, const Ar2dCoeffs&) = default;
};

/// Rectangular window of a grid seen through optional row/column reversal,
/// with `center` subtracted from every value.
class RegionView {
 public:
  RegionView(const Grid& g, std::size_t row0, std::size_t col0, std::size_t rows, std::size_t cols,
             bool flip_rows = false, bool flip_cols = false, double center = 0.0);
  /// Whole grid.
  explicit RegionView(const Grid& g, double center = 0.0);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  double value(std::size_t i, std::size_t j) const noexcept {
    return grid_->value(source_row(i), source_col(j)) - center_;
  }
  bool observed(std::size_t i, std::size_t j) const noexcept {
    return grid_->observed(source_row(i), source_col(j));
  }

 private:
  std::size_t source_row(std::size_t i) const noexcept { return row0_ + (flip_rows_ ? rows_ - 1 - i : i); }
  std::size_t source_col(std::size_t j) const noexcept { return col0_ + (flip_cols_ ? cols_ - 1 - j : j); }

  const Grid* grid_;
  std::size_t row0_, col0_, rows_, cols_;
  bool flip_rows_, flip_cols_;
  double center_;
};

/// Least squares over every region cell whose three causal neighbours lie in
/// the region and all four cells are observed. Throws TooFewCells (< 3
/// regression rows) or SingularSystem.
Ar2dCoeffs fit_ar2d_ls(const RegionView& region);

struct Block {
  std::size_t ib = 0, jb = 0;
  std::size_t row_begin = 0, row_end = 0;  ///< predicted rows [begin, end)
  std::size_t col_begin = 0, col_end = 0;
};

/// (k-1) x (k-1) blocks tiling rows/cols 1 .. M'-1 / N'-1 of the trimmed
/// M' x N' image, M' = floor((M-1)/(k-1)) (k-1) + 1.
struct BlockPartition {
  std::size_t k = 0;
  std::size_t trimmed_rows = 0;
  std::size_t trimmed_cols = 0;
  std::vector<Block> blocks;
};

/// Throws KOutOfRange unless 4 <= k <= min(rows, cols).
BlockPartition partition_blocks(std::size_t rows, std::size_t cols, std::size_t k);

/// Block-wise approximated image of size M' x N'. Values are centred by the
/// image mean, each block is fitted on its k x k window (the block plus the
/// row above and column to the left) and predicted one step ahead from the
/// original neighbours. A singular block falls back to zero coefficients,
/// i.e. the image mean. Row 0 and column 0 have no causal neighbours and
/// are copied from the input. Blocks are processed in parallel.
Grid approximate_image(const Grid& z, std::size_t k);

struct GapRect {
  std::size_t row = 0;
  std::size_t col = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  friend bool operator==(const GapRect&, const GapRect&) = default;
};

/// Bounding box of the missing cells; nullopt for a fully observed grid.
/// Throws GapNotRectangular when the missing cells do not fill it.
std::optional<GapRect> find_gap(const Grid& z);

/// Fills `gap` from the four K x K blocks bordering it (K = side + 1 per
/// axis): above, left, below (rows reversed) and right (columns reversed).
/// Rings are filled from the outside in; every directional estimate landing
/// on a ring cell is averaged. Throws NeighborhoodOutOfBounds when the
/// 3K x 3K neighbourhood leaves the grid, GapNotRectangular when a gap cell
/// is observed or a neighbourhood cell is missing. Observed cells are copied
/// unchanged.
Grid impute_gap(const Grid& z, const GapRect& gap);

/// Imputes the single rectangular gap of `z`; returns `z` if it has none.
Grid impute_gap(const Grid& z);

/// As above, additionally requiring a (K-1) x (K-1) gap.
Grid impute_gap(const Grid& z, std::size_t K);

/// Directional coefficients used by impute_gap, in above/left/below/right
/// order. Singular or too-small blocks yield zero coefficients.
std::vector<Ar2dCoeffs> border_coefficients(const Grid& z, const GapRect& gap, double center);

/// Causal AR-2D field with Gaussian innovations of standard deviation
/// `noise_sd`, started from zeros and cropped after `burn_in` rows/columns.
Grid simulate_ar2d(std::size_t rows, std::size_t cols, const Ar2dCoeffs& coeffs, double noise_sd,
                   std::uint64_t seed, std::size_t burn_in = 64);

}  // namespace codisp
