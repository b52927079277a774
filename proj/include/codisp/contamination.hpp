#pragma once

// Seeded contamination regimes. Every function is a pure function of its
// inputs and seed.

#include <cstddef>
#include <cstdint>
#include <optional>

#include "codisp/grid.hpp"

namespace codisp {

/// Mixture noise (1 - delta) N(0, sigma2) + delta N(0, tau2), applied by
/// replacement: each cell is independently selected with probability
/// `delta` and overwritten by a Normal(grid mean, tau2) draw.
struct MixtureNoiseSpec {
  double delta = 0.05;
  double sigma2 = 1.0;
  double tau2 = 10.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct RandomBlocksSpec {
  std::size_t block_size = 15;
  /// Selection probability of each candidate top-left anchor.
  double proportion = 0.000002;
  std::uint64_t seed = 0;

  void validate() const;
};

struct GapAnchor {
  std::size_t row = 0;
  std::size_t col = 0;
};

struct GapSpec {
  std::size_t gap_rows = 1;
  std::size_t gap_cols = 1;
  /// Top-left cell of the gap; when empty, drawn from `seed`.
  std::optional<GapAnchor> anchor;
  std::uint64_t seed = 0;
};

Grid salt_pepper_mixture(const Grid& g, const MixtureNoiseSpec& spec);

/// Classical variant: selected cells become `low` or `high` with equal odds.
/// Throws InvalidRange when low >= high.
Grid salt_pepper_classic(const Grid& g, double delta, double low, double high, std::uint64_t seed);

/// Masks every b x b block whose anchor is selected. Throws BlockTooLarge.
Grid missing_random_blocks(const Grid& g, const RandomBlocksSpec& spec);

/// Anchor placing the gap in the middle of the grid.
GapAnchor centered_anchor(const Grid& g, std::size_t gap_rows, std::size_t gap_cols);

/// Resolves the anchor of `spec`. A random anchor is drawn uniformly among
/// the positions whose imputation neighborhood (three times the gap side
/// plus one, per axis) fits inside the grid. Throws GapOutOfBounds.
GapAnchor resolve_gap_anchor(const Grid& g, const GapSpec& spec);

/// Masks a contiguous gap_rows x gap_cols rectangle. Throws GapOutOfBounds.
Grid cut_gap(const Grid& g, const GapSpec& spec);

/// Uniform sample without replacement of round(keep_fraction * n) points;
/// the survivors keep their original relative order. Throws EmptyResult.
MarkedPointSet thin_points(const MarkedPointSet& points, double keep_fraction, std::uint64_t seed);

}  // namespace codisp
