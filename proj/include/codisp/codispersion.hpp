#pragma once

// Codispersion coefficient
//
//   rho(h) = S_xy(h) / sqrt(S_xx(h) * S_yy(h)),
//   S_ab(h) = sum_s (a(s+h) - a(s)) * (b(s+h) - b(s)),
//
// summed over every s for which s and s+h are observed in both grids.
// A lag is undefined (NaN) when fewer than `min_pairs` pairs survive or
// either S_xx or S_yy falls below `denom_epsilon`.

#include <cstddef>
#include <optional>
#include <string>

#include "codisp/grid.hpp"

namespace codisp {

struct CodispConfig {
  std::size_t min_pairs = 30;
  double denom_epsilon = 1e-12;
  /// Half side of the square bin around each lag center (point mode only).
  std::optional<double> bin_halfwidth;

  void validate() const;
};

/// Raw increment sums for one lag.
struct LagSums {
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  std::size_t pairs = 0;
};

/// NaN when the lag is undefined under `cfg`; otherwise the ratio clamped
/// to [-1, 1].
double codisp_ratio(const LagSums& sums, const CodispConfig& cfg) noexcept;

/// Single fused pass over the grid for lag `h`. Any sign of h.dy is allowed.
/// Throws DimensionMismatch or LagOutOfRange.
LagSums lag_sums(const Grid& x, const Grid& y, Lag h);

std::optional<double> codisp_at_lag(const Grid& x, const Grid& y, Lag h,
                                    const CodispConfig& cfg = {});

/// Map over every lag of `window`, distributed across OpenMP threads. Each
/// lag is reduced serially in row-major order, so the result is bitwise
/// identical for any thread count.
CodispMap codisp_map(const Grid& x, const Grid& y, const LagWindow& window,
                     const CodispConfig& cfg = {});

/// Lag centers for marked point patterns: (dx * spacing, dy * spacing).
struct PointLagWindow {
  LagWindow lags;
  double spacing = 1.0;
};

/// Position of `lag` in a half-plane window, or nullopt when it is not part
/// of the window.
std::optional<std::size_t> lag_index(const LagWindow& window, Lag lag) noexcept;

/// Lag-binned map for a marked point pattern. Ordered pairs (i, j), i != j,
/// whose offset p_j - p_i satisfies c - w <= offset < c + w on both axes
/// (c = lag center, w = bin half width) contribute the increments
/// mark(j) - mark(i). Throws UnknownMark or MissingBinWidth.
CodispMap point_codisp_map(const MarkedPointSet& points, const std::string& mark_x,
                           const std::string& mark_y, const PointLagWindow& window,
                           const CodispConfig& cfg);

/// Serial reference implementations kept for testing and benchmarking.
namespace serial {

CodispMap codisp_map(const Grid& x, const Grid& y, const LagWindow& window,
                     const CodispConfig& cfg = {});

CodispMap point_codisp_map(const MarkedPointSet& points, const std::string& mark_x,
                           const std::string& mark_y, const PointLagWindow& window,
                           const CodispConfig& cfg);

}  // namespace serial

}  // namespace codisp
