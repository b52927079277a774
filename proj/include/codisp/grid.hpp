#pragma once

// Lattices with missing-value masks, marked point sets, lag windows and
// codispersion maps.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace codisp {

/// Dense M x N lattice of reals with a per-cell observation mask.
///
/// Masked-out cells store 0 and are never read by any statistic; the mask is
/// authoritative. Observed cells always hold finite values.
class Grid {
 public:
  Grid() = default;
  /// Fully observed grid filled with `fill`.
  Grid(std::size_t rows, std::size_t cols, double fill = 0.0);
  /// Fully observed grid from row-major values.
  Grid(std::size_t rows, std::size_t cols, std::vector<double> values);
  /// Grid with explicit mask (nonzero = observed). Values under a zero mask
  /// are reset to 0.
  Grid(std::size_t rows, std::size_t cols, std::vector<double> values,
       std::vector<std::uint8_t> mask);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  std::size_t index(std::size_t r, std::size_t c) const noexcept { return r * cols_ + c; }
  double value(std::size_t r, std::size_t c) const noexcept { return values_[index(r, c)]; }
  bool observed(std::size_t r, std::size_t c) const noexcept { return mask_[index(r, c)] != 0; }

  /// Stores a finite value and marks the cell observed.
  void set(std::size_t r, std::size_t c, double v);
  void set_missing(std::size_t r, std::size_t c) noexcept;

  std::span<const double> values() const noexcept { return values_; }
  std::span<const std::uint8_t> mask() const noexcept { return mask_; }
  const double* row(std::size_t r) const noexcept { return values_.data() + r * cols_; }
  const std::uint8_t* mask_row(std::size_t r) const noexcept { return mask_.data() + r * cols_; }

  std::size_t observed_count() const noexcept;
  bool fully_observed() const noexcept { return observed_count() == size(); }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
  std::vector<std::uint8_t> mask_;
};

/// Mean over observed cells. Throws AllMissing when nothing is observed.
double masked_mean(const Grid& g);

/// Sample variance (n - 1 denominator) over observed cells.
double masked_variance(const Grid& g);

struct Point {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point&, const Point&) = default;
};

struct Extent {
  double xmin = 0.0;
  double xmax = 0.0;
  double ymin = 0.0;
  double ymax = 0.0;
  bool contains(const Point& p) const noexcept {
    return p.x >= xmin && p.x <= xmax && p.y >= ymin && p.y <= ymax;
  }
  friend bool operator==(const Extent&, const Extent&) = default;
};

/// Planar points carrying named real-valued mark columns.
class MarkedPointSet {
 public:
  MarkedPointSet() = default;
  explicit MarkedPointSet(std::vector<Point> points);
  MarkedPointSet(std::vector<Point> points, Extent extent);

  std::size_t size() const noexcept { return points_.size(); }
  const std::vector<Point>& points() const noexcept { return points_; }
  const Extent& extent() const noexcept { return extent_; }

  void add_mark(std::string name, std::vector<double> values);
  bool has_mark(const std::string& name) const noexcept;
  /// Throws UnknownMark.
  std::span<const double> mark(const std::string& name) const;
  std::vector<std::string> mark_names() const;

  /// Points at `indices` (in that order) with all mark columns carried along.
  MarkedPointSet subset(std::span<const std::size_t> indices) const;

  friend bool operator==(const MarkedPointSet&, const MarkedPointSet&) = default;

 private:
  std::vector<Point> points_;
  Extent extent_;
  std::vector<std::pair<std::string, std::vector<double>>> marks_;
};

/// Displacement between two lattice cells: `dx` columns, `dy` rows.
struct Lag {
  int dx = 0;
  int dy = 0;
  friend bool operator==(const Lag&, const Lag&) = default;
};

/// Half-plane lag set: dy in [0, max_lag_y], dx in [-max_lag_x, max_lag_x],
/// with the dy == 0 row restricted to dx > 0. Ordered by dy, then dx.
class LagWindow {
 public:
  LagWindow() = default;
  int max_lag_x() const noexcept { return max_lag_x_; }
  int max_lag_y() const noexcept { return max_lag_y_; }
  const std::vector<Lag>& lags() const noexcept { return lags_; }
  std::size_t size() const noexcept { return lags_.size(); }

  friend LagWindow build_lag_window(int max_lag_x, int max_lag_y);
  friend bool operator==(const LagWindow&, const LagWindow&) = default;

 private:
  int max_lag_x_ = 0;
  int max_lag_y_ = 0;
  std::vector<Lag> lags_;
};

/// Throws InvalidWindow if either bound is below 1.
LagWindow build_lag_window(int max_lag_x, int max_lag_y);

/// Default extent used by the CLI: floor(min(rows, cols) / 4), at least 1.
int default_max_lag(std::size_t rows, std::size_t cols);

/// Codispersion value per lag of a window. Undefined lags hold NaN.
struct CodispMap {
  LagWindow window;
  std::vector<double> values;
  std::vector<std::size_t> pair_counts;

  bool defined(std::size_t i) const noexcept { return !std::isnan(values[i]); }
};

struct MapSummary {
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
  double defined_fraction = 0.0;
};

/// Summary over defined lags; mean/min/max are NaN when none is defined.
MapSummary summarize(const CodispMap& map);

}  // namespace codisp
