#include "codisp/grid.hpp"

#include <algorithm>
#include <limits>

#include "codisp/error.hpp"

namespace codisp {

namespace {

void check_dims(std::size_t rows, std::size_t cols) {
  if (rows == 0 || cols == 0) {
    throw Error(ErrorCode::InvalidArgument, "grid needs at least one row and one column");
  }
}

}  // namespace

Grid::Grid(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), values_(rows * cols, fill), mask_(rows * cols, 1) {
  check_dims(rows, cols);
  if (!std::isfinite(fill)) throw Error(ErrorCode::InvalidArgument, "non-finite fill value");
}

Grid::Grid(std::size_t rows, std::size_t cols, std::vector<double> values)
    : Grid(rows, cols, std::move(values), std::vector<std::uint8_t>(rows * cols, 1)) {}

Grid::Grid(std::size_t rows, std::size_t cols, std::vector<double> values,
           std::vector<std::uint8_t> mask)
    : rows_(rows), cols_(cols), values_(std::move(values)), mask_(std::move(mask)) {
  check_dims(rows, cols);
  if (values_.size() != rows * cols || mask_.size() != rows * cols) {
    throw Error(ErrorCode::DimensionMismatch, "values/mask size does not match rows*cols");
  }
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (mask_[i] == 0) {
      values_[i] = 0.0;
    } else {
      mask_[i] = 1;
      if (!std::isfinite(values_[i])) {
        throw Error(ErrorCode::InvalidArgument, "observed cell holds a non-finite value");
      }
    }
  }
}

void Grid::set(std::size_t r, std::size_t c, double v) {
  if (!std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, "non-finite cell value");
  values_[index(r, c)] = v;
  mask_[index(r, c)] = 1;
}

void Grid::set_missing(std::size_t r, std::size_t c) noexcept {
  values_[index(r, c)] = 0.0;
  mask_[index(r, c)] = 0;
}

std::size_t Grid::observed_count() const noexcept {
  return static_cast<std::size_t>(std::count(mask_.begin(), mask_.end(), std::uint8_t{1}));
}

double masked_mean(const Grid& g) {
  double sum = 0.0;
  std::size_t n = 0;
  const auto vals = g.values();
  const auto mask = g.mask();
  for (std::size_t i = 0; i < vals.size(); ++i) {
    if (mask[i]) {
      sum += vals[i];
      ++n;
    }
  }
  if (n == 0) throw Error(ErrorCode::AllMissing, "grid has no observed cells");
  return sum / static_cast<double>(n);
}

double masked_variance(const Grid& g) {
  const double mean = masked_mean(g);
  double ss = 0.0;
  std::size_t n = 0;
  const auto vals = g.values();
  const auto mask = g.mask();
  for (std::size_t i = 0; i < vals.size(); ++i) {
    if (mask[i]) {
      const double d = vals[i] - mean;
      ss += d * d;
      ++n;
    }
  }
  return n > 1 ? ss / static_cast<double>(n - 1) : 0.0;
}

MarkedPointSet::MarkedPointSet(std::vector<Point> points) : points_(std::move(points)) {
  if (points_.empty()) return;
  extent_ = {points_[0].x, points_[0].x, points_[0].y, points_[0].y};
  for (const auto& p : points_) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
      throw Error(ErrorCode::InvalidArgument, "non-finite point coordinate");
    }
    extent_.xmin = std::min(extent_.xmin, p.x);
    extent_.xmax = std::max(extent_.xmax, p.x);
    extent_.ymin = std::min(extent_.ymin, p.y);
    extent_.ymax = std::max(extent_.ymax, p.y);
  }
}

MarkedPointSet::MarkedPointSet(std::vector<Point> points, Extent extent)
    : points_(std::move(points)), extent_(extent) {
  for (const auto& p : points_) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
      throw Error(ErrorCode::InvalidArgument, "non-finite point coordinate");
    }
    if (!extent_.contains(p)) {
      throw Error(ErrorCode::InvalidArgument, "point lies outside the declared extent");
    }
  }
}

void MarkedPointSet::add_mark(std::string name, std::vector<double> values) {
  if (values.size() != points_.size()) {
    throw Error(ErrorCode::DimensionMismatch, "mark column '" + name + "' has wrong length");
  }
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw Error(ErrorCode::InvalidArgument, "mark column '" + name + "' has a non-finite value");
    }
  }
  for (auto& [n, col] : marks_) {
    if (n == name) {
      col = std::move(values);
      return;
    }
  }
  marks_.emplace_back(std::move(name), std::move(values));
}

bool MarkedPointSet::has_mark(const std::string& name) const noexcept {
  return std::any_of(marks_.begin(), marks_.end(), [&](const auto& m) { return m.first == name; });
}

std::span<const double> MarkedPointSet::mark(const std::string& name) const {
  for (const auto& [n, col] : marks_) {
    if (n == name) return col;
  }
  throw Error(ErrorCode::UnknownMark, "no mark column named '" + name + "'");
}

std::vector<std::string> MarkedPointSet::mark_names() const {
  std::vector<std::string> names;
  names.reserve(marks_.size());
  for (const auto& m : marks_) names.push_back(m.first);
  return names;
}

MarkedPointSet MarkedPointSet::subset(std::span<const std::size_t> indices) const {
  MarkedPointSet out;
  out.extent_ = extent_;
  out.points_.reserve(indices.size());
  for (std::size_t i : indices) out.points_.push_back(points_.at(i));
  for (const auto& [name, col] : marks_) {
    std::vector<double> sub;
    sub.reserve(indices.size());
    for (std::size_t i : indices) sub.push_back(col[i]);
    out.marks_.emplace_back(name, std::move(sub));
  }
  return out;
}

LagWindow build_lag_window(int max_lag_x, int max_lag_y) {
  if (max_lag_x < 1 || max_lag_y < 1) {
    throw Error(ErrorCode::InvalidWindow, "lag window bounds must be >= 1");
  }
  LagWindow w;
  w.max_lag_x_ = max_lag_x;
  w.max_lag_y_ = max_lag_y;
  w.lags_.reserve(static_cast<std::size_t>(max_lag_x) +
                  static_cast<std::size_t>(2 * max_lag_x + 1) * static_cast<std::size_t>(max_lag_y));
  for (int dy = 0; dy <= max_lag_y; ++dy) {
    for (int dx = dy == 0 ? 1 : -max_lag_x; dx <= max_lag_x; ++dx) {
      w.lags_.push_back({dx, dy});
    }
  }
  return w;
}

int default_max_lag(std::size_t rows, std::size_t cols) {
  return std::max(1, static_cast<int>(std::min(rows, cols) / 4));
}

MapSummary summarize(const CodispMap& map) {
  MapSummary s;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  double sum = 0.0;
  std::size_t n = 0;
  s.min = std::numeric_limits<double>::infinity();
  s.max = -std::numeric_limits<double>::infinity();
  for (double v : map.values) {
    if (std::isnan(v)) continue;
    sum += v;
    s.min = std::min(s.min, v);
    s.max = std::max(s.max, v);
    ++n;
  }
  if (n == 0) {
    s.mean = s.min = s.max = nan;
  } else {
    s.mean = sum / static_cast<double>(n);
  }
  s.defined_fraction =
      map.values.empty() ? 0.0 : static_cast<double>(n) / static_cast<double>(map.values.size());
  return s;
}

}  // namespace codisp
