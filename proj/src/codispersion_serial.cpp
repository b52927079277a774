// Plain single-threaded implementations. They share no code with the
// parallel kernels beyond the ratio and lag indexing, and are what the
// parallel versions are tested and benchmarked against.

#include <cmath>

#include "codisp/codispersion.hpp"
#include "codisp/error.hpp"

namespace codisp::serial {

CodispMap codisp_map(const Grid& x, const Grid& y, const LagWindow& window, const CodispConfig& cfg) {
  cfg.validate();
  if (x.rows() != y.rows() || x.cols() != y.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "grids differ in shape");
  }
  const auto rows = static_cast<long>(x.rows());
  const auto cols = static_cast<long>(x.cols());

  CodispMap map;
  map.window = window;
  for (const Lag& h : window.lags()) {
    if (std::abs(h.dx) >= cols || std::abs(h.dy) >= rows) {
      throw Error(ErrorCode::LagOutOfRange, "lag exceeds the grid");
    }
    LagSums s;
    for (long r = 0; r < rows; ++r) {
      for (long c = 0; c < cols; ++c) {
        const long r2 = r + h.dy;
        const long c2 = c + h.dx;
        if (r2 < 0 || r2 >= rows || c2 < 0 || c2 >= cols) continue;
        const auto ur = static_cast<std::size_t>(r), uc = static_cast<std::size_t>(c);
        const auto ur2 = static_cast<std::size_t>(r2), uc2 = static_cast<std::size_t>(c2);
        if (!x.observed(ur, uc) || !x.observed(ur2, uc2) || !y.observed(ur, uc) ||
            !y.observed(ur2, uc2)) {
          continue;
        }
        const double ix = x.value(ur2, uc2) - x.value(ur, uc);
        const double iy = y.value(ur2, uc2) - y.value(ur, uc);
        s.sxy += ix * iy;
        s.sxx += ix * ix;
        s.syy += iy * iy;
        ++s.pairs;
      }
    }
    map.values.push_back(codisp_ratio(s, cfg));
    map.pair_counts.push_back(s.pairs);
  }
  return map;
}

CodispMap point_codisp_map(const MarkedPointSet& points, const std::string& mark_x,
                           const std::string& mark_y, const PointLagWindow& window,
                           const CodispConfig& cfg) {
  cfg.validate();
  if (!cfg.bin_halfwidth) throw Error(ErrorCode::MissingBinWidth, "point mode needs bin_halfwidth");
  const auto mx = points.mark(mark_x);
  const auto my = points.mark(mark_y);
  const auto& pts = points.points();
  const double hw = *cfg.bin_halfwidth;

  CodispMap map;
  map.window = window.lags;
  for (const Lag& h : window.lags.lags()) {
    const double cx = h.dx * window.spacing;
    const double cy = h.dy * window.spacing;
    LagSums s;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      for (std::size_t j = 0; j < pts.size(); ++j) {
        if (i == j) continue;
        const double ox = pts[j].x - pts[i].x;
        const double oy = pts[j].y - pts[i].y;
        if (!(cx - hw <= ox && ox < cx + hw && cy - hw <= oy && oy < cy + hw)) continue;
        const double ix = mx[j] - mx[i];
        const double iy = my[j] - my[i];
        s.sxy += ix * iy;
        s.sxx += ix * ix;
        s.syy += iy * iy;
        ++s.pairs;
      }
    }
    map.values.push_back(codisp_ratio(s, cfg));
    map.pair_counts.push_back(s.pairs);
  }
  return map;
}

}  // namespace codisp::serial
