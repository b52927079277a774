#include "codisp/codispersion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "codisp/error.hpp"

namespace codisp {

void CodispConfig::validate() const {
  if (min_pairs < 1) throw Error(ErrorCode::InvalidArgument, "min_pairs must be >= 1");
  if (!(denom_epsilon > 0.0)) throw Error(ErrorCode::InvalidArgument, "denom_epsilon must be > 0");
  if (bin_halfwidth && !(*bin_halfwidth > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "bin_halfwidth must be > 0");
  }
}

double codisp_ratio(const LagSums& s, const CodispConfig& cfg) noexcept {
  if (s.pairs < cfg.min_pairs || s.sxx < cfg.denom_epsilon || s.syy < cfg.denom_epsilon) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  const double v = s.sxy / std::sqrt(s.sxx * s.syy);
  return std::clamp(v, -1.0, 1.0);
}

namespace {

void check_same_shape(const Grid& x, const Grid& y) {
  if (x.rows() != y.rows() || x.cols() != y.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "grids differ in shape");
  }
}

void check_lag(const Grid& g, Lag h) {
  const auto adx = static_cast<std::size_t>(std::abs(h.dx));
  const auto ady = static_cast<std::size_t>(std::abs(h.dy));
  if (adx >= g.cols() || ady >= g.rows()) {
    throw Error(ErrorCode::LagOutOfRange, "lag (" + std::to_string(h.dx) + "," +
                                              std::to_string(h.dy) + ") exceeds the grid");
  }
}

struct Span2d {
  std::size_t r0, r1, c0, c1;
};

Span2d overlap(const Grid& g, Lag h) {
  Span2d s;
  s.r0 = h.dy < 0 ? static_cast<std::size_t>(-h.dy) : 0;
  s.r1 = g.rows() - (h.dy > 0 ? static_cast<std::size_t>(h.dy) : 0);
  s.c0 = h.dx < 0 ? static_cast<std::size_t>(-h.dx) : 0;
  s.c1 = g.cols() - (h.dx > 0 ? static_cast<std::size_t>(h.dx) : 0);
  return s;
}

// Fused kernel. The dense branch performs the same additions in the same
// order as the masked branch, so both agree bitwise on fully observed input.
LagSums fused_sums(const Grid& x, const Grid& y, Lag h, bool dense) {
  LagSums out;
  const Span2d s = overlap(x, h);
  if (s.r0 >= s.r1 || s.c0 >= s.c1) return out;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  std::size_t pairs = 0;
  for (std::size_t r = s.r0; r < s.r1; ++r) {
    const std::size_t rh = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(r) + h.dy);
    const std::size_t width = s.c1 - s.c0;
    const std::size_t shifted = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(s.c0) + h.dx);
    const double* x0 = x.row(r) + s.c0;
    const double* y0 = y.row(r) + s.c0;
    const double* x1 = x.row(rh) + shifted;
    const double* y1 = y.row(rh) + shifted;
    if (dense) {
      for (std::size_t c = 0; c < width; ++c) {
        const double dx = x1[c] - x0[c];
        const double dy = y1[c] - y0[c];
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
      }
      pairs += width;
    } else {
      const std::uint8_t* mx0 = x.mask_row(r) + s.c0;
      const std::uint8_t* my0 = y.mask_row(r) + s.c0;
      const std::uint8_t* mx1 = x.mask_row(rh) + shifted;
      const std::uint8_t* my1 = y.mask_row(rh) + shifted;
      for (std::size_t c = 0; c < width; ++c) {
        if ((mx0[c] & my0[c] & mx1[c] & my1[c]) == 0) continue;
        const double dx = x1[c] - x0[c];
        const double dy = y1[c] - y0[c];
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
        ++pairs;
      }
    }
  }
  out.sxy = sxy;
  out.sxx = sxx;
  out.syy = syy;
  out.pairs = pairs;
  return out;
}

}  // namespace

LagSums lag_sums(const Grid& x, const Grid& y, Lag h) {
  check_same_shape(x, y);
  check_lag(x, h);
  return fused_sums(x, y, h, x.fully_observed() && y.fully_observed());
}

std::optional<double> codisp_at_lag(const Grid& x, const Grid& y, Lag h, const CodispConfig& cfg) {
  cfg.validate();
  const double v = codisp_ratio(lag_sums(x, y, h), cfg);
  if (std::isnan(v)) return std::nullopt;
  return v;
}

CodispMap codisp_map(const Grid& x, const Grid& y, const LagWindow& window, const CodispConfig& cfg) {
  cfg.validate();
  check_same_shape(x, y);
  for (const Lag& h : window.lags()) check_lag(x, h);

  const bool dense = x.fully_observed() && y.fully_observed();
  const auto& lags = window.lags();
  const auto n = static_cast<std::ptrdiff_t>(lags.size());
  CodispMap map;
  map.window = window;
  map.values.assign(lags.size(), 0.0);
  map.pair_counts.assign(lags.size(), 0);

  // Short lags touch more pairs than long ones; dynamic scheduling evens it out.
#pragma omp parallel for schedule(dynamic, 4)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const LagSums sums = fused_sums(x, y, lags[static_cast<std::size_t>(i)], dense);
    map.values[static_cast<std::size_t>(i)] = codisp_ratio(sums, cfg);
    map.pair_counts[static_cast<std::size_t>(i)] = sums.pairs;
  }
  return map;
}

std::optional<std::size_t> lag_index(const LagWindow& window, Lag lag) noexcept {
  const int mx = window.max_lag_x();
  const int my = window.max_lag_y();
  if (lag.dy < 0 || lag.dy > my || lag.dx < -mx || lag.dx > mx) return std::nullopt;
  if (lag.dy == 0) {
    if (lag.dx <= 0) return std::nullopt;
    return static_cast<std::size_t>(lag.dx - 1);
  }
  return static_cast<std::size_t>(mx) +
         static_cast<std::size_t>(lag.dy - 1) * static_cast<std::size_t>(2 * mx + 1) +
         static_cast<std::size_t>(lag.dx + mx);
}

namespace {

constexpr std::size_t kPointChunk = 64;

struct PointAccum {
  std::vector<double> sxy, sxx, syy;
  std::vector<std::size_t> pairs;
  explicit PointAccum(std::size_t n) : sxy(n, 0.0), sxx(n, 0.0), syy(n, 0.0), pairs(n, 0) {}
};

}  // namespace

CodispMap point_codisp_map(const MarkedPointSet& points, const std::string& mark_x,
                           const std::string& mark_y, const PointLagWindow& window,
                           const CodispConfig& cfg) {
  cfg.validate();
  if (!cfg.bin_halfwidth) throw Error(ErrorCode::MissingBinWidth, "point mode needs bin_halfwidth");
  if (!(window.spacing > 0.0)) throw Error(ErrorCode::InvalidArgument, "lag spacing must be > 0");
  const auto mx = points.mark(mark_x);
  const auto my = points.mark(mark_y);
  const auto& pts = points.points();
  const double hw = *cfg.bin_halfwidth;
  const double sp = window.spacing;
  const LagWindow& lw = window.lags;
  const std::size_t nlags = lw.size();
  const std::size_t n = pts.size();

  const double xreach = lw.max_lag_x() * sp + hw;
  const double yreach = lw.max_lag_y() * sp + hw;

  // Fixed-size chunks of i, each with its own accumulator, reduced in chunk
  // order: the result does not depend on the thread count.
  const std::size_t nchunks = (n + kPointChunk - 1) / kPointChunk;
  std::vector<PointAccum> partial(nchunks, PointAccum(nlags));

#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t chunk = 0; chunk < static_cast<std::ptrdiff_t>(nchunks); ++chunk) {
    PointAccum& acc = partial[static_cast<std::size_t>(chunk)];
    const std::size_t i0 = static_cast<std::size_t>(chunk) * kPointChunk;
    const std::size_t i1 = std::min(n, i0 + kPointChunk);
    for (std::size_t i = i0; i < i1; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const double ox = pts[j].x - pts[i].x;
        const double oy = pts[j].y - pts[i].y;
        if (oy < -hw || oy >= yreach || ox < -xreach || ox >= xreach) continue;
        const int dy_lo = static_cast<int>(std::floor((oy - hw) / sp));
        const int dy_hi = static_cast<int>(std::ceil((oy + hw) / sp));
        const int dx_lo = static_cast<int>(std::floor((ox - hw) / sp));
        const int dx_hi = static_cast<int>(std::ceil((ox + hw) / sp));
        for (int dy = dy_lo; dy <= dy_hi; ++dy) {
          const double cy = dy * sp;
          if (!(cy - hw <= oy && oy < cy + hw)) continue;
          for (int dx = dx_lo; dx <= dx_hi; ++dx) {
            const double cx = dx * sp;
            if (!(cx - hw <= ox && ox < cx + hw)) continue;
            const auto k = lag_index(lw, {dx, dy});
            if (!k) continue;
            const double ix = mx[j] - mx[i];
            const double iy = my[j] - my[i];
            acc.sxy[*k] += ix * iy;
            acc.sxx[*k] += ix * ix;
            acc.syy[*k] += iy * iy;
            ++acc.pairs[*k];
          }
        }
      }
    }
  }

  CodispMap map;
  map.window = lw;
  map.values.assign(nlags, 0.0);
  map.pair_counts.assign(nlags, 0);
  for (std::size_t k = 0; k < nlags; ++k) {
    LagSums s;
    for (const auto& acc : partial) {
      s.sxy += acc.sxy[k];
      s.sxx += acc.sxx[k];
      s.syy += acc.syy[k];
      s.pairs += acc.pairs[k];
    }
    map.values[k] = codisp_ratio(s, cfg);
    map.pair_counts[k] = s.pairs;
  }
  return map;
}

}  // namespace codisp
