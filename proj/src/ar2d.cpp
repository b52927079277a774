#include "codisp/ar2d.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "codisp/error.hpp"
#include "codisp/rng.hpp"

namespace codisp {

RegionView::RegionView(const Grid& g, std::size_t row0, std::size_t col0, std::size_t rows,
                       std::size_t cols, bool flip_rows, bool flip_cols, double center)
    : grid_(&g),
      row0_(row0),
      col0_(col0),
      rows_(rows),
      cols_(cols),
      flip_rows_(flip_rows),
      flip_cols_(flip_cols),
      center_(center) {
  if (row0 + rows > g.rows() || col0 + cols > g.cols()) {
    throw Error(ErrorCode::InvalidArgument, "region extends past the grid");
  }
}

RegionView::RegionView(const Grid& g, double center) : RegionView(g, 0, 0, g.rows(), g.cols(), false, false, center) {}

Ar2dCoeffs fit_ar2d_ls(const RegionView& region) {
  Eigen::Matrix3d ata = Eigen::Matrix3d::Zero();
  Eigen::Vector3d atb = Eigen::Vector3d::Zero();
  std::size_t n = 0;
  for (std::size_t i = 1; i < region.rows(); ++i) {
    for (std::size_t j = 1; j < region.cols(); ++j) {
      if (!region.observed(i, j) || !region.observed(i - 1, j) || !region.observed(i, j - 1) ||
          !region.observed(i - 1, j - 1)) {
        continue;
      }
      const Eigen::Vector3d v(region.value(i - 1, j), region.value(i, j - 1), region.value(i - 1, j - 1));
      ata.noalias() += v * v.transpose();
      atb.noalias() += v * region.value(i, j);
      ++n;
    }
  }
  if (n < 3) throw Error(ErrorCode::TooFewCells, "fewer than 3 regression rows");

  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(ata, Eigen::EigenvaluesOnly);
  const double lmax = eig.eigenvalues().maxCoeff();
  const double lmin = eig.eigenvalues().minCoeff();
  if (!(lmax > 0.0) || lmin <= 1e-12 * lmax) {
    throw Error(ErrorCode::SingularSystem, "AR-2D normal equations are rank deficient");
  }
  const Eigen::Vector3d phi = ata.ldlt().solve(atb);
  return {phi(0), phi(1), phi(2)};
}

BlockPartition partition_blocks(std::size_t rows, std::size_t cols, std::size_t k) {
  if (k < 4 || k > std::min(rows, cols)) {
    throw Error(ErrorCode::KOutOfRange, "block parameter k must satisfy 4 <= k <= min(M, N)");
  }
  BlockPartition p;
  p.k = k;
  const std::size_t step = k - 1;
  const std::size_t down = (rows - 1) / step;
  const std::size_t across = (cols - 1) / step;
  p.trimmed_rows = down * step + 1;
  p.trimmed_cols = across * step + 1;
  p.blocks.reserve(down * across);
  for (std::size_t ib = 0; ib < down; ++ib) {
    for (std::size_t jb = 0; jb < across; ++jb) {
      p.blocks.push_back({ib, jb, step * ib + 1, step * (ib + 1) + 1, step * jb + 1, step * (jb + 1) + 1});
    }
  }
  return p;
}

Grid approximate_image(const Grid& z, std::size_t k) {
  const BlockPartition part = partition_blocks(z.rows(), z.cols(), k);
  for (std::size_t r = 0; r < part.trimmed_rows; ++r) {
    for (std::size_t c = 0; c < part.trimmed_cols; ++c) {
      if (!z.observed(r, c)) {
        throw Error(ErrorCode::InvalidArgument, "approximate_image needs a fully observed trimmed extent");
      }
    }
  }
  const double mean = masked_mean(z);
  Grid out(part.trimmed_rows, part.trimmed_cols);
  for (std::size_t c = 0; c < part.trimmed_cols; ++c) out.set(0, c, z.value(0, c));
  for (std::size_t r = 0; r < part.trimmed_rows; ++r) out.set(r, 0, z.value(r, 0));

  const auto nblocks = static_cast<std::ptrdiff_t>(part.blocks.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t b = 0; b < nblocks; ++b) {
    const Block& blk = part.blocks[static_cast<std::size_t>(b)];
    const RegionView window(z, blk.row_begin - 1, blk.col_begin - 1, k, k, false, false, mean);
    // k >= 4 guarantees enough regression rows, so only SingularSystem can
    // reach this handler.
    Ar2dCoeffs phi;
    try {
      phi = fit_ar2d_ls(window);
    } catch (const Error&) {
      phi = {};
    }
    for (std::size_t r = blk.row_begin; r < blk.row_end; ++r) {
      for (std::size_t c = blk.col_begin; c < blk.col_end; ++c) {
        const double xhat = phi.predict(z.value(r - 1, c) - mean, z.value(r, c - 1) - mean,
                                        z.value(r - 1, c - 1) - mean);
        out.set(r, c, xhat + mean);
      }
    }
  }
  return out;
}

std::optional<GapRect> find_gap(const Grid& z) {
  std::size_t r0 = z.rows(), r1 = 0, c0 = z.cols(), c1 = 0, missing = 0;
  for (std::size_t r = 0; r < z.rows(); ++r) {
    for (std::size_t c = 0; c < z.cols(); ++c) {
      if (z.observed(r, c)) continue;
      r0 = std::min(r0, r);
      r1 = std::max(r1, r);
      c0 = std::min(c0, c);
      c1 = std::max(c1, c);
      ++missing;
    }
  }
  if (missing == 0) return std::nullopt;
  GapRect gap{r0, c0, r1 - r0 + 1, c1 - c0 + 1};
  if (missing != gap.rows * gap.cols) {
    throw Error(ErrorCode::GapNotRectangular, "missing cells do not form a single filled rectangle");
  }
  return gap;
}

namespace {

struct Neighborhood {
  std::size_t row0, col0, rows, cols;
  std::size_t kr, kc;
};

Neighborhood neighborhood_of(const Grid& z, const GapRect& gap) {
  if (gap.rows == 0 || gap.cols == 0) throw Error(ErrorCode::InvalidArgument, "empty gap");
  const std::size_t kr = gap.rows + 1;
  const std::size_t kc = gap.cols + 1;
  if (gap.row < kr || gap.col < kc || gap.row + 2 * kr > z.rows() || gap.col + 2 * kc > z.cols()) {
    throw Error(ErrorCode::NeighborhoodOutOfBounds, "3K x 3K neighbourhood of the gap leaves the grid");
  }
  return {gap.row - kr, gap.col - kc, 3 * kr, 3 * kc, kr, kc};
}

bool in_gap(const GapRect& gap, std::size_t r, std::size_t c) {
  return r >= gap.row && r < gap.row + gap.rows && c >= gap.col && c < gap.col + gap.cols;
}

Ar2dCoeffs fit_or_zero(const RegionView& v) {
  try {
    return fit_ar2d_ls(v);
  } catch (const Error& e) {
    // A 2 x 2 border block (1-cell gap) has a single regression row.
    if (e.code() != ErrorCode::SingularSystem && e.code() != ErrorCode::TooFewCells) throw;
    return {};
  }
}

}  // namespace

std::vector<Ar2dCoeffs> border_coefficients(const Grid& z, const GapRect& gap, double center) {
  const Neighborhood nb = neighborhood_of(z, gap);
  const std::size_t kr = nb.kr, kc = nb.kc;
  return {
      fit_or_zero(RegionView(z, gap.row - kr, gap.col, kr, kc, false, false, center)),
      fit_or_zero(RegionView(z, gap.row, gap.col - kc, kr, kc, false, false, center)),
      fit_or_zero(RegionView(z, gap.row + kr, gap.col, kr, kc, true, false, center)),
      fit_or_zero(RegionView(z, gap.row, gap.col + kc, kr, kc, false, true, center)),
  };
}

Grid impute_gap(const Grid& z, const GapRect& gap) {
  const Neighborhood nb = neighborhood_of(z, gap);
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t r = nb.row0; r < nb.row0 + nb.rows; ++r) {
    for (std::size_t c = nb.col0; c < nb.col0 + nb.cols; ++c) {
      if (in_gap(gap, r, c) == z.observed(r, c)) {
        throw Error(ErrorCode::GapNotRectangular,
                    "gap cells must all be missing and the neighbourhood fully observed");
      }
      if (z.observed(r, c)) {
        sum += z.value(r, c);
        ++n;
      }
    }
  }
  const double center = sum / static_cast<double>(n);
  const std::vector<Ar2dCoeffs> phi = border_coefficients(z, gap, center);
  const Ar2dCoeffs& above = phi[0];
  const Ar2dCoeffs& left = phi[1];
  const Ar2dCoeffs& below = phi[2];
  const Ar2dCoeffs& right = phi[3];

  // Centred working copy of the gap plus a one-cell frame, indexed from -1.
  const std::size_t wr = gap.rows + 2, wc = gap.cols + 2;
  std::vector<double> work(wr * wc, 0.0);
  for (std::size_t i = 0; i < wr; ++i) {
    for (std::size_t j = 0; j < wc; ++j) {
      const std::size_t r = gap.row + i - 1, c = gap.col + j - 1;
      if (z.observed(r, c)) work[i * wc + j] = z.value(r, c) - center;
    }
  }
  auto at = [&](long i, long j) -> double& {
    return work[static_cast<std::size_t>(i + 1) * wc + static_cast<std::size_t>(j + 1)];
  };

  std::vector<double> acc(gap.rows * gap.cols, 0.0);
  std::vector<int> hits(gap.rows * gap.cols, 0);
  auto add = [&](long i, long j, double v) {
    const std::size_t k = static_cast<std::size_t>(i) * gap.cols + static_cast<std::size_t>(j);
    acc[k] += v;
    ++hits[k];
  };

  long top = 0, bottom = static_cast<long>(gap.rows) - 1;
  long lo = 0, hi = static_cast<long>(gap.cols) - 1;
  while (top <= bottom && lo <= hi) {
    // Each side runs its own chain along the ring and reads only cells filled
    // by earlier rings, so the four sides are independent of each other.
    double prev = at(top, lo - 1);
    for (long j = lo; j <= hi; ++j) {
      prev = above.predict(at(top - 1, j), prev, at(top - 1, j - 1));
      add(top, j, prev);
    }
    prev = at(bottom, lo - 1);
    for (long j = lo; j <= hi; ++j) {
      prev = below.predict(at(bottom + 1, j), prev, at(bottom + 1, j - 1));
      add(bottom, j, prev);
    }
    prev = at(top - 1, lo);
    for (long i = top; i <= bottom; ++i) {
      prev = left.predict(prev, at(i, lo - 1), at(i - 1, lo - 1));
      add(i, lo, prev);
    }
    prev = at(top - 1, hi);
    for (long i = top; i <= bottom; ++i) {
      prev = right.predict(prev, at(i, hi + 1), at(i - 1, hi + 1));
      add(i, hi, prev);
    }
    for (long i = top; i <= bottom; ++i) {
      for (long j = lo; j <= hi; ++j) {
        const std::size_t k = static_cast<std::size_t>(i) * gap.cols + static_cast<std::size_t>(j);
        if (hits[k] > 0 && (i == top || i == bottom || j == lo || j == hi)) {
          at(i, j) = acc[k] / hits[k];
        }
      }
    }
    ++top;
    --bottom;
    ++lo;
    --hi;
  }

  Grid out = z;
  for (std::size_t i = 0; i < gap.rows; ++i) {
    for (std::size_t j = 0; j < gap.cols; ++j) {
      out.set(gap.row + i, gap.col + j, at(static_cast<long>(i), static_cast<long>(j)) + center);
    }
  }
  return out;
}

Grid impute_gap(const Grid& z) {
  const auto gap = find_gap(z);
  if (!gap) return z;
  return impute_gap(z, *gap);
}

Grid impute_gap(const Grid& z, std::size_t K) {
  const auto gap = find_gap(z);
  if (!gap) return z;
  if (K < 2 || gap->rows != K - 1 || gap->cols != K - 1) {
    throw Error(ErrorCode::GapNotRectangular, "gap is not (K-1) x (K-1)");
  }
  return impute_gap(z, *gap);
}

Grid simulate_ar2d(std::size_t rows, std::size_t cols, const Ar2dCoeffs& coeffs, double noise_sd,
                   std::uint64_t seed, std::size_t burn_in) {
  if (rows == 0 || cols == 0) throw Error(ErrorCode::InvalidArgument, "empty lattice");
  const std::size_t R = rows + burn_in + 1, C = cols + burn_in + 1;
  std::vector<double> x(R * C, 0.0);
  CounterRng rng(seed, streams::kAr2dSimulation);
  for (std::size_t r = 1; r < R; ++r) {
    for (std::size_t c = 1; c < C; ++c) {
      x[r * C + c] = coeffs.predict(x[(r - 1) * C + c], x[r * C + c - 1], x[(r - 1) * C + c - 1]) +
                     noise_sd * rng.normal();
    }
  }
  Grid out(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out.set(r, c, x[(r + R - rows) * C + c + C - cols]);
  }
  return out;
}

}  // namespace codisp
