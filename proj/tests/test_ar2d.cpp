#include <gtest/gtest.h>

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "codisp/ar2d.hpp"
#include "codisp/contamination.hpp"
#include "codisp/error.hpp"
#include "codisp/rng.hpp"
#include "test_util.hpp"

using namespace codisp;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::InvalidArgument;
}

// Noise-free AR-2D recursion from a random first row and column.
Grid exact_ar2d(std::size_t rows, std::size_t cols, const Ar2dCoeffs& phi, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  Grid g(rows, cols);
  for (std::size_t c = 0; c < cols; ++c) g.set(0, c, z(rng));
  for (std::size_t r = 1; r < rows; ++r) {
    g.set(r, 0, z(rng));
    for (std::size_t c = 1; c < cols; ++c) {
      g.set(r, c, phi.predict(g.value(r - 1, c), g.value(r, c - 1), g.value(r - 1, c - 1)));
    }
  }
  return g;
}

double det3(const double m[3][3]) {
  return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
         m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
}

double region_variance(const Grid& g, std::size_t r0, std::size_t c0, std::size_t rows, std::size_t cols) {
  double s = 0, ss = 0;
  for (std::size_t r = r0; r < r0 + rows; ++r) {
    for (std::size_t c = c0; c < c0 + cols; ++c) {
      s += g.value(r, c);
      ss += g.value(r, c) * g.value(r, c);
    }
  }
  const double n = static_cast<double>(rows * cols);
  return ss / n - (s / n) * (s / n);
}

}  // namespace

TEST(Ar2dFit, ConstantRegionIsSingular) {
  EXPECT_EQ(code_of([] { fit_ar2d_ls(RegionView(Grid(8, 8, 3.0))); }), ErrorCode::SingularSystem);
}

TEST(Ar2dFit, TooFewCells) {
  std::mt19937_64 rng(1);
  const Grid g = testutil::random_grid(2, 3, rng);
  EXPECT_EQ(code_of([&] { fit_ar2d_ls(RegionView(g)); }), ErrorCode::TooFewCells);
}

TEST(Ar2dFit, RecoversNoiseFreeCoefficients) {
  const Ar2dCoeffs phi{0.5, 0.3, 0.1};
  const Ar2dCoeffs est = fit_ar2d_ls(RegionView(exact_ar2d(12, 12, phi, 2)));
  EXPECT_NEAR(est.phi1, 0.5, 1e-8);
  EXPECT_NEAR(est.phi2, 0.3, 1e-8);
  EXPECT_NEAR(est.phi3, 0.1, 1e-8);
}

TEST(Ar2dFit, NoisyEstimatesWithinTolerance) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Grid g = simulate_ar2d(256, 256, {0.4, 0.3, -0.1}, 1.0, derive_seed(11, s));
    const Ar2dCoeffs est = fit_ar2d_ls(RegionView(g));
    EXPECT_NEAR(est.phi1, 0.4, 0.05);
    EXPECT_NEAR(est.phi2, 0.3, 0.05);
    EXPECT_NEAR(est.phi3, -0.1, 0.05);
  }
}

TEST(Ar2dFit, MatchesBruteForceNormalEquations) {
  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 20; ++rep) {
    const Grid g = testutil::random_grid(6, 6, rng, rep % 2 ? 0.1 : 0.0);
    const double center = 0.25;
    double a[3][3] = {}, b[3] = {};
    int n = 0;
    for (std::size_t i = 1; i < 6; ++i) {
      for (std::size_t j = 1; j < 6; ++j) {
        if (!g.observed(i, j) || !g.observed(i - 1, j) || !g.observed(i, j - 1) || !g.observed(i - 1, j - 1)) continue;
        const double v[3] = {g.value(i - 1, j) - center, g.value(i, j - 1) - center, g.value(i - 1, j - 1) - center};
        for (int p = 0; p < 3; ++p) {
          for (int q = 0; q < 3; ++q) a[p][q] += v[p] * v[q];
          b[p] += v[p] * (g.value(i, j) - center);
        }
        ++n;
      }
    }
    if (n < 3) continue;
    // Cramer's rule.
    const double d = det3(a);
    double sol[3];
    for (int k = 0; k < 3; ++k) {
      double m[3][3];
      for (int p = 0; p < 3; ++p) {
        for (int q = 0; q < 3; ++q) m[p][q] = q == k ? b[p] : a[p][q];
      }
      sol[k] = det3(m) / d;
    }
    const Ar2dCoeffs est = fit_ar2d_ls(RegionView(g, center));
    EXPECT_NEAR(est.phi1, sol[0], 1e-10);
    EXPECT_NEAR(est.phi2, sol[1], 1e-10);
    EXPECT_NEAR(est.phi3, sol[2], 1e-10);
  }
}

TEST(Ar2dFit, FlippedViewsReadReversedData) {
  std::mt19937_64 rng(4);
  const Grid g = testutil::random_grid(5, 7, rng);
  const RegionView v(g, 1, 2, 3, 4, true, true, 1.0);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(v.value(i, j), g.value(1 + 2 - i, 2 + 3 - j) - 1.0);
  }
}

TEST(Partition, TrimmedSizesAndTiling) {
  const BlockPartition p = partition_blocks(513, 513, 9);
  EXPECT_EQ(p.trimmed_rows, 513u);
  EXPECT_EQ(p.trimmed_cols, 513u);
  EXPECT_EQ(p.blocks.size(), 64u * 64u);
  const BlockPartition q = partition_blocks(100, 37, 6);
  EXPECT_EQ(q.trimmed_rows, 96u);
  EXPECT_EQ(q.trimmed_cols, 36u);
  std::vector<int> cover(96 * 36, 0);
  for (const Block& b : q.blocks) {
    EXPECT_EQ(b.row_end - b.row_begin, 5u);
    EXPECT_EQ(b.col_end - b.col_begin, 5u);
    for (std::size_t r = b.row_begin; r < b.row_end; ++r) {
      for (std::size_t c = b.col_begin; c < b.col_end; ++c) ++cover[r * 36 + c];
    }
  }
  for (std::size_t r = 0; r < 96; ++r) {
    for (std::size_t c = 0; c < 36; ++c) EXPECT_EQ(cover[r * 36 + c], (r > 0 && c > 0) ? 1 : 0);
  }
  EXPECT_EQ(code_of([] { partition_blocks(10, 10, 3); }), ErrorCode::KOutOfRange);
  EXPECT_EQ(code_of([] { partition_blocks(10, 10, 11); }), ErrorCode::KOutOfRange);
}

TEST(ApproximateImage, ConstantImageGivesMean) {
  const Grid out = approximate_image(Grid(30, 30, 7.5), 5);
  ASSERT_EQ(out.rows(), 29u);
  for (std::size_t r = 0; r < out.rows(); ++r) {
    for (std::size_t c = 0; c < out.cols(); ++c) EXPECT_EQ(out.value(r, c), 7.5);
  }
}

TEST(ApproximateImage, GlobalModelReproducedExactly) {
  // Coefficients summing to one keep the recursion exact after centring.
  const Ar2dCoeffs phi{0.6, 0.7, -0.3};
  const Grid z = exact_ar2d(33, 33, phi, 5);
  const Grid out = approximate_image(z, 9);
  ASSERT_EQ(out.rows(), 33u);
  for (std::size_t r = 0; r < 33; ++r) {
    for (std::size_t c = 0; c < 33; ++c) EXPECT_NEAR(out.value(r, c), z.value(r, c), 1e-8 * (1 + std::abs(z.value(r, c))));
  }
}

TEST(ApproximateImage, IndependentOfThreadCount) {
  const Grid z = simulate_ar2d(97, 81, {0.4, 0.3, -0.1}, 1.0, 9);
  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  const Grid a = approximate_image(z, 9);
  omp_set_num_threads(4);
  const Grid b = approximate_image(z, 9);
  omp_set_num_threads(saved);
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t c = 0; c < a.cols(); ++c) EXPECT_EQ(a.value(r, c), b.value(r, c));
  }
}

TEST(ApproximateImage, RejectsMissingCells) {
  Grid z = simulate_ar2d(20, 20, {0.4, 0.3, -0.1}, 1.0, 9);
  z.set_missing(5, 5);
  EXPECT_THROW(approximate_image(z, 5), Error);
}

TEST(FindGap, Shapes) {
  Grid g(10, 10, 1.0);
  EXPECT_FALSE(find_gap(g).has_value());
  g.set_missing(2, 3);
  g.set_missing(2, 4);
  g.set_missing(3, 3);
  g.set_missing(3, 4);
  EXPECT_EQ(*find_gap(g), (GapRect{2, 3, 2, 2}));
  g.set_missing(7, 7);
  EXPECT_EQ(code_of([&] { find_gap(g); }), ErrorCode::GapNotRectangular);
}

TEST(ImputeGap, SingleCellInRampWithinNeighbourRange) {
  Grid z(12, 12);
  for (std::size_t r = 0; r < 12; ++r) {
    for (std::size_t c = 0; c < 12; ++c) z.set(r, c, 3.0 * r + 2.0 * c);
  }
  z.set_missing(5, 6);
  const Grid out = impute_gap(z, 2);
  double lo = 1e300, hi = -1e300;
  for (int dr = -1; dr <= 1; ++dr) {
    for (int dc = -1; dc <= 1; ++dc) {
      if (dr == 0 && dc == 0) continue;
      lo = std::min(lo, z.value(5 + dr, 6 + dc));
      hi = std::max(hi, z.value(5 + dr, 6 + dc));
    }
  }
  EXPECT_GE(out.value(5, 6), lo);
  EXPECT_LE(out.value(5, 6), hi);
}

TEST(ImputeGap, TwoByTwoGapHandTrace) {
  // With a noise-free global model every border block recovers it, so the
  // above/left chains reproduce the true values; the result is their average
  // with the reversed chains, which see a different model and need only be finite.
  const Grid truth = exact_ar2d(12, 12, {0.5, 0.3, 0.1}, 8);
  const Grid z = cut_gap(truth, {2, 2, GapAnchor{4, 4}, 0});
  const auto phi = border_coefficients(z, {4, 4, 2, 2}, 0.0);
  ASSERT_EQ(phi.size(), 4u);
  EXPECT_NEAR(phi[0].phi1, 0.5, 1e-6);
  EXPECT_NEAR(phi[1].phi2, 0.3, 1e-6);
  const Grid out = impute_gap(z);
  for (std::size_t r = 4; r < 6; ++r) {
    for (std::size_t c = 4; c < 6; ++c) EXPECT_TRUE(std::isfinite(out.value(r, c)));
  }
}

TEST(ImputeGap, ObservedCellsUnchangedAndFilled) {
  const Grid truth = simulate_ar2d(80, 90, {0.5, 0.4, -0.2}, 1.0, 12);
  for (std::size_t side : {1u, 2u, 5u, 10u, 17u}) {
    const Grid z = cut_gap(truth, {side, side, std::nullopt, side});
    const Grid out = impute_gap(z, side + 1);
    EXPECT_EQ(out.observed_count(), out.size());
    const GapRect gap = *find_gap(z);
    for (std::size_t r = 0; r < z.rows(); ++r) {
      for (std::size_t c = 0; c < z.cols(); ++c) {
        const bool inside = r >= gap.row && r < gap.row + gap.rows && c >= gap.col && c < gap.col + gap.cols;
        if (!inside) {
          EXPECT_EQ(out.value(r, c), z.value(r, c));
        } else {
          EXPECT_TRUE(std::isfinite(out.value(r, c)));
        }
      }
    }
  }
}

TEST(ImputeGap, RectangularGap) {
  const Grid truth = simulate_ar2d(60, 60, {0.5, 0.4, -0.2}, 1.0, 13);
  const Grid z = cut_gap(truth, {3, 7, GapAnchor{20, 20}, 0});
  const Grid out = impute_gap(z);
  EXPECT_EQ(out.observed_count(), out.size());
}

TEST(ImputeGap, FilledRegionIsSmoother) {
  int smoother = 0, total = 0;
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Grid truth = simulate_ar2d(120, 120, {0.6, 0.5, -0.3}, 1.0, derive_seed(14, s));
    const std::size_t side = 20;
    const GapAnchor a{50, 50};
    const Grid out = impute_gap(cut_gap(truth, {side, side, a, 0}));
    const double inside = region_variance(out, a.row, a.col, side, side);
    const double around = region_variance(out, a.row - side - 1, a.col - side - 1, 3 * (side + 1), 3 * (side + 1));
    smoother += inside <= 1.1 * around;
    ++total;
  }
  EXPECT_EQ(smoother, total);
}

TEST(ImputeGap, Errors) {
  const Grid truth = simulate_ar2d(40, 40, {0.5, 0.4, -0.2}, 1.0, 15);
  // Neighbourhood leaves the grid.
  const Grid edge = cut_gap(truth, {5, 5, GapAnchor{2, 20}, 0});
  EXPECT_EQ(code_of([&] { impute_gap(edge); }), ErrorCode::NeighborhoodOutOfBounds);
  // Two separate holes.
  Grid two = cut_gap(truth, {3, 3, GapAnchor{15, 15}, 0});
  two.set_missing(30, 30);
  EXPECT_EQ(code_of([&] { impute_gap(two); }), ErrorCode::GapNotRectangular);
  // Wrong K for the gap.
  const Grid z = cut_gap(truth, {3, 3, GapAnchor{15, 15}, 0});
  EXPECT_EQ(code_of([&] { impute_gap(z, 5); }), ErrorCode::GapNotRectangular);
  // Explicit gap rectangle that includes observed cells.
  EXPECT_EQ(code_of([&] { impute_gap(z, GapRect{15, 15, 4, 4}); }), ErrorCode::GapNotRectangular);
  // A missing cell inside the neighbourhood.
  Grid nb = z;
  nb.set_missing(12, 12);
  EXPECT_EQ(code_of([&] { impute_gap(nb, GapRect{15, 15, 3, 3}); }), ErrorCode::GapNotRectangular);
  // Fully observed grid passes through.
  EXPECT_EQ(impute_gap(truth).observed_count(), truth.size());
}
