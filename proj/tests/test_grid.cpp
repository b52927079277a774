#include <gtest/gtest.h>

#include <algorithm>
#include <functional>
#include <numeric>
#include <cmath>
#include <limits>
#include <random>

#include "codisp/error.hpp"
#include "codisp/grid.hpp"

using namespace codisp;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no codisp::Error thrown";
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST(Grid, MaskedMeanExamples) {
  Grid g(2, 2, {1, 2, 3, 4});
  EXPECT_DOUBLE_EQ(masked_mean(g), 2.5);
  g.set_missing(0, 0);
  EXPECT_DOUBLE_EQ(masked_mean(g), 3.0);
  EXPECT_DOUBLE_EQ(masked_mean(Grid(3, 3, 7.0)), 7.0);
}

TEST(Grid, AllMissingThrows) {
  Grid g(2, 2, {1, 2, 3, 4}, {0, 0, 0, 0});
  EXPECT_EQ(code_of([&] { masked_mean(g); }), ErrorCode::AllMissing);
}

TEST(Grid, MaskedValuesStoredAsZero) {
  Grid g(1, 3, {5, 6, 7}, {1, 0, 1});
  EXPECT_EQ(g.value(0, 1), 0.0);
  EXPECT_FALSE(g.observed(0, 1));
  EXPECT_EQ(g.observed_count(), 2u);
}

TEST(Grid, RejectsNonFiniteAndEmpty) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(Grid(1, 2, {1.0, nan}), Error);
  // NaN under a zero mask is never read.
  EXPECT_NO_THROW(Grid(1, 2, {1.0, nan}, {1, 0}));
  EXPECT_THROW(Grid(0, 3), Error);
  Grid g(2, 2);
  EXPECT_THROW(g.set(0, 0, std::numeric_limits<double>::infinity()), Error);
}

TEST(Grid, MaskedMeanPermutationInvariant) {
  std::mt19937_64 rng(3);
  std::vector<double> v(30);
  std::vector<std::uint8_t> m(30);
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] = std::uniform_real_distribution<double>(-5, 5)(rng);
    m[i] = i % 4 != 0;
  }
  const double before = masked_mean(Grid(5, 6, v, m));
  std::vector<std::size_t> perm(30);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<double> v2(30);
  std::vector<std::uint8_t> m2(30);
  for (std::size_t i = 0; i < 30; ++i) {
    v2[i] = v[perm[i]];
    m2[i] = m[perm[i]];
  }
  EXPECT_NEAR(masked_mean(Grid(6, 5, v2, m2)), before, 1e-14);
}

TEST(Grid, MaskedVariance) {
  Grid g(1, 4, {1, 2, 3, 100}, {1, 1, 1, 0});
  EXPECT_DOUBLE_EQ(masked_variance(g), 1.0);
}

TEST(LagWindow, OneByOne) {
  const LagWindow w = build_lag_window(1, 1);
  const std::vector<Lag> expected{{1, 0}, {-1, 1}, {0, 1}, {1, 1}};
  EXPECT_EQ(w.lags(), expected);
}

TEST(LagWindow, Counts) {
  EXPECT_EQ(build_lag_window(2, 1).size(), 7u);
  for (int mx = 1; mx <= 5; ++mx) {
    for (int my = 1; my <= 5; ++my) {
      const std::size_t n = static_cast<std::size_t>((2 * mx + 1) * (my + 1) - 1 - mx);
      EXPECT_EQ(build_lag_window(mx, my).size(), n);
    }
  }
}

TEST(LagWindow, OrderedAndSymmetricComplete) {
  const LagWindow w = build_lag_window(3, 2);
  for (std::size_t i = 1; i < w.size(); ++i) {
    const Lag a = w.lags()[i - 1], b = w.lags()[i];
    EXPECT_TRUE(a.dy < b.dy || (a.dy == b.dy && a.dx < b.dx));
  }
  // Every lag of the full rectangle except the origin appears either as h or -h.
  for (int dy = -2; dy <= 2; ++dy) {
    for (int dx = -3; dx <= 3; ++dx) {
      if (dx == 0 && dy == 0) continue;
      const bool has = std::count(w.lags().begin(), w.lags().end(), Lag{dx, dy}) == 1;
      const bool has_neg = std::count(w.lags().begin(), w.lags().end(), Lag{-dx, -dy}) == 1;
      EXPECT_NE(has, has_neg) << dx << "," << dy;
    }
  }
}

TEST(LagWindow, InvalidBounds) {
  EXPECT_EQ(code_of([] { build_lag_window(2, 0); }), ErrorCode::InvalidWindow);
  EXPECT_EQ(code_of([] { build_lag_window(0, 2); }), ErrorCode::InvalidWindow);
}

TEST(LagWindow, DefaultMaxLag) {
  EXPECT_EQ(default_max_lag(128, 200), 32);
  EXPECT_EQ(default_max_lag(3, 3), 1);
}

TEST(MarkedPointSet, MarksAndSubset) {
  MarkedPointSet p({{0, 0}, {1, 2}, {3, 1}});
  EXPECT_EQ(p.extent().xmax, 3.0);
  EXPECT_EQ(p.extent().ymax, 2.0);
  p.add_mark("dbh", {10, 20, 30});
  EXPECT_TRUE(p.has_mark("dbh"));
  EXPECT_EQ(code_of([&] { p.mark("Al"); }), ErrorCode::UnknownMark);
  EXPECT_THROW(p.add_mark("bad", {1, 2}), Error);
  const std::vector<std::size_t> idx{2, 0};
  const MarkedPointSet s = p.subset(idx);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s.points()[0], (Point{3, 1}));
  EXPECT_EQ(s.mark("dbh")[1], 10.0);
}

TEST(MarkedPointSet, PointsOutsideExtentRejected) {
  EXPECT_THROW(MarkedPointSet({{5, 5}}, Extent{0, 1, 0, 1}), Error);
}

TEST(MapSummary, IgnoresUndefined) {
  CodispMap m;
  m.window = build_lag_window(1, 1);
  m.values = {0.5, std::numeric_limits<double>::quiet_NaN(), 1.0, -0.5};
  m.pair_counts = {40, 2, 40, 40};
  const MapSummary s = summarize(m);
  EXPECT_DOUBLE_EQ(s.mean, 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(s.min, -0.5);
  EXPECT_DOUBLE_EQ(s.max, 1.0);
  EXPECT_DOUBLE_EQ(s.defined_fraction, 0.75);
}
