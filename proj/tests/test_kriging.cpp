#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

#include "codisp/error.hpp"
#include "codisp/kriging.hpp"

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

std::vector<Point> scatter(std::size_t n, std::mt19937_64& rng, double extent = 100.0) {
  std::uniform_real_distribution<double> u(0.0, extent);
  std::vector<Point> p;
  for (std::size_t i = 0; i < n; ++i) p.push_back({u(rng), u(rng)});
  return p;
}

MarkedPointSet with_mark(std::vector<Point> pts, std::vector<double> v, const std::string& name = "z") {
  MarkedPointSet p(std::move(pts));
  p.add_mark(name, std::move(v));
  return p;
}

// Smooth positive surface with a little noise.
std::vector<double> smooth_values(const std::vector<Point>& pts, std::mt19937_64& rng) {
  std::normal_distribution<double> z(0.0, 0.1);
  std::vector<double> v;
  for (const Point& p : pts) v.push_back(10.0 + 2.0 * std::sin(p.x / 15.0) + std::cos(p.y / 20.0) + z(rng));
  return v;
}

}  // namespace

TEST(BoxCox, Examples) {
  EXPECT_DOUBLE_EQ(boxcox(5.0, 1.0), 4.0);
  EXPECT_DOUBLE_EQ(boxcox(std::exp(1.0), 0.0), 1.0);
  EXPECT_DOUBLE_EQ(boxcox(9.0, 0.5), 4.0);
  EXPECT_EQ(code_of([] { boxcox(0.0, 0.5); }), ErrorCode::NonPositiveInput);
  EXPECT_EQ(code_of([] { boxcox(-1.0, 1.0); }), ErrorCode::NonPositiveInput);
}

TEST(BoxCox, RoundTrip) {
  for (double lambda : {0.0, 0.5, 1.0}) {
    for (double y = 0.1; y <= 1e4; y *= 1.7) {
      EXPECT_NEAR(boxcox_inverse(boxcox(y, lambda), lambda), y, 1e-10 * std::max(1.0, y));
    }
  }
  EXPECT_EQ(boxcox_inverse(-10.0, 0.5), 0.0);
}

TEST(Trend, ExactQuadratic) {
  std::mt19937_64 rng(1);
  const auto pts = scatter(50, rng);
  std::vector<double> v;
  for (const Point& p : pts) v.push_back(1.0 - 0.5 * p.x + 0.25 * p.y + 0.01 * p.x * p.x - 0.02 * p.y * p.y + 0.003 * p.x * p.y);
  const TrendFit f = fit_trend_poly2(pts, v);
  for (double r : f.residuals) EXPECT_LT(std::abs(r), 1e-8);
  EXPECT_NEAR(f.trend(3.0, 4.0), 1.0 - 1.5 + 1.0 + 0.09 - 0.32 + 0.036, 1e-9);
}

TEST(Trend, ConstantMarks) {
  std::mt19937_64 rng(2);
  const auto pts = scatter(30, rng);
  const TrendFit f = fit_trend_poly2(pts, std::vector<double>(30, 6.5));
  EXPECT_NEAR(f.trend.beta[0], 6.5, 1e-9);
  for (int i = 1; i < 6; ++i) EXPECT_NEAR(f.trend.beta[i], 0.0, 1e-9);
}

TEST(Trend, ResidualsOrthogonalToDesign) {
  std::mt19937_64 rng(3);
  const auto pts = scatter(100, rng, 1.0);
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<double> v;
  for (std::size_t i = 0; i < pts.size(); ++i) v.push_back(z(rng));
  const TrendFit f = fit_trend_poly2(pts, v);
  double dots[6] = {};
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double x = pts[i].x, y = pts[i].y, r = f.residuals[i];
    const double cols[6] = {1, x, y, x * x, y * y, x * y};
    for (int k = 0; k < 6; ++k) dots[k] += cols[k] * r;
  }
  for (double d : dots) EXPECT_LT(std::abs(d), 1e-8);
}

TEST(Trend, RankDeficient) {
  std::vector<Point> line;
  for (int i = 0; i < 10; ++i) line.push_back({double(i), 2.0 * i});
  EXPECT_EQ(code_of([&] { fit_trend_poly2(line, std::vector<double>(10, 1.0)); }), ErrorCode::RankDeficient);
  std::vector<Point> few{{0, 0}, {1, 0}, {0, 1}, {1, 1}, {2, 3}};
  EXPECT_EQ(code_of([&] { fit_trend_poly2(few, std::vector<double>(5, 1.0)); }), ErrorCode::RankDeficient);
}

TEST(EmpiricalVariogram, ConstantAndTwoPoints) {
  std::mt19937_64 rng(4);
  const auto pts = scatter(40, rng);
  for (const auto& b : empirical_variogram(pts, std::vector<double>(40, 3.0), 10.0, 100.0)) EXPECT_EQ(b.gamma, 0.0);
  const std::vector<Point> two{{0, 0}, {3, 0}};
  const auto bins = empirical_variogram(two, std::vector<double>{1.0, 5.0}, 1.0, 10.0);
  ASSERT_EQ(bins.size(), 1u);
  EXPECT_DOUBLE_EQ(bins[0].gamma, 8.0);
  EXPECT_DOUBLE_EQ(bins[0].distance, 3.0);
  EXPECT_EQ(bins[0].pairs, 1u);
}

TEST(EmpiricalVariogram, WhiteNoiseIsFlat) {
  std::mt19937_64 rng(5);
  const auto pts = scatter(500, rng);
  std::normal_distribution<double> z(0.0, 2.0);
  std::vector<double> v;
  for (std::size_t i = 0; i < 500; ++i) v.push_back(z(rng));
  const auto bins = empirical_variogram(pts, v, 5.0, 60.0);
  EXPECT_GE(bins.size(), 10u);
  for (const auto& b : bins) EXPECT_NEAR(b.gamma, 4.0, 0.8) << b.distance;
}

TEST(VariogramModel, Families) {
  for (auto f : {VariogramFamily::Exponential, VariogramFamily::Spherical, VariogramFamily::Gaussian,
                 VariogramFamily::Wave}) {
    const VariogramModel m{f, 0.5, 2.0, 10.0};
    EXPECT_EQ(m(0.0), 0.0);
    EXPECT_NEAR(m(1e-9), 0.5, 1e-6);
    EXPECT_EQ(m.between_sites(0.0), 0.5);
    EXPECT_EQ(parse_variogram_family(to_string(f)), f);
  }
  EXPECT_NEAR((VariogramModel{VariogramFamily::Exponential, 0, 2, 10})(10.0), 2.0 * (1 - std::exp(-1.0)), 1e-15);
  EXPECT_EQ((VariogramModel{VariogramFamily::Spherical, 1, 2, 10})(25.0), 3.0);
  EXPECT_NEAR((VariogramModel{VariogramFamily::Gaussian, 0, 1, 2})(2.0), 1 - std::exp(-1.0), 1e-15);
  EXPECT_NEAR((VariogramModel{VariogramFamily::Wave, 0, 1, 2})(3.0), 1 - 2.0 * std::sin(1.5) / 3.0, 1e-15);
  EXPECT_THROW(parse_variogram_family("cubic"), Error);
}

TEST(VariogramFit, RoundTripsNoiselessBins) {
  for (auto f : {VariogramFamily::Exponential, VariogramFamily::Spherical, VariogramFamily::Gaussian,
                 VariogramFamily::Wave}) {
    for (double nugget : {0.0, 0.3}) {
      const VariogramModel truth{f, nugget, 2.0, 10.0};
      std::vector<VariogramBin> bins;
      for (int i = 1; i <= 15; ++i) {
        const double d = 2.0 * i;
        bins.push_back({d, truth(d), static_cast<std::size_t>(50 + 10 * i)});
      }
      const VariogramModel fit = fit_variogram_wls(bins, f);
      EXPECT_NEAR(fit.nugget, nugget, 1e-4) << to_string(f);
      EXPECT_NEAR(fit.partial_sill, 2.0, 1e-4) << to_string(f);
      EXPECT_NEAR(fit.range, 10.0, 1e-4) << to_string(f);
    }
  }
}

TEST(VariogramFit, FixedNuggetAndGuards) {
  const VariogramModel truth{VariogramFamily::Wave, 4000.0, 30000.0, 60.0};
  std::vector<VariogramBin> bins;
  for (int i = 1; i <= 12; ++i) bins.push_back({25.0 * i, truth(25.0 * i) * (1 + 0.01 * (i % 3)), 100});
  const VariogramModel fit = fit_variogram_wls(bins, VariogramFamily::Wave, 4000.0);
  EXPECT_EQ(fit.nugget, 4000.0);
  EXPECT_GT(fit.partial_sill, 0.0);

  const std::vector<VariogramBin> one{{1.0, 1.0, 10}};
  EXPECT_EQ(code_of([&] { fit_variogram_wls(one, VariogramFamily::Exponential); }), ErrorCode::TooFewBins);
  const std::vector<VariogramBin> flat{{1, 0, 10}, {2, 0, 10}, {3, 0, 10}};
  EXPECT_EQ(code_of([&] { fit_variogram_wls(flat, VariogramFamily::Exponential); }), ErrorCode::DegenerateFit);
}

TEST(Kriging, ExactInterpolationAndWeights) {
  std::mt19937_64 rng(6);
  const auto pts = scatter(60, rng);
  const auto v = smooth_values(pts, rng);
  const OrdinaryKriging ok(pts, v, {VariogramFamily::Exponential, 0.0, 1.0, 20.0});
  for (std::size_t i = 0; i < pts.size(); i += 7) EXPECT_NEAR(ok.predict(pts[i]), v[i], 1e-8);
  const auto targets = scatter(30, rng);
  const auto batch = ok.predict(targets);
  for (std::size_t t = 0; t < targets.size(); ++t) {
    const auto w = ok.weights(targets[t]);
    double s = 0, pred = 0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      s += w[i];
      pred += w[i] * v[i];
    }
    EXPECT_NEAR(s, 1.0, 1e-10);
    EXPECT_NEAR(batch[t], pred, 1e-9);
    EXPECT_EQ(batch[t], ok.predict(targets[t]));
  }
}

TEST(Kriging, ConstantData) {
  std::mt19937_64 rng(7);
  const auto pts = scatter(25, rng);
  const OrdinaryKriging ok(pts, std::vector<double>(25, 4.25), {VariogramFamily::Spherical, 0.1, 1.0, 30.0});
  for (const Point& t : scatter(20, rng)) EXPECT_NEAR(ok.predict(t), 4.25, 1e-10);
}

TEST(Kriging, ThreePointHandSolve) {
  const std::vector<Point> pts{{0, 0}, {4, 0}, {0, 3}};
  const std::vector<double> v{1.0, 3.0, -2.0};
  const VariogramModel m{VariogramFamily::Exponential, 0.0, 1.5, 2.0};
  const Point t{1.0, 1.0};
  // Assemble [[G 1][1' 0]] [w; mu] = [g; 1] and solve by Gaussian elimination.
  double a[4][5] = {};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) a[i][j] = m(std::hypot(pts[i].x - pts[j].x, pts[i].y - pts[j].y));
    a[i][3] = 1.0;
    a[3][i] = 1.0;
    a[i][4] = m(std::hypot(pts[i].x - t.x, pts[i].y - t.y));
  }
  a[3][4] = 1.0;
  for (int c = 0; c < 4; ++c) {
    int piv = c;
    for (int r = c + 1; r < 4; ++r) {
      if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
    }
    std::swap(a[c], a[piv]);
    for (int r = 0; r < 4; ++r) {
      if (r == c) continue;
      const double f = a[r][c] / a[c][c];
      for (int k = c; k < 5; ++k) a[r][k] -= f * a[c][k];
    }
  }
  double pred = 0;
  const OrdinaryKriging ok(pts, v, m);
  const auto w = ok.weights(t);
  for (int i = 0; i < 3; ++i) {
    const double wi = a[i][4] / a[i][i];
    EXPECT_NEAR(w[i], wi, 1e-12);
    pred += wi * v[i];
  }
  EXPECT_NEAR(ok.predict(t), pred, 1e-12);
}

TEST(Kriging, DuplicateSites) {
  const std::vector<Point> pts{{0, 0}, {1, 0}, {0, 0}, {0, 1}};
  const std::vector<double> v{1, 2, 3, 4};
  EXPECT_EQ(code_of([&] { OrdinaryKriging(pts, v, {VariogramFamily::Exponential, 0.0, 1.0, 1.0}); }),
            ErrorCode::DuplicatePointsWithZeroNugget);
  const OrdinaryKriging ok(pts, v, {VariogramFamily::Exponential, 0.5, 1.0, 1.0});
  EXPECT_TRUE(std::isfinite(ok.predict({0.5, 0.5})));
}

TEST(Pipeline, IdentityTransformMatchesOrdinaryKriging) {
  std::mt19937_64 rng(8);
  const auto pts = scatter(80, rng);
  const auto v = smooth_values(pts, rng);
  const MarkedPointSet soil = with_mark(pts, v, "Ca");
  const auto targets = scatter(40, rng);
  const KrigeResult r = krige_pipeline(soil, "Ca", {1.0, Detrend::None}, {VariogramFamily::Exponential}, targets);
  // Kriging the shifted values (y - 1) with the fitted model, then adding 1 back.
  std::vector<double> shifted(v);
  for (double& x : shifted) x -= 1.0;
  const auto direct = ordinary_krige(with_mark(pts, shifted), "z", r.model, targets);
  for (std::size_t i = 0; i < targets.size(); ++i) EXPECT_NEAR(r.predictions[i], direct[i] + 1.0, 1e-9);
}

TEST(Pipeline, ReproducesDataAtSitesWithZeroNugget) {
  std::mt19937_64 rng(9);
  const auto pts = scatter(70, rng);
  const auto v = smooth_values(pts, rng);
  const MarkedPointSet soil = with_mark(pts, v, "P");
  for (double lambda : {0.0, 0.5, 1.0}) {
    const KrigeResult r = krige_pipeline(soil, "P", {lambda, Detrend::Poly2}, {VariogramFamily::Gaussian, 0.0}, pts);
    EXPECT_EQ(r.model.nugget, 0.0);
    for (std::size_t i = 0; i < pts.size(); ++i) EXPECT_NEAR(r.predictions[i], v[i], 1e-6 * v[i]) << lambda;
  }
}

TEST(Pipeline, UnknownElementAndNonPositive) {
  std::mt19937_64 rng(10);
  const auto pts = scatter(30, rng);
  std::vector<double> v = smooth_values(pts, rng);
  const std::vector<Point> t{{1, 1}};
  EXPECT_EQ(code_of([&] { krige_pipeline(with_mark(pts, v, "Al"), "Ca", {}, {}, t); }), ErrorCode::UnknownMark);
  v[3] = -1.0;
  EXPECT_EQ(code_of([&] { krige_pipeline(with_mark(pts, v, "Al"), "Al", {0.5, Detrend::None}, {}, t); }),
            ErrorCode::NonPositiveInput);
}
