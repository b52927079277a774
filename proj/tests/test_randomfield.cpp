#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "codisp/error.hpp"
#include "codisp/randomfield.hpp"
#include "codisp/rng.hpp"

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

double colocated_correlation(const Grid& x, const Grid& y) {
  const double mx = masked_mean(x), my = masked_mean(y);
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < x.cols(); ++c) {
      const double a = x.value(r, c) - mx, b = y.value(r, c) - my;
      sxy += a * b;
      sxx += a * a;
      syy += b * b;
    }
  }
  return sxy / std::sqrt(sxx * syy);
}

// Empirical semivariogram along the column axis at lag h.
double row_semivariogram(const Grid& g, std::size_t h) {
  double s = 0;
  std::size_t n = 0;
  for (std::size_t r = 0; r < g.rows(); ++r) {
    for (std::size_t c = 0; c + h < g.cols(); ++c) {
      const double d = g.value(r, c + h) - g.value(r, c);
      s += d * d;
      ++n;
    }
  }
  return 0.5 * s / static_cast<double>(n);
}

}  // namespace

TEST(Matern, ZeroDistanceIsOne) {
  for (double nu : {0.3, 0.5, 1.0, 1.5, 2.5, 3.7}) {
    for (double a : {0.01, 1.0, 7.0}) EXPECT_EQ(matern_correlation(0.0, nu, a), 1.0);
  }
}

TEST(Matern, HalfIsExponential) {
  for (double a : {0.05, 0.5, 2.0}) {
    for (double d = 0.0; d < 30.0; d += 0.37) {
      EXPECT_NEAR(matern_correlation(d, 0.5, a), std::exp(-a * d), 1e-12);
    }
  }
}

TEST(Matern, ThreeHalvesAtOne) {
  EXPECT_NEAR(matern_correlation(1.0, 1.5, 1.0), 2.0 * std::exp(-1.0), 1e-12);
  EXPECT_NEAR(matern_correlation(1.0, 1.5, 1.0), 0.73576, 1e-5);
}

TEST(Matern, BesselPathMatchesClosedForms) {
  for (double nu : {0.5, 1.5, 2.5}) {
    for (double x = 0.01; x < 40.0; x *= 1.3) {
      const double closed = matern_correlation(x, nu, 1.0);
      const double bessel = detail::matern_bessel(x, nu, 1.0);
      EXPECT_NEAR(bessel, closed, 1e-10 * std::max(closed, 1e-300)) << nu << " " << x;
    }
  }
}

TEST(Matern, BoundedAndMonotone) {
  for (double nu : {0.25, 0.5, 0.8, 1.5, 2.0, 2.5, 4.0}) {
    for (double a : {0.1, 1.0}) {
      double prev = 1.0;
      for (double d = 0.0; d <= 20.0 / a; d += 0.01 / a) {
        const double m = matern_correlation(d, nu, a);
        ASSERT_GT(m, 0.0);
        ASSERT_LE(m, 1.0);
        ASSERT_LE(m, prev);
        prev = m;
      }
    }
  }
}

TEST(Matern, ParsimoniousBound) {
  EXPECT_EQ(parsimonious_rho_bound(1.2, 1.2), 1.0);
  EXPECT_NEAR(parsimonious_rho_bound(0.5, 1.5), std::sqrt(0.75), 1e-15);
  EXPECT_EQ(code_of([] { MaternParams::parsimonious(0.5, 1.5, 1, 1, 1, 1, 1, 0.9); }),
            ErrorCode::InadmissibleParams);
  EXPECT_NO_THROW(MaternParams::parsimonious(0.5, 1.5, 1, 1, 1, 1, 1, 0.86));
  EXPECT_NO_THROW(MaternParams::parsimonious(0.5, 0.5, 1, 1, 1, 1, 1, -1.0));
  EXPECT_THROW(MaternParams::parsimonious(0.5, 0.5, 0, 1, 1, 1, 1, 0.0), Error);
  EXPECT_THROW(MaternParams::parsimonious(0.5, 0.5, 1, 1, 1, -1, 1, 0.0), Error);
  MaternParams p = MaternParams::parsimonious(0.5, 1.5, 1, 1, 1, 1, 1, 0.5);
  p.nu12 = 0.7;
  EXPECT_THROW(p.validate(), Error);
}

TEST(Covariance, AtOriginAndSymmetry) {
  const MaternParams p = MaternParams::parsimonious(0.5, 1.5, 0.3, 0.4, 0.35, 4.0, 9.0, 0.5);
  const Eigen::Matrix2d c0 = bivariate_covariance(0, 0, p);
  EXPECT_DOUBLE_EQ(c0(0, 0), 4.0);
  EXPECT_DOUBLE_EQ(c0(1, 1), 9.0);
  EXPECT_DOUBLE_EQ(c0(0, 1), 0.5 * 2.0 * 3.0);
  EXPECT_GE(c0(0, 0) * c0(1, 1) - c0(0, 1) * c0(1, 0), 0.0);
  const Eigen::Matrix2d c = bivariate_covariance(2.0, -1.0, p);
  EXPECT_EQ(c(0, 1), c(1, 0));
  EXPECT_NEAR(c(0, 0), 4.0 * matern_correlation(std::sqrt(5.0), 0.5, 0.3), 1e-14);
  EXPECT_NEAR(c(1, 1), 9.0 * matern_correlation(std::sqrt(5.0), 1.5, 0.4), 1e-14);
  EXPECT_NEAR(c(0, 1), 3.0 * matern_correlation(std::sqrt(5.0), 1.0, 0.35), 1e-14);
}

TEST(Covariance, ZeroRhoAndExponentialCross) {
  const MaternParams z = MaternParams::parsimonious(0.5, 0.5, 0.5, 0.5, 0.5, 1, 1, 0.0);
  for (double h = 0; h < 10; h += 0.5) EXPECT_EQ(bivariate_covariance(h, h, z)(0, 1), 0.0);
  const MaternParams p = MaternParams::parsimonious(0.5, 0.5, 0.5, 0.5, 0.5, 1, 1, 0.8);
  for (double h = 0; h < 10; h += 0.5) {
    EXPECT_NEAR(bivariate_covariance(h, 0, p)(0, 1), 0.8 * std::exp(-0.5 * h), 1e-13);
  }
}

TEST(Simulation, ColocatedCorrelation) {
  for (double rho : {0.0, 0.8}) {
    const MaternParams p = MaternParams::parsimonious(0.5, 0.5, 0.1, 0.1, 0.1, 1, 1, rho);
    double sum = 0;
    for (std::uint64_t s = 0; s < 20; ++s) {
      const FieldPair f = simulate_bivariate_grf(64, 64, p, SimulationMethod::Mixing, derive_seed(77, s));
      sum += colocated_correlation(f.x, f.y);
    }
    EXPECT_NEAR(sum / 20.0, rho, 0.05);
  }
}

TEST(Simulation, MarginalVarianceAndMean) {
  const MaternParams p = MaternParams::parsimonious(0.5, 0.5, 0.5, 0.5, 0.5, 2.0, 3.0, 0.5, 10.0, -4.0);
  double vx = 0, vy = 0, mx = 0, my = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const FieldPair f = simulate_bivariate_grf(64, 64, p, SimulationMethod::Mixing, s);
    vx += masked_variance(f.x) / 20;
    vy += masked_variance(f.y) / 20;
    mx += masked_mean(f.x) / 20;
    my += masked_mean(f.y) / 20;
  }
  EXPECT_NEAR(vx, 2.0, 0.3);
  EXPECT_NEAR(vy, 3.0, 0.45);
  EXPECT_NEAR(mx, 10.0, 0.1);
  EXPECT_NEAR(my, -4.0, 0.1);
}

TEST(Simulation, MixingRequiresEqualParams) {
  const MaternParams p = MaternParams::parsimonious(0.5, 1.5, 0.5, 0.5, 0.5, 1, 1, 0.5);
  EXPECT_EQ(code_of([&] { simulate_bivariate_grf(8, 8, p, SimulationMethod::Mixing, 0); }),
            ErrorCode::MethodRequiresEqualParams);
  const MaternParams q = MaternParams::parsimonious(0.5, 0.5, 0.5, 0.6, 0.5, 1, 1, 0.5);
  EXPECT_EQ(code_of([&] { simulate_bivariate_grf(8, 8, q, SimulationMethod::Mixing, 0); }),
            ErrorCode::MethodRequiresEqualParams);
  EXPECT_NO_THROW(simulate_bivariate_grf(8, 8, p, SimulationMethod::Cholesky, 0));
  EXPECT_THROW(simulate_bivariate_grf(200, 200, p, SimulationMethod::Cholesky, 0), Error);
}

TEST(Simulation, Deterministic) {
  const MaternParams p = MaternParams::parsimonious(1.5, 1.5, 0.2, 0.2, 0.2, 1, 1, 0.3);
  for (auto m : {SimulationMethod::Mixing, SimulationMethod::Cholesky}) {
    const FieldPair a = simulate_bivariate_grf(12, 10, p, m, 5), b = simulate_bivariate_grf(12, 10, p, m, 5);
    for (std::size_t r = 0; r < 12; ++r) {
      for (std::size_t c = 0; c < 10; ++c) {
        EXPECT_EQ(a.x.value(r, c), b.x.value(r, c));
        EXPECT_EQ(a.y.value(r, c), b.y.value(r, c));
      }
    }
  }
}

// Both methods should reproduce the theoretical semivariogram s2 (1 - M(h)),
// for which the increment estimator is unbiased.
TEST(Simulation, MethodsAgreeOnVariogram) {
  const double a = 0.3, nu = 1.5;
  const MaternParams p = MaternParams::parsimonious(nu, nu, a, a, a, 1, 1, 0.6);
  const int reps = 20;
  for (std::size_t h = 1; h <= 4; ++h) {
    double chol = 0, mix = 0, chol_sq = 0, mix_sq = 0;
    for (int s = 0; s < reps; ++s) {
      const double gc = row_semivariogram(simulate_bivariate_grf(16, 16, p, SimulationMethod::Cholesky, s).x, h);
      const double gm = row_semivariogram(simulate_bivariate_grf(16, 16, p, SimulationMethod::Mixing, 1000 + s).x, h);
      chol += gc;
      mix += gm;
      chol_sq += gc * gc;
      mix_sq += gm * gm;
    }
    chol /= reps;
    mix /= reps;
    const double se = std::sqrt((chol_sq / reps - chol * chol + mix_sq / reps - mix * mix) / reps);
    const double theory = 1.0 - matern_correlation(static_cast<double>(h), nu, a);
    EXPECT_LT(std::abs(chol - mix), 4.0 * se + 1e-3) << "h=" << h;
    EXPECT_NEAR(chol, theory, 0.25 * theory) << "h=" << h;
    EXPECT_NEAR(mix, theory, 0.25 * theory) << "h=" << h;
  }
}

TEST(Simulation, CirculantEmbeddingIsClean) {
  const CirculantSampler s(64, 64, 0.5, 0.1);
  EXPECT_GE(s.torus_rows(), 128u);
  EXPECT_LT(s.clipped_mass(), 1e-6);
  const auto [z1, z2] = s.sample_pair(3);
  EXPECT_EQ(z1.rows(), 64u);
  EXPECT_EQ(z2.cols(), 64u);
}

TEST(Simulation, UnivariateField) {
  double v = 0;
  for (std::uint64_t s = 0; s < 20; ++s) v += masked_variance(simulate_grf(64, 64, 2.5, 0.8, 5.0, 1.0, s)) / 20;
  EXPECT_NEAR(v, 5.0, 0.75);
}
