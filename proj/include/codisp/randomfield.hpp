#pragma once

// Matérn correlation and simulation of bivariate Gaussian random fields with
// the parsimonious bivariate Matérn cross-covariance.
//
//   M(d | nu, a) = 2^(1-nu) / Gamma(nu) * (a d)^nu * K_nu(a d)
//   C11(h) = s1^2 M(h | nu1, a1)
//   C22(h) = s2^2 M(h | nu2, a2)
//   C12(h) = C21(h) = rho12 s1 s2 M(h | nu12, a12)
//
// Lattice cells are unit spaced; distances are Euclidean in cell units.

#include <complex>
#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "codisp/grid.hpp"

namespace codisp {

struct MaternParams {
  double nu1 = 0.5;
  double nu2 = 0.5;
  double nu12 = 0.5;
  double a1 = 1.0;
  double a2 = 1.0;
  double a12 = 1.0;
  double sigma1_sq = 1.0;
  double sigma2_sq = 1.0;
  double rho12 = 0.0;
  double mu1 = 0.0;
  double mu2 = 0.0;

  /// Parameters with nu12 = (nu1 + nu2) / 2. Throws InadmissibleParams.
  static MaternParams parsimonious(double nu1, double nu2, double a1, double a2, double a12,
                                   double sigma1_sq, double sigma2_sq, double rho12,
                                   double mu1 = 0.0, double mu2 = 0.0);

  /// Positivity, nu12 = (nu1 + nu2) / 2 and the colocated-correlation bound.
  /// Throws InadmissibleParams.
  void validate() const;
};

/// sqrt(nu1 nu2) / ((nu1 + nu2) / 2); equals 1 when nu1 == nu2.
double parsimonious_rho_bound(double nu1, double nu2);

/// M(d | nu, a) with M(0) = 1. Closed forms for nu in {0.5, 1.5, 2.5}.
double matern_correlation(double distance, double nu, double a);

namespace detail {
/// General-nu evaluation through the modified Bessel function K_nu; used by
/// matern_correlation for every nu without a closed form.
double matern_bessel(double distance, double nu, double a);
}  // namespace detail

/// 2 x 2 covariance matrix at planar offset (hx, hy). Throws InadmissibleParams.
Eigen::Matrix2d bivariate_covariance(double hx, double hy, const MaternParams& p);

enum class SimulationMethod { Cholesky, Mixing };

struct FieldPair {
  Grid x;
  Grid y;
};

/// Largest rows * cols accepted by the Cholesky method.
inline constexpr std::size_t kMaxCholeskyCells = 16384;

/// Cholesky: exact dense factorization of the 2n x 2n joint covariance;
/// on failure retries once with 1e-10 * mean(diagonal) jitter, then throws
/// NotPositiveDefinite.
/// Mixing: X = mu1 + s1 Z1, Y = mu2 + s2 (rho Z1 + sqrt(1 - rho^2) Z2) for
/// independent unit fields Z1, Z2; requires nu1 = nu2 = nu12 and
/// a1 = a2 = a12 (else MethodRequiresEqualParams).
FieldPair simulate_bivariate_grf(std::size_t rows, std::size_t cols, const MaternParams& p,
                                 SimulationMethod method, std::uint64_t seed);

/// Unit-variance, zero-mean stationary Matérn field sampler on a rows x cols
/// lattice by circulant embedding. The embedding torus is the smallest power
/// of two covering twice each side, doubled (up to three times) while the
/// spectrum has eigenvalues below -1e-10 * max; any negative eigenvalues left
/// after that are clipped to zero and reported by `clipped_mass()`.
class CirculantSampler {
 public:
  CirculantSampler(std::size_t rows, std::size_t cols, double nu, double a);

  /// Two independent fields from one complex transform.
  std::pair<Grid, Grid> sample_pair(std::uint64_t seed) const;

  std::size_t torus_rows() const noexcept { return m1_; }
  std::size_t torus_cols() const noexcept { return m2_; }
  /// Sum of clipped negative eigenvalues relative to the eigenvalue sum.
  double clipped_mass() const noexcept { return clipped_mass_; }

 private:
  std::size_t rows_, cols_;
  std::size_t m1_ = 0, m2_ = 0;
  std::vector<double> sqrt_eigen_;  // sqrt(lambda / (m1 m2))
  double clipped_mass_ = 0.0;
};

/// Univariate Matérn field with the given mean and variance.
Grid simulate_grf(std::size_t rows, std::size_t cols, double nu, double a, double sigma2,
                  double mean, std::uint64_t seed);

}  // namespace codisp
