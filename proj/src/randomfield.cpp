#include "codisp/randomfield.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numeric>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "codisp/error.hpp"
#include "codisp/rng.hpp"

namespace codisp {

namespace {

bool nearly_equal(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(a)); }

}  // namespace

double parsimonious_rho_bound(double nu1, double nu2) {
  return std::sqrt(nu1 * nu2) / (0.5 * (nu1 + nu2));
}

MaternParams MaternParams::parsimonious(double nu1, double nu2, double a1, double a2, double a12,
                                        double sigma1_sq, double sigma2_sq, double rho12, double mu1,
                                        double mu2) {
  MaternParams p{nu1, nu2, 0.5 * (nu1 + nu2), a1, a2, a12, sigma1_sq, sigma2_sq, rho12, mu1, mu2};
  p.validate();
  return p;
}

void MaternParams::validate() const {
  const auto positive = {nu1, nu2, nu12, a1, a2, a12, sigma1_sq, sigma2_sq};
  for (double v : positive) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw Error(ErrorCode::InadmissibleParams, "smoothness, inverse range and variances must be > 0");
    }
  }
  if (!std::isfinite(mu1) || !std::isfinite(mu2)) {
    throw Error(ErrorCode::InadmissibleParams, "means must be finite");
  }
  if (!nearly_equal(nu12, 0.5 * (nu1 + nu2))) {
    throw Error(ErrorCode::InadmissibleParams, "cross smoothness must equal (nu1 + nu2) / 2");
  }
  if (!(std::abs(rho12) <= parsimonious_rho_bound(nu1, nu2))) {
    throw Error(ErrorCode::InadmissibleParams, "|rho12| exceeds the parsimonious bound");
  }
}

namespace detail {

double matern_bessel(double distance, double nu, double a) {
  const double x = a * distance;
  if (x == 0.0) return 1.0;
  if (x > 700.0) return 0.0;
  const double k = std::cyl_bessel_k(nu, x);
  const double log_m = (1.0 - nu) * std::log(2.0) - std::lgamma(nu) + nu * std::log(x) + std::log(k);
  return std::min(1.0, std::exp(log_m));
}

}  // namespace detail

double matern_correlation(double distance, double nu, double a) {
  const double x = a * distance;
  if (x == 0.0) return 1.0;
  if (nu == 0.5) return std::exp(-x);
  if (nu == 1.5) return (1.0 + x) * std::exp(-x);
  if (nu == 2.5) return (1.0 + x + x * x / 3.0) * std::exp(-x);
  return detail::matern_bessel(distance, nu, a);
}

Eigen::Matrix2d bivariate_covariance(double hx, double hy, const MaternParams& p) {
  p.validate();
  const double d = std::hypot(hx, hy);
  const double s1 = std::sqrt(p.sigma1_sq);
  const double s2 = std::sqrt(p.sigma2_sq);
  Eigen::Matrix2d c;
  c(0, 0) = p.sigma1_sq * matern_correlation(d, p.nu1, p.a1);
  c(1, 1) = p.sigma2_sq * matern_correlation(d, p.nu2, p.a2);
  c(0, 1) = c(1, 0) = p.rho12 * s1 * s2 * matern_correlation(d, p.nu12, p.a12);
  return c;
}

namespace {

// FFTW's planner is not re-entrant.
std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

void fft2_inplace(std::vector<std::complex<double>>& data, std::size_t m1, std::size_t m2) {
  auto* buf = reinterpret_cast<fftw_complex*>(data.data());
  fftw_plan plan;
  {
    std::lock_guard lock(fftw_planner_mutex());
    plan = fftw_plan_dft_2d(static_cast<int>(m1), static_cast<int>(m2), buf, buf, FFTW_FORWARD,
                            FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  std::lock_guard lock(fftw_planner_mutex());
  fftw_destroy_plan(plan);
}

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace

CirculantSampler::CirculantSampler(std::size_t rows, std::size_t cols, double nu, double a)
    : rows_(rows), cols_(cols) {
  if (rows == 0 || cols == 0) throw Error(ErrorCode::InvalidArgument, "empty lattice");
  if (!(nu > 0.0) || !(a > 0.0)) throw Error(ErrorCode::InadmissibleParams, "nu and a must be > 0");

  std::size_t m1 = next_pow2(2 * rows);
  std::size_t m2 = next_pow2(2 * cols);
  std::vector<std::complex<double>> spec;
  for (int attempt = 0;; ++attempt) {
    spec.assign(m1 * m2, {0.0, 0.0});
    for (std::size_t i = 0; i < m1; ++i) {
      const double di = static_cast<double>(std::min(i, m1 - i));
      for (std::size_t j = 0; j < m2; ++j) {
        const double dj = static_cast<double>(std::min(j, m2 - j));
        spec[i * m2 + j] = matern_correlation(std::hypot(di, dj), nu, a);
      }
    }
    fft2_inplace(spec, m1, m2);
    double lo = spec[0].real(), hi = spec[0].real();
    for (const auto& v : spec) {
      lo = std::min(lo, v.real());
      hi = std::max(hi, v.real());
    }
    if (lo >= -1e-10 * hi || attempt == 3) break;
    m1 *= 2;
    m2 *= 2;
  }
  m1_ = m1;
  m2_ = m2;

  const double norm = static_cast<double>(m1 * m2);
  double total = 0.0, clipped = 0.0;
  sqrt_eigen_.resize(spec.size());
  for (std::size_t k = 0; k < spec.size(); ++k) {
    const double lambda = spec[k].real();
    total += std::abs(lambda);
    if (lambda < 0.0) clipped += -lambda;
    sqrt_eigen_[k] = std::sqrt(std::max(lambda, 0.0) / norm);
  }
  clipped_mass_ = total > 0.0 ? clipped / total : 0.0;
}

std::pair<Grid, Grid> CirculantSampler::sample_pair(std::uint64_t seed) const {
  CounterRng rng(seed, streams::kFieldCirculant);
  std::vector<std::complex<double>> w(sqrt_eigen_.size());
  for (std::size_t k = 0; k < w.size(); ++k) {
    const double re = rng.normal();
    const double im = rng.normal();
    w[k] = sqrt_eigen_[k] * std::complex<double>(re, im);
  }
  fft2_inplace(w, m1_, m2_);
  Grid z1(rows_, cols_), z2(rows_, cols_);
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t c = 0; c < cols_; ++c) {
      const auto& v = w[r * m2_ + c];
      z1.set(r, c, v.real());
      z2.set(r, c, v.imag());
    }
  }
  return {std::move(z1), std::move(z2)};
}

namespace {

FieldPair simulate_cholesky(std::size_t rows, std::size_t cols, const MaternParams& p, std::uint64_t seed) {
  const std::size_t n = rows * cols;
  if (n > kMaxCholeskyCells) {
    throw Error(ErrorCode::InvalidArgument, "lattice too large for the dense Cholesky method");
  }
  const auto nn = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd cov(2 * nn, 2 * nn);
  const double s12 = p.rho12 * std::sqrt(p.sigma1_sq * p.sigma2_sq);
  for (std::size_t i = 0; i < n; ++i) {
    const double ri = static_cast<double>(i / cols), ci = static_cast<double>(i % cols);
    for (std::size_t j = 0; j <= i; ++j) {
      const double rj = static_cast<double>(j / cols), cj = static_cast<double>(j % cols);
      const double d = std::hypot(ri - rj, ci - cj);
      const auto a = static_cast<Eigen::Index>(i), b = static_cast<Eigen::Index>(j);
      const double c11 = p.sigma1_sq * matern_correlation(d, p.nu1, p.a1);
      const double c22 = p.sigma2_sq * matern_correlation(d, p.nu2, p.a2);
      const double c12 = s12 * matern_correlation(d, p.nu12, p.a12);
      cov(a, b) = cov(b, a) = c11;
      cov(nn + a, nn + b) = cov(nn + b, nn + a) = c22;
      cov(a, nn + b) = cov(nn + b, a) = c12;
      cov(b, nn + a) = cov(nn + a, b) = c12;
    }
  }

  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) {
    const double jitter = 1e-10 * cov.diagonal().mean();
    cov.diagonal().array() += jitter;
    llt.compute(cov);
    if (llt.info() != Eigen::Success) {
      throw Error(ErrorCode::NotPositiveDefinite, "joint covariance is not positive definite");
    }
  }

  CounterRng rng(seed, streams::kFieldCholesky);
  Eigen::VectorXd z(2 * nn);
  for (Eigen::Index k = 0; k < 2 * nn; ++k) z(k) = rng.normal();
  const Eigen::VectorXd v = llt.matrixL() * z;

  FieldPair out{Grid(rows, cols), Grid(rows, cols)};
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    out.x.set(i / cols, i % cols, p.mu1 + v(k));
    out.y.set(i / cols, i % cols, p.mu2 + v(nn + k));
  }
  return out;
}

FieldPair simulate_mixing(std::size_t rows, std::size_t cols, const MaternParams& p, std::uint64_t seed) {
  if (!(p.nu1 == p.nu2 && p.nu1 == p.nu12 && p.a1 == p.a2 && p.a1 == p.a12)) {
    throw Error(ErrorCode::MethodRequiresEqualParams,
                "mixing needs nu1 = nu2 = nu12 and a1 = a2 = a12");
  }
  const CirculantSampler sampler(rows, cols, p.nu1, p.a1);
  auto [z1, z2] = sampler.sample_pair(seed);
  const double s1 = std::sqrt(p.sigma1_sq);
  const double s2 = std::sqrt(p.sigma2_sq);
  const double rho_c = std::sqrt(std::max(0.0, 1.0 - p.rho12 * p.rho12));
  FieldPair out{Grid(rows, cols), Grid(rows, cols)};
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const double a = z1.value(r, c);
      const double b = z2.value(r, c);
      out.x.set(r, c, p.mu1 + s1 * a);
      out.y.set(r, c, p.mu2 + s2 * (p.rho12 * a + rho_c * b));
    }
  }
  return out;
}

}  // namespace

FieldPair simulate_bivariate_grf(std::size_t rows, std::size_t cols, const MaternParams& p,
                                 SimulationMethod method, std::uint64_t seed) {
  p.validate();
  if (rows == 0 || cols == 0) throw Error(ErrorCode::InvalidArgument, "empty lattice");
  return method == SimulationMethod::Cholesky ? simulate_cholesky(rows, cols, p, seed)
                                              : simulate_mixing(rows, cols, p, seed);
}

Grid simulate_grf(std::size_t rows, std::size_t cols, double nu, double a, double sigma2, double mean,
                  std::uint64_t seed) {
  if (!(sigma2 > 0.0)) throw Error(ErrorCode::InadmissibleParams, "sigma2 must be > 0");
  const CirculantSampler sampler(rows, cols, nu, a);
  Grid z = sampler.sample_pair(seed).first;
  const double s = std::sqrt(sigma2);
  Grid out(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out.set(r, c, mean + s * z.value(r, c));
  }
  return out;
}

}  // namespace codisp
