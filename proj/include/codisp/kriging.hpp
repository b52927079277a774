#pragma once

// Box-Cox transform, quadratic trend surfaces, Matheron variograms with
// weighted least-squares model fits, and ordinary kriging.

#include <array>
#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "codisp/grid.hpp"

namespace codisp {

/// (y^lambda - 1) / lambda, or ln y for lambda == 0. Throws NonPositiveInput.
double boxcox(double y, double lambda);
/// Inverse transform. The base lambda*z + 1 is clamped at 0 so predictions
/// far outside the data range stay on the non-negative scale.
double boxcox_inverse(double z, double lambda);

/// m(x, y) = b0 + b1 x + b2 y + b3 x^2 + b4 y^2 + b5 x y
struct Poly2Trend {
  std::array<double, 6> beta{};
  double operator()(double x, double y) const noexcept {
    return beta[0] + beta[1] * x + beta[2] * y + beta[3] * x * x + beta[4] * y * y + beta[5] * x * y;
  }
};

struct TrendFit {
  Poly2Trend trend;
  std::vector<double> residuals;
};

/// Least-squares quadratic surface. Throws RankDeficient (fewer than 6
/// points or points not in general position).
TrendFit fit_trend_poly2(std::span<const Point> points, std::span<const double> values);
TrendFit fit_trend_poly2(const MarkedPointSet& points, const std::string& mark);

enum class VariogramFamily { Exponential, Spherical, Gaussian, Wave };

std::string to_string(VariogramFamily f);
/// Throws InvalidArgument on an unknown name.
VariogramFamily parse_variogram_family(const std::string& name);

struct VariogramModel {
  VariogramFamily family = VariogramFamily::Exponential;
  double nugget = 0.0;
  double partial_sill = 1.0;
  double range = 1.0;

  /// gamma(0) = 0; for d > 0, nugget + partial_sill * shape(d / range).
  double operator()(double d) const noexcept;
  /// Semivariance between two distinct sites separated by d (d may be 0).
  double between_sites(double d) const noexcept;
};

struct VariogramBin {
  double distance = 0.0;  ///< mean pair distance within the bin
  double gamma = 0.0;
  std::size_t pairs = 0;
};

/// Matheron estimator gamma = sum (z_i - z_j)^2 / (2 N_b) over unordered
/// pairs with distance in [b w, (b + 1) w) and below max_dist. Empty bins
/// are omitted.
std::vector<VariogramBin> empirical_variogram(std::span<const Point> points, std::span<const double> values,
                                              double bin_width, double max_dist);
std::vector<VariogramBin> empirical_variogram(const MarkedPointSet& points, const std::string& mark,
                                              double bin_width, double max_dist);

/// Minimises sum N_b (gamma_b - model(d_b))^2 with a derivative-free simplex
/// search started from 8 fixed ranges spanning the bins. Throws TooFewBins
/// (< 3 bins) or DegenerateFit (sill or range collapsing to zero).
VariogramModel fit_variogram_wls(std::span<const VariogramBin> bins, VariogramFamily family,
                                 std::optional<double> fixed_nugget = std::nullopt);

/// Ordinary kriging with a factorization of the data system shared by all
/// targets.
class OrdinaryKriging {
 public:
  /// Throws DuplicatePointsWithZeroNugget, SingularKrigingSystem.
  OrdinaryKriging(std::vector<Point> sites, std::vector<double> values, VariogramModel model);
  ~OrdinaryKriging();
  OrdinaryKriging(OrdinaryKriging&&) noexcept;
  OrdinaryKriging& operator=(OrdinaryKriging&&) noexcept;

  /// Data weights (summing to 1) for a target.
  std::vector<double> weights(const Point& target) const;
  double predict(const Point& target) const;
  /// Targets are solved independently in parallel.
  std::vector<double> predict(std::span<const Point> targets) const;

 private:
  struct Impl;
  std::vector<Point> sites_;
  std::vector<double> values_;
  VariogramModel model_;
  std::unique_ptr<Impl> impl_;
};

std::vector<double> ordinary_krige(const MarkedPointSet& data, const std::string& mark,
                                   const VariogramModel& model, std::span<const Point> targets);

enum class Detrend { None, Poly2 };

struct TransformSpec {
  double boxcox_lambda = 1.0;
  Detrend detrend = Detrend::None;
};

struct ModelSpec {
  VariogramFamily family = VariogramFamily::Exponential;
  std::optional<double> fixed_nugget;
  /// Empirical variogram binning; when unset, max_dist is half the extent
  /// diagonal and bin_width is max_dist / 15.
  std::optional<double> bin_width;
  std::optional<double> max_dist;
};

struct KrigeResult {
  std::vector<double> predictions;  ///< original concentration scale
  VariogramModel model;
  Poly2Trend trend;
  std::vector<VariogramBin> bins;
};

/// Box-Cox -> optional quadratic detrend -> variogram fit -> ordinary
/// kriging of the residuals -> trend re-added -> inverse Box-Cox.
KrigeResult krige_pipeline(const MarkedPointSet& soil, const std::string& element, const TransformSpec& transform,
                           const ModelSpec& model_spec, std::span<const Point> targets);

}  // namespace codisp
