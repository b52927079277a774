#include "codisp/kriging.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

#include <Eigen/Dense>

#include "codisp/error.hpp"

namespace codisp {

double boxcox(double y, double lambda) {
  if (!(y > 0.0)) throw Error(ErrorCode::NonPositiveInput, "Box-Cox needs y > 0");
  if (lambda == 0.0) return std::log(y);
  return (std::pow(y, lambda) - 1.0) / lambda;
}

double boxcox_inverse(double z, double lambda) {
  if (lambda == 0.0) return std::exp(z);
  const double base = std::max(0.0, lambda * z + 1.0);
  return std::pow(base, 1.0 / lambda);
}

// ---------------------------------------------------------------------------
// Trend

TrendFit fit_trend_poly2(std::span<const Point> points, std::span<const double> values) {
  if (points.size() != values.size()) throw Error(ErrorCode::DimensionMismatch, "points/values length");
  const auto n = static_cast<Eigen::Index>(points.size());
  if (n < 6) throw Error(ErrorCode::RankDeficient, "quadratic trend needs at least 6 points");
  Eigen::MatrixXd design(n, 6);
  Eigen::VectorXd rhs(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = points[static_cast<std::size_t>(i)].x, y = points[static_cast<std::size_t>(i)].y;
    design.row(i) << 1.0, x, y, x * x, y * y, x * y;
    rhs(i) = values[static_cast<std::size_t>(i)];
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  qr.setThreshold(1e-12);
  if (qr.rank() < 6) throw Error(ErrorCode::RankDeficient, "points are not in general position");
  const Eigen::VectorXd beta = qr.solve(rhs);

  TrendFit fit;
  for (int k = 0; k < 6; ++k) fit.trend.beta[static_cast<std::size_t>(k)] = beta(k);
  fit.residuals.resize(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    fit.residuals[i] = values[i] - fit.trend(points[i].x, points[i].y);
  }
  return fit;
}

TrendFit fit_trend_poly2(const MarkedPointSet& points, const std::string& mark) {
  return fit_trend_poly2(points.points(), points.mark(mark));
}

// ---------------------------------------------------------------------------
// Variogram models

std::string to_string(VariogramFamily f) {
  switch (f) {
    case VariogramFamily::Exponential: return "exponential";
    case VariogramFamily::Spherical: return "spherical";
    case VariogramFamily::Gaussian: return "gaussian";
    case VariogramFamily::Wave: return "wave";
  }
  return "unknown";
}

VariogramFamily parse_variogram_family(const std::string& name) {
  for (auto f : {VariogramFamily::Exponential, VariogramFamily::Spherical, VariogramFamily::Gaussian,
                 VariogramFamily::Wave}) {
    if (to_string(f) == name) return f;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown variogram family '" + name + "'");
}

namespace {

double shape(VariogramFamily f, double d, double range) {
  const double u = d / range;
  switch (f) {
    case VariogramFamily::Exponential: return 1.0 - std::exp(-u);
    case VariogramFamily::Spherical: return u >= 1.0 ? 1.0 : 1.5 * u - 0.5 * u * u * u;
    case VariogramFamily::Gaussian: return 1.0 - std::exp(-u * u);
    case VariogramFamily::Wave: return u == 0.0 ? 0.0 : 1.0 - std::sin(u) / u;
  }
  return 0.0;
}

}  // namespace

double VariogramModel::operator()(double d) const noexcept {
  if (d <= 0.0) return 0.0;
  return nugget + partial_sill * shape(family, d, range);
}

double VariogramModel::between_sites(double d) const noexcept {
  return nugget + partial_sill * shape(family, d, range);
}

std::vector<VariogramBin> empirical_variogram(std::span<const Point> points, std::span<const double> values,
                                              double bin_width, double max_dist) {
  if (points.size() != values.size()) throw Error(ErrorCode::DimensionMismatch, "points/values length");
  if (!(bin_width > 0.0)) throw Error(ErrorCode::InvalidArgument, "bin_width must be > 0");
  if (!(max_dist > 0.0)) throw Error(ErrorCode::InvalidArgument, "max_dist must be > 0");
  const auto nbins = static_cast<std::size_t>(std::ceil(max_dist / bin_width));
  std::vector<double> dsum(nbins, 0.0), gsum(nbins, 0.0);
  std::vector<std::size_t> count(nbins, 0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j = i + 1; j < points.size(); ++j) {
      const double d = std::hypot(points[j].x - points[i].x, points[j].y - points[i].y);
      if (d >= max_dist) continue;
      const auto b = static_cast<std::size_t>(d / bin_width);
      if (b >= nbins) continue;
      const double diff = values[i] - values[j];
      dsum[b] += d;
      gsum[b] += diff * diff;
      ++count[b];
    }
  }
  std::vector<VariogramBin> bins;
  for (std::size_t b = 0; b < nbins; ++b) {
    if (count[b] == 0) continue;
    const double n = static_cast<double>(count[b]);
    bins.push_back({dsum[b] / n, gsum[b] / (2.0 * n), count[b]});
  }
  return bins;
}

std::vector<VariogramBin> empirical_variogram(const MarkedPointSet& points, const std::string& mark,
                                              double bin_width, double max_dist) {
  return empirical_variogram(points.points(), points.mark(mark), bin_width, max_dist);
}

// ---------------------------------------------------------------------------
// Weighted least-squares fit

namespace {

using Objective = std::function<double(const std::vector<double>&)>;

struct SimplexResult {
  std::vector<double> x;
  double f;
};

// Nelder-Mead with the usual coefficients (1, 2, 0.5, 0.5).
SimplexResult nelder_mead(const Objective& f, std::vector<double> x0, const std::vector<double>& step,
                          int max_iter = 4000, double xtol = 1e-11) {
  const std::size_t n = x0.size();
  std::vector<std::vector<double>> pts(n + 1, x0);
  for (std::size_t i = 0; i < n; ++i) pts[i + 1][i] += step[i];
  std::vector<double> fv(n + 1);
  for (std::size_t i = 0; i <= n; ++i) fv[i] = f(pts[i]);

  std::vector<std::size_t> order(n + 1);
  for (int iter = 0; iter < max_iter; ++iter) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
    const std::size_t best = order.front(), worst = order.back(), second = order[n - 1];

    double size = 0.0;
    for (std::size_t i = 0; i <= n; ++i) {
      for (std::size_t k = 0; k < n; ++k) size = std::max(size, std::abs(pts[i][k] - pts[best][k]));
    }
    if (size < xtol) break;

    std::vector<double> centroid(n, 0.0);
    for (std::size_t i = 0; i <= n; ++i) {
      if (i == worst) continue;
      for (std::size_t k = 0; k < n; ++k) centroid[k] += pts[i][k] / static_cast<double>(n);
    }
    auto along = [&](double t) {
      std::vector<double> p(n);
      for (std::size_t k = 0; k < n; ++k) p[k] = centroid[k] + t * (pts[worst][k] - centroid[k]);
      return p;
    };

    auto xr = along(-1.0);
    const double fr = f(xr);
    if (fr < fv[best]) {
      auto xe = along(-2.0);
      const double fe = f(xe);
      if (fe < fr) {
        pts[worst] = std::move(xe);
        fv[worst] = fe;
      } else {
        pts[worst] = std::move(xr);
        fv[worst] = fr;
      }
      continue;
    }
    if (fr < fv[second]) {
      pts[worst] = std::move(xr);
      fv[worst] = fr;
      continue;
    }
    auto xc = fr < fv[worst] ? along(-0.5) : along(0.5);
    const double fc = f(xc);
    if (fc < std::min(fr, fv[worst])) {
      pts[worst] = std::move(xc);
      fv[worst] = fc;
      continue;
    }
    for (std::size_t i = 0; i <= n; ++i) {
      if (i == best) continue;
      for (std::size_t k = 0; k < n; ++k) pts[i][k] = pts[best][k] + 0.5 * (pts[i][k] - pts[best][k]);
      fv[i] = f(pts[i]);
    }
  }
  const auto it = std::min_element(fv.begin(), fv.end());
  const auto idx = static_cast<std::size_t>(it - fv.begin());
  return {pts[idx], fv[idx]};
}

}  // namespace

VariogramModel fit_variogram_wls(std::span<const VariogramBin> bins, VariogramFamily family,
                                 std::optional<double> fixed_nugget) {
  if (bins.size() < 3) throw Error(ErrorCode::TooFewBins, "variogram fit needs at least 3 bins");
  if (fixed_nugget && !(*fixed_nugget >= 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "fixed nugget must be >= 0");
  }
  double dmin = std::numeric_limits<double>::infinity(), dmax = 0.0, gmin = dmin, gmax = 0.0;
  for (const auto& b : bins) {
    dmin = std::min(dmin, b.distance);
    dmax = std::max(dmax, b.distance);
    gmin = std::min(gmin, b.gamma);
    gmax = std::max(gmax, b.gamma);
  }
  if (!(dmax > 0.0) || !(gmax > 0.0)) throw Error(ErrorCode::DegenerateFit, "variogram bins carry no signal");
  const double log_range_cap = std::log(1e4 * dmax);

  // Parameters: [log sill, log range] plus sqrt(nugget) when the nugget is free.
  const bool free_nugget = !fixed_nugget.has_value();
  auto unpack = [&](const std::vector<double>& p) {
    VariogramModel m;
    m.family = family;
    m.partial_sill = std::exp(p[0]);
    m.range = std::exp(p[1]);
    m.nugget = free_nugget ? p[2] * p[2] : *fixed_nugget;
    return m;
  };
  // Scaled so that the objective is O(1) regardless of the units of gamma.
  double total_pairs = 0.0;
  for (const auto& b : bins) total_pairs += static_cast<double>(b.pairs);
  const double scale = 1.0 / (total_pairs * gmax * gmax);
  const Objective objective = [&](const std::vector<double>& p) {
    if (p[1] > log_range_cap) return std::numeric_limits<double>::infinity();
    const VariogramModel m = unpack(p);
    double s = 0.0;
    for (const auto& b : bins) {
      const double r = b.gamma - m.between_sites(b.distance);
      s += static_cast<double>(b.pairs) * r * r;
    }
    return s * scale;
  };

  const double nugget0 = free_nugget ? 0.5 * gmin : *fixed_nugget;
  const double sill0 = std::max(gmax - nugget0, 0.1 * gmax);
  SimplexResult best{{}, std::numeric_limits<double>::infinity()};
  for (int s = 0; s < 8; ++s) {
    const double range0 = dmax * (s + 1) / 8.0;
    std::vector<double> x0{std::log(sill0), std::log(range0)};
    std::vector<double> step{0.5, 0.5};
    if (free_nugget) {
      x0.push_back(std::sqrt(nugget0));
      step.push_back(0.25 * std::sqrt(gmax));
    }
    SimplexResult r = nelder_mead(objective, x0, step);
    // Restarting from the optimum guards against a collapsed simplex.
    for (int k = 0; k < 2; ++k) {
      std::vector<double> restart_step = step;
      for (auto& v : restart_step) v *= 0.1;
      SimplexResult again = nelder_mead(objective, r.x, restart_step);
      if (again.f <= r.f) r = std::move(again);
    }
    if (r.f < best.f) best = std::move(r);
  }

  const VariogramModel m = unpack(best.x);
  if (m.partial_sill < 1e-10 * gmax || m.range < 1e-6 * dmin) {
    throw Error(ErrorCode::DegenerateFit, "fitted sill or range collapsed to zero");
  }
  return m;
}

// ---------------------------------------------------------------------------
// Ordinary kriging

struct OrdinaryKriging::Impl {
  Eigen::PartialPivLU<Eigen::MatrixXd> lu;
};

OrdinaryKriging::OrdinaryKriging(std::vector<Point> sites, std::vector<double> values, VariogramModel model)
    : sites_(std::move(sites)), values_(std::move(values)), model_(model), impl_(std::make_unique<Impl>()) {
  if (sites_.size() != values_.size()) throw Error(ErrorCode::DimensionMismatch, "sites/values length");
  if (sites_.size() < 2) throw Error(ErrorCode::InvalidArgument, "kriging needs at least 2 data points");
  if (model_.nugget == 0.0) {
    std::vector<Point> sorted = sites_;
    std::sort(sorted.begin(), sorted.end(),
              [](const Point& a, const Point& b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw Error(ErrorCode::DuplicatePointsWithZeroNugget, "duplicate data sites need a positive nugget");
    }
  }
  const auto n = static_cast<Eigen::Index>(sites_.size());
  Eigen::MatrixXd a(n + 1, n + 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    a(i, i) = 0.0;
    for (Eigen::Index j = 0; j < i; ++j) {
      const auto& p = sites_[static_cast<std::size_t>(i)];
      const auto& q = sites_[static_cast<std::size_t>(j)];
      a(i, j) = a(j, i) = model_.between_sites(std::hypot(p.x - q.x, p.y - q.y));
    }
    a(i, n) = a(n, i) = 1.0;
  }
  a(n, n) = 0.0;
  impl_->lu.compute(a);
  const double rc = impl_->lu.rcond();
  if (!(rc > 1e-14)) throw Error(ErrorCode::SingularKrigingSystem, "kriging system is singular");
}

OrdinaryKriging::~OrdinaryKriging() = default;
OrdinaryKriging::OrdinaryKriging(OrdinaryKriging&&) noexcept = default;
OrdinaryKriging& OrdinaryKriging::operator=(OrdinaryKriging&&) noexcept = default;

std::vector<double> OrdinaryKriging::weights(const Point& target) const {
  const auto n = static_cast<Eigen::Index>(sites_.size());
  Eigen::VectorXd b(n + 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& p = sites_[static_cast<std::size_t>(i)];
    b(i) = model_(std::hypot(p.x - target.x, p.y - target.y));
  }
  b(n) = 1.0;
  const Eigen::VectorXd sol = impl_->lu.solve(b);
  return {sol.data(), sol.data() + n};
}

double OrdinaryKriging::predict(const Point& target) const {
  const std::vector<double> w = weights(target);
  double s = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * values_[i];
  return s;
}

std::vector<double> OrdinaryKriging::predict(std::span<const Point> targets) const {
  std::vector<double> out(targets.size());
  const auto n = static_cast<std::ptrdiff_t>(targets.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    out[static_cast<std::size_t>(i)] = predict(targets[static_cast<std::size_t>(i)]);
  }
  return out;
}

std::vector<double> ordinary_krige(const MarkedPointSet& data, const std::string& mark,
                                   const VariogramModel& model, std::span<const Point> targets) {
  const auto values = data.mark(mark);
  OrdinaryKriging ok(data.points(), std::vector<double>(values.begin(), values.end()), model);
  return ok.predict(targets);
}

KrigeResult krige_pipeline(const MarkedPointSet& soil, const std::string& element, const TransformSpec& transform,
                           const ModelSpec& model_spec, std::span<const Point> targets) {
  const auto raw = soil.mark(element);
  std::vector<double> z(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) z[i] = boxcox(raw[i], transform.boxcox_lambda);

  KrigeResult result;
  std::vector<double> residuals = z;
  if (transform.detrend == Detrend::Poly2) {
    TrendFit fit = fit_trend_poly2(soil.points(), z);
    result.trend = fit.trend;
    residuals = std::move(fit.residuals);
  }

  const Extent& e = soil.extent();
  const double max_dist = model_spec.max_dist.value_or(0.5 * std::hypot(e.xmax - e.xmin, e.ymax - e.ymin));
  const double bin_width = model_spec.bin_width.value_or(max_dist / 15.0);
  result.bins = empirical_variogram(soil.points(), residuals, bin_width, max_dist);
  result.model = fit_variogram_wls(result.bins, model_spec.family, model_spec.fixed_nugget);

  const OrdinaryKriging ok(soil.points(), residuals, result.model);
  const std::vector<double> pred = ok.predict(targets);
  result.predictions.resize(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double with_trend = pred[i] + result.trend(targets[i].x, targets[i].y);
    result.predictions[i] = boxcox_inverse(with_trend, transform.boxcox_lambda);
  }
  return result;
}

}  // namespace codisp
