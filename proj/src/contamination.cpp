#include "codisp/contamination.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "codisp/error.hpp"
#include "codisp/rng.hpp"

namespace codisp {

void MixtureNoiseSpec::validate() const {
  if (!(delta >= 0.0 && delta <= 1.0)) throw Error(ErrorCode::InvalidArgument, "delta must lie in [0, 1]");
  if (!(sigma2 > 0.0)) throw Error(ErrorCode::InvalidArgument, "sigma2 must be > 0");
  if (!(tau2 > 0.0)) throw Error(ErrorCode::InvalidArgument, "tau2 must be > 0");
}

void RandomBlocksSpec::validate() const {
  if (block_size < 1) throw Error(ErrorCode::InvalidArgument, "block_size must be >= 1");
  if (!(proportion > 0.0 && proportion < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "proportion must lie in (0, 1)");
  }
}

namespace {

void require_fully_observed(const Grid& g, const char* what) {
  if (!g.fully_observed()) {
    throw Error(ErrorCode::InvalidArgument, std::string(what) + " needs a fully observed grid");
  }
}

void check_probability(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorCode::InvalidArgument, "probability must lie in [0, 1]");
}

}  // namespace

Grid salt_pepper_mixture(const Grid& g, const MixtureNoiseSpec& spec) {
  spec.validate();
  require_fully_observed(g, "salt_pepper_mixture");
  Grid out = g;
  if (spec.delta == 0.0) return out;
  const double mean = masked_mean(g);
  const double sd = std::sqrt(spec.tau2);
  CounterRng rng(spec.seed, streams::kMixtureNoise);
  for (std::size_t r = 0; r < g.rows(); ++r) {
    for (std::size_t c = 0; c < g.cols(); ++c) {
      if (rng.uniform() < spec.delta) out.set(r, c, mean + sd * rng.normal());
    }
  }
  return out;
}

Grid salt_pepper_classic(const Grid& g, double delta, double low, double high, std::uint64_t seed) {
  check_probability(delta);
  if (!(low < high)) throw Error(ErrorCode::InvalidRange, "low must be below high");
  require_fully_observed(g, "salt_pepper_classic");
  Grid out = g;
  CounterRng rng(seed, streams::kClassicNoise);
  for (std::size_t r = 0; r < g.rows(); ++r) {
    for (std::size_t c = 0; c < g.cols(); ++c) {
      if (rng.uniform() < delta) out.set(r, c, (rng.next_u64() >> 63) ? high : low);
    }
  }
  return out;
}

Grid missing_random_blocks(const Grid& g, const RandomBlocksSpec& spec) {
  spec.validate();
  const std::size_t b = spec.block_size;
  if (b > std::min(g.rows(), g.cols())) {
    throw Error(ErrorCode::BlockTooLarge, "block does not fit in the grid");
  }
  Grid out = g;
  CounterRng rng(spec.seed, streams::kRandomBlocks);
  const std::size_t anchor_rows = g.rows() - b + 1;
  const std::size_t anchor_cols = g.cols() - b + 1;
  for (std::size_t r = 0; r < anchor_rows; ++r) {
    for (std::size_t c = 0; c < anchor_cols; ++c) {
      if (!rng.bernoulli(spec.proportion)) continue;
      for (std::size_t i = 0; i < b; ++i) {
        for (std::size_t j = 0; j < b; ++j) out.set_missing(r + i, c + j);
      }
    }
  }
  return out;
}

GapAnchor centered_anchor(const Grid& g, std::size_t gap_rows, std::size_t gap_cols) {
  if (gap_rows < 1 || gap_cols < 1 || gap_rows > g.rows() || gap_cols > g.cols()) {
    throw Error(ErrorCode::GapOutOfBounds, "gap does not fit in the grid");
  }
  return {(g.rows() - gap_rows) / 2, (g.cols() - gap_cols) / 2};
}

GapAnchor resolve_gap_anchor(const Grid& g, const GapSpec& spec) {
  if (spec.gap_rows < 1 || spec.gap_cols < 1) {
    throw Error(ErrorCode::GapOutOfBounds, "gap must be at least 1x1");
  }
  if (spec.anchor) {
    const GapAnchor a = *spec.anchor;
    if (a.row + spec.gap_rows > g.rows() || a.col + spec.gap_cols > g.cols()) {
      throw Error(ErrorCode::GapOutOfBounds, "gap extends past the grid");
    }
    return a;
  }
  // The imputation neighborhood spans K cells before the gap and 2K - 1
  // cells from the gap start, K = side + 1.
  const std::size_t kr = spec.gap_rows + 1;
  const std::size_t kc = spec.gap_cols + 1;
  if (3 * kr > g.rows() || 3 * kc > g.cols()) {
    throw Error(ErrorCode::GapOutOfBounds, "no anchor leaves room for the imputation neighborhood");
  }
  const std::size_t row_choices = g.rows() - 3 * kr + 1;
  const std::size_t col_choices = g.cols() - 3 * kc + 1;
  CounterRng rng(spec.seed, streams::kGapAnchor);
  const std::size_t r = kr + static_cast<std::size_t>(rng.below(row_choices));
  const std::size_t c = kc + static_cast<std::size_t>(rng.below(col_choices));
  return {r, c};
}

Grid cut_gap(const Grid& g, const GapSpec& spec) {
  const GapAnchor a = resolve_gap_anchor(g, spec);
  Grid out = g;
  for (std::size_t r = a.row; r < a.row + spec.gap_rows; ++r) {
    for (std::size_t c = a.col; c < a.col + spec.gap_cols; ++c) out.set_missing(r, c);
  }
  return out;
}

MarkedPointSet thin_points(const MarkedPointSet& points, double keep_fraction, std::uint64_t seed) {
  if (!(keep_fraction > 0.0 && keep_fraction <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "keep_fraction must lie in (0, 1]");
  }
  const std::size_t n = points.size();
  const auto keep = static_cast<std::size_t>(std::llround(keep_fraction * static_cast<double>(n)));
  if (keep == 0) throw Error(ErrorCode::EmptyResult, "thinning would leave no points");

  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (keep < n) {
    CounterRng rng(seed, streams::kThinning);
    // Partial Fisher-Yates: the first `keep` slots become a uniform sample.
    for (std::size_t i = 0; i < keep; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
      std::swap(idx[i], idx[j]);
    }
    idx.resize(keep);
    std::sort(idx.begin(), idx.end());
  }
  return points.subset(idx);
}

}  // namespace codisp
