#include "codisp/experiments.hpp"

#include <omp.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <numbers>

#include "codisp/ar2d.hpp"
#include "codisp/codispersion.hpp"
#include "codisp/contamination.hpp"
#include "codisp/error.hpp"
#include "codisp/io.hpp"
#include "codisp/rng.hpp"

namespace codisp::exp {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::string stat(double v) {
  if (std::isnan(v)) return "NA";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Independent parameter combinations run concurrently when there are enough
// of them to occupy the team; otherwise each combination uses the parallel
// kernels. Results do not depend on the choice.
template <class F>
void for_each_combo(std::size_t n, F&& f) {
  if (n > 1 && n >= static_cast<std::size_t>(omp_get_max_threads())) {
    std::exception_ptr err;
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
      try {
        f(static_cast<std::size_t>(i));
      } catch (...) {
#pragma omp critical(codisp_combo_error)
        if (!err) err = std::current_exception();
      }
    }
    if (err) std::rethrow_exception(err);
  } else {
    for (std::size_t i = 0; i < n; ++i) f(i);
  }
}

std::string rep_suffix(std::size_t replicates, std::size_t rep) {
  return replicates > 1 ? "_rep=" + std::to_string(rep) : "";
}

struct Loaded {
  Grid grid;
  std::map<std::string, std::string> digests;
  json description;
};

Loaded load_source(const TextureSource& src, std::uint64_t seed) {
  if (src.input) {
    Loaded l{load_grid(*src.input), {{src.input->string(), io::sha256_file(*src.input)}}, json::object()};
    l.description = {{"input", src.input->string()}};
    return l;
  }
  Loaded l{synthetic_texture(src.size, derive_seed(seed, 0)), {}, json::object()};
  l.description = {{"synthetic_size", src.size}};
  return l;
}

std::uint64_t combo_seed(std::uint64_t seed, std::size_t combo) { return derive_seed(seed, 1 + combo); }

}  // namespace

OutputDir::OutputDir(fs::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir_.string());
}

void OutputDir::write(const std::string& name, const std::string& content) {
  io::write_file_atomic(dir_ / name, content);
  std::lock_guard lock(mu_);
  files_.push_back(name);
}

void OutputDir::write_map(const std::string& stem, const CodispMap& map) {
  write(stem + ".csv", io::format_map_csv(map));
  write_map_image(stem, map);
}

void OutputDir::write_map_image(const std::string& stem, const CodispMap& map) {
  const auto written = io::write_map_pgm(map, dir_ / (stem + ".pgm"));
  std::lock_guard lock(mu_);
  for (const auto& p : written) files_.push_back(p.filename().string());
}

void OutputDir::write_grid_csv(const std::string& name, const Grid& g) { write(name, io::format_grid_csv(g)); }

std::vector<std::string> OutputDir::files() const {
  std::lock_guard lock(mu_);
  std::vector<std::string> f = files_;
  std::sort(f.begin(), f.end());
  return f;
}

void OutputDir::discard() noexcept {
  std::lock_guard lock(mu_);
  for (const auto& f : files_) {
    std::error_code ec;
    fs::remove(dir_ / f, ec);
  }
  files_.clear();
}

SummaryTable::SummaryTable(std::string experiment, std::vector<std::string> param_columns, std::size_t pair_floor)
    : experiment_(std::move(experiment)), columns_(std::move(param_columns)), pair_floor_(pair_floor) {}

void SummaryTable::set_row(std::size_t i, std::vector<std::string> params, const MapSummary& s) {
  std::vector<std::string> row{experiment_};
  row.insert(row.end(), params.begin(), params.end());
  row.push_back(stat(s.mean));
  row.push_back(stat(s.min));
  row.push_back(stat(s.max));
  row.push_back(stat(s.defined_fraction));
  row.push_back(std::to_string(pair_floor_));
  std::lock_guard lock(mu_);
  rows_[i] = std::move(row);
}

std::string SummaryTable::format() const {
  std::lock_guard lock(mu_);
  std::string out = "experiment";
  for (const auto& c : columns_) out += "," + c;
  out += ",mean_codisp,min_codisp,max_codisp,defined_fraction,pair_floor\n";
  for (const auto& [i, row] : rows_) {
    for (std::size_t k = 0; k < row.size(); ++k) out += (k ? "," : "") + row[k];
    out += '\n';
  }
  return out;
}

LagWindow MapOptions::window_for(std::size_t rows, std::size_t cols) const {
  const int d = default_max_lag(rows, cols);
  return build_lag_window(max_lag_x.value_or(d), max_lag_y.value_or(d));
}

CodispConfig MapOptions::config() const {
  CodispConfig cfg;
  cfg.min_pairs = min_pairs;
  cfg.validate();
  return cfg;
}

json MapOptions::to_json() const {
  json j;
  j["max_lag_x"] = max_lag_x ? json(*max_lag_x) : json("default");
  j["max_lag_y"] = max_lag_y ? json(*max_lag_y) : json("default");
  j["min_pairs"] = min_pairs;
  return j;
}

std::map<std::string, ElementModel> default_element_models() {
  return {
      {"Ca", {0.5, VariogramFamily::Exponential, std::nullopt, Detrend::Poly2}},
      {"P", {1.0, VariogramFamily::Exponential, std::nullopt, Detrend::Poly2}},
      {"Al", {1.0, VariogramFamily::Wave, 4000.0, Detrend::Poly2}},
  };
}

Grid synthetic_texture(std::size_t size, std::uint64_t seed) {
  return simulate_grf(size, size, 1.5, 1.0 / 40.0, 1.0, 0.0, seed);
}

std::pair<MarkedPointSet, MarkedPointSet> synthetic_plot(std::uint64_t seed, std::size_t n_trees) {
  const Extent extent{0.0, 1000.0, 0.0, 500.0};
  constexpr double two_pi = 2.0 * std::numbers::pi;
  auto surface = [&](double x, double y) {
    return std::sin(two_pi * x / 700.0) + std::cos(two_pi * y / 450.0) + 0.5 * std::sin(two_pi * (x + y) / 900.0);
  };

  CounterRng soil_rng(derive_seed(seed, 0), streams::kSynthetic);
  std::vector<Point> sites;
  std::vector<double> al, ca, p;
  for (int j = 0; j < 20; ++j) {
    for (int i = 0; i < 25; ++i) {
      const double x = 20.0 + 40.0 * i, y = 12.5 + 25.0 * j;
      const double s = surface(x, y);
      sites.push_back({x, y});
      al.push_back(900.0 + 250.0 * s + 60.0 * soil_rng.normal());
      ca.push_back(std::exp(7.0 + 0.6 * s + 0.15 * soil_rng.normal()));
      p.push_back(6.0 + 0.9 * s + 0.3 * soil_rng.normal());
    }
  }
  MarkedPointSet soil(std::move(sites), extent);
  soil.add_mark("Al", std::move(al));
  soil.add_mark("Ca", std::move(ca));
  soil.add_mark("P", std::move(p));

  CounterRng tree_rng(derive_seed(seed, 1), streams::kSynthetic);
  std::vector<Point> trees;
  std::vector<double> dbh;
  for (std::size_t k = 0; k < n_trees; ++k) {
    const double x = 1000.0 * tree_rng.uniform(), y = 500.0 * tree_rng.uniform();
    trees.push_back({x, y});
    dbh.push_back(std::max(10.0, 150.0 + 40.0 * surface(x, y) + 15.0 * tree_rng.normal()));
  }
  MarkedPointSet forest(std::move(trees), extent);
  forest.add_mark("dbh", std::move(dbh));
  return {std::move(soil), std::move(forest)};
}

Grid load_grid(const fs::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".pgm") return io::read_pgm(path);
  if (ext == ".csv") return io::read_grid_csv(path);
  throw Error(ErrorCode::InvalidArgument, "grid inputs must be .pgm or .csv: " + path.string());
}

void guarded_run(const RunContext& ctx, const std::string& command,
                 const std::function<RunRecord(OutputDir&)>& body) {
  const auto start = std::chrono::steady_clock::now();
  OutputDir out(ctx.out);
  try {
    RunRecord rec = body(out);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    json m;
    m["tool"] = "codisp";
    m["version"] = kVersion;
    m["command"] = command;
    m["argv"] = ctx.argv;
    m["seed"] = ctx.seed;
    m["threads"] = ctx.threads;
    m["parameters"] = std::move(rec.parameters);
    m["parameters"]["map"] = ctx.map.to_json();
    json inputs = json::object();
    for (const auto& [path, digest] : rec.input_digests) inputs[path] = digest;
    m["inputs"] = std::move(inputs);
    json outputs = json::object();
    for (const auto& f : out.files()) outputs[f] = io::sha256_file(out.path() / f);
    m["outputs"] = std::move(outputs);
    m["wall_time_seconds"] = wall;
    out.write("manifest.json", m.dump(2) + "\n");
  } catch (...) {
    out.discard();
    throw;
  }
}

void run_saltpepper(const RunContext& ctx, const SaltPepperParams& p) {
  guarded_run(ctx, "exp-saltpepper", [&](OutputDir& out) {
    if (p.mode != "mixture" && p.mode != "classic") {
      throw Error(ErrorCode::InvalidArgument, "mode must be mixture or classic");
    }
    if (p.replicates < 1) throw Error(ErrorCode::InvalidArgument, "replicates must be >= 1");
    Loaded src = load_source(p.source, ctx.seed);
    const Grid& ref = src.grid;
    const LagWindow window = ctx.map.window_for(ref.rows(), ref.cols());
    const CodispConfig cfg = ctx.map.config();
    // The classic mode has no tau2; one level per delta.
    const std::vector<double> tau2 = p.mode == "classic" ? std::vector<double>{0.0} : p.tau2;

    const std::size_t per_rep = p.delta.size() * tau2.size();
    SummaryTable summary("exp-saltpepper", {"mode", "delta", "tau2", "replicate"}, cfg.min_pairs);
    for_each_combo(per_rep * p.replicates, [&](std::size_t i) {
      const std::size_t rep = i / per_rep;
      const double delta = p.delta[(i % per_rep) / tau2.size()];
      const double t2 = tau2[i % tau2.size()];
      const std::uint64_t seed = combo_seed(ctx.seed, i);
      const Grid noisy = p.mode == "mixture" ? salt_pepper_mixture(ref, {delta, p.sigma2, t2, seed})
                                             : salt_pepper_classic(ref, delta, p.low, p.high, seed);
      const CodispMap map = codisp_map(ref, noisy, window, cfg);
      std::string stem = "map_delta=" + num(delta);
      if (p.mode == "mixture") stem += "_tau2=" + num(t2);
      out.write_map(stem + rep_suffix(p.replicates, rep), map);
      summary.set_row(i, {p.mode, num(delta), p.mode == "mixture" ? num(t2) : "NA", std::to_string(rep)},
                      summarize(map));
    });
    out.write("summary.csv", summary.format());

    RunRecord rec;
    rec.parameters = src.description;
    rec.parameters["mode"] = p.mode;
    rec.parameters["delta"] = p.delta;
    rec.parameters["tau2"] = p.tau2;
    rec.parameters["sigma2"] = p.sigma2;
    rec.parameters["low"] = p.low;
    rec.parameters["high"] = p.high;
    rec.parameters["replicates"] = p.replicates;
    rec.input_digests = src.digests;
    return rec;
  });
}

void run_grf(const RunContext& ctx, const GrfParams& p) {
  guarded_run(ctx, "exp-grf", [&](OutputDir& out) {
    if (p.replicates < 1) throw Error(ErrorCode::InvalidArgument, "replicates must be >= 1");
    const MaternParams mp =
        MaternParams::parsimonious(p.nu, p.nu, p.a, p.a, p.a, p.sigma2, p.sigma2, p.rho, 0.0, 0.0);
    const LagWindow window = ctx.map.window_for(p.size, p.size);
    const CodispConfig cfg = ctx.map.config();

    std::vector<FieldPair> fields;
    for (std::size_t rep = 0; rep < p.replicates; ++rep) {
      fields.push_back(simulate_bivariate_grf(p.size, p.size, mp, p.method, derive_seed(ctx.seed, 0, rep)));
    }

    // Per replicate: one uncontaminated map, then every (delta, tau2).
    const std::size_t per_rep = 1 + p.delta.size() * p.tau2.size();
    SummaryTable summary("exp-grf", {"delta", "tau2", "replicate"}, cfg.min_pairs);
    for_each_combo(per_rep * p.replicates, [&](std::size_t i) {
      const std::size_t rep = i / per_rep, j = i % per_rep;
      const FieldPair& f = fields[rep];
      if (j == 0) {
        const CodispMap map = codisp_map(f.x, f.y, window, cfg);
        out.write_map("map_baseline" + rep_suffix(p.replicates, rep), map);
        summary.set_row(i, {"0", "0", std::to_string(rep)}, summarize(map));
        return;
      }
      const double delta = p.delta[(j - 1) / p.tau2.size()];
      const double t2 = p.tau2[(j - 1) % p.tau2.size()];
      const Grid noisy = salt_pepper_mixture(f.y, {delta, p.sigma2, t2, combo_seed(ctx.seed, i)});
      const CodispMap map = codisp_map(f.x, noisy, window, cfg);
      out.write_map("map_delta=" + num(delta) + "_tau2=" + num(t2) + rep_suffix(p.replicates, rep), map);
      summary.set_row(i, {num(delta), num(t2), std::to_string(rep)}, summarize(map));
    });
    out.write("summary.csv", summary.format());

    RunRecord rec;
    rec.parameters["size"] = p.size;
    rec.parameters["method"] = p.method == SimulationMethod::Mixing ? "mixing" : "cholesky";
    rec.parameters["nu"] = p.nu;
    rec.parameters["a"] = p.a;
    rec.parameters["rho"] = p.rho;
    rec.parameters["sigma2"] = p.sigma2;
    rec.parameters["delta"] = p.delta;
    rec.parameters["tau2"] = p.tau2;
    rec.parameters["replicates"] = p.replicates;
    return rec;
  });
}

void run_missing(const RunContext& ctx, const MissingParams& p) {
  guarded_run(ctx, "exp-missing", [&](OutputDir& out) {
    if (p.replicates < 1) throw Error(ErrorCode::InvalidArgument, "replicates must be >= 1");
    Loaded src = load_source(p.source, ctx.seed);
    const Grid& ref = src.grid;
    const LagWindow window = ctx.map.window_for(ref.rows(), ref.cols());
    const CodispConfig cfg = ctx.map.config();

    const std::size_t per_rep = p.block_size.size() * p.proportion.size();
    SummaryTable summary("exp-missing", {"block_size", "proportion", "replicate", "missing_fraction"},
                         cfg.min_pairs);
    for_each_combo(per_rep * p.replicates, [&](std::size_t i) {
      const std::size_t rep = i / per_rep;
      const std::size_t b = p.block_size[(i % per_rep) / p.proportion.size()];
      const double prop = p.proportion[i % p.proportion.size()];
      const Grid holed = missing_random_blocks(ref, {b, prop, combo_seed(ctx.seed, i)});
      const CodispMap map = codisp_map(ref, holed, window, cfg);
      const double missing =
          1.0 - static_cast<double>(holed.observed_count()) / static_cast<double>(holed.size());
      out.write_map("map_block=" + std::to_string(b) + "_prop=" + num(prop) + rep_suffix(p.replicates, rep),
                    map);
      summary.set_row(i, {std::to_string(b), num(prop), std::to_string(rep), stat(missing)}, summarize(map));
    });
    out.write("summary.csv", summary.format());

    RunRecord rec;
    rec.parameters = src.description;
    rec.parameters["block_size"] = p.block_size;
    rec.parameters["proportion"] = p.proportion;
    rec.parameters["replicates"] = p.replicates;
    rec.input_digests = src.digests;
    return rec;
  });
}

void run_gap(const RunContext& ctx, const GapParams& p) {
  guarded_run(ctx, "exp-gap", [&](OutputDir& out) {
    Loaded src = load_source(p.source, ctx.seed);
    const Grid& ref = src.grid;
    if (!ref.fully_observed()) throw Error(ErrorCode::InvalidArgument, "reference grid must be fully observed");
    const LagWindow window = ctx.map.window_for(ref.rows(), ref.cols());
    const CodispConfig cfg = ctx.map.config();

    SummaryTable summary("exp-gap", {"gap_size", "anchor_row", "anchor_col"}, cfg.min_pairs);
    for_each_combo(p.gap_size.size(), [&](std::size_t i) {
      const std::size_t s = p.gap_size[i];
      GapSpec spec{s, s, std::nullopt, combo_seed(ctx.seed, i)};
      if (!p.random_anchor) spec.anchor = centered_anchor(ref, s, s);
      const GapAnchor a = resolve_gap_anchor(ref, spec);
      spec.anchor = a;
      const Grid holed = cut_gap(ref, spec);
      const Grid filled = impute_gap(holed, GapRect{a.row, a.col, s, s});
      const CodispMap map = codisp_map(ref, filled, window, cfg);
      const std::string tag = "gap=" + std::to_string(s);
      out.write_map("map_" + tag, map);
      if (p.write_imputed) out.write_grid_csv("imputed_" + tag + ".csv", filled);
      summary.set_row(i, {std::to_string(s), std::to_string(a.row), std::to_string(a.col)}, summarize(map));
    });
    out.write("summary.csv", summary.format());

    RunRecord rec;
    rec.parameters = src.description;
    rec.parameters["gap_size"] = p.gap_size;
    rec.parameters["anchor"] = p.random_anchor ? "random" : "center";
    rec.parameters["write_imputed"] = p.write_imputed;
    rec.input_digests = src.digests;
    return rec;
  });
}

void run_thinning(const RunContext& ctx, const ThinningParams& p) {
  guarded_run(ctx, "exp-thinning", [&](OutputDir& out) {
    if (p.trees.has_value() != p.soil.has_value()) {
      throw Error(ErrorCode::InvalidArgument, "--trees and --soil must be given together");
    }
    if (p.species.has_value() != p.species_column.has_value()) {
      throw Error(ErrorCode::InvalidArgument, "--species needs --species-column");
    }
    RunRecord rec;
    MarkedPointSet soil, trees;
    if (p.trees) {
      std::optional<io::RowFilter> filter;
      if (p.species) filter = io::RowFilter{*p.species_column, *p.species};
      trees = io::read_points_csv(*p.trees, {p.tree_mark}, filter);
      soil = io::read_points_csv(*p.soil, p.elements);
      rec.input_digests[p.trees->string()] = io::sha256_file(*p.trees);
      rec.input_digests[p.soil->string()] = io::sha256_file(*p.soil);
      rec.parameters["trees"] = p.trees->string();
      rec.parameters["soil"] = p.soil->string();
    } else {
      std::tie(soil, trees) = synthetic_plot(derive_seed(ctx.seed, 0), p.synthetic_trees);
      rec.parameters["synthetic_trees"] = p.synthetic_trees;
    }
    std::map<std::string, ElementModel> models = default_element_models();
    for (const auto& [k, v] : p.models) models[k] = v;
    for (const auto& e : p.elements) {
      if (!models.count(e)) models[e] = ElementModel{};
    }

    const PointLagWindow window{build_lag_window(p.max_lag, p.max_lag), p.spacing};
    CodispConfig cfg = ctx.map.config();
    cfg.bin_halfwidth = p.spacing / 2.0;

    const std::size_t nk = p.keep.size();
    const std::size_t n = p.elements.size() * nk;
    std::vector<std::string> model_rows(n);
    SummaryTable summary("exp-thinning", {"element", "keep"}, cfg.min_pairs);
    // Kriging already solves its targets in parallel; combinations run in turn
    // unless there are enough of them.
    for_each_combo(n, [&](std::size_t i) {
      const std::string& e = p.elements[i / nk];
      const double keep = p.keep[i % nk];
      const ElementModel& em = models.at(e);
      const MarkedPointSet thinned = thin_points(soil, keep, combo_seed(ctx.seed, i));
      const KrigeResult kr = krige_pipeline(thinned, e, {em.lambda, em.detrend}, {em.family, em.nugget, std::nullopt, std::nullopt},
                                            trees.points());
      MarkedPointSet pts(trees.points(), trees.extent());
      const auto marks = trees.mark(p.tree_mark);
      pts.add_mark(p.tree_mark, std::vector<double>(marks.begin(), marks.end()));
      pts.add_mark("soil", kr.predictions);
      const CodispMap map = point_codisp_map(pts, p.tree_mark, "soil", window, cfg);
      out.write_map("map_element=" + e + "_keep=" + num(keep), map);
      summary.set_row(i, {e, num(keep)}, summarize(map));
      model_rows[i] = e + "," + num(keep) + "," + std::to_string(thinned.size()) + "," + to_string(kr.model.family) +
                      "," + stat(kr.model.nugget) + "," + stat(kr.model.partial_sill) + "," +
                      stat(kr.model.range) + "\n";
    });
    out.write("summary.csv", summary.format());
    std::string models_csv = "element,keep,soil_points,family,nugget,partial_sill,range\n";
    for (const auto& r : model_rows) models_csv += r;
    out.write("variogram_models.csv", models_csv);

    rec.parameters["tree_mark"] = p.tree_mark;
    if (p.species) rec.parameters["species"] = {{"column", *p.species_column}, {"value", *p.species}};
    rec.parameters["elements"] = p.elements;
    rec.parameters["keep"] = p.keep;
    json jm = json::object();
    for (const auto& e : p.elements) {
      const ElementModel& em = models.at(e);
      jm[e] = {{"lambda", em.lambda},
               {"family", to_string(em.family)},
               {"nugget", em.nugget ? json(*em.nugget) : json("estimated")},
               {"detrend", em.detrend == Detrend::Poly2 ? "poly2" : "none"}};
    }
    rec.parameters["models"] = std::move(jm);
    rec.parameters["spacing"] = p.spacing;
    rec.parameters["max_lag"] = p.max_lag;
    return rec;
  });
}

}  // namespace codisp::exp
