#include "codisp/cli.hpp"

#include <omp.h>

#include <CLI11.hpp>
#include <iostream>
#include <optional>

#include "codisp/ar2d.hpp"
#include "codisp/codispersion.hpp"
#include "codisp/contamination.hpp"
#include "codisp/error.hpp"
#include "codisp/experiments.hpp"
#include "codisp/io.hpp"
#include "codisp/kriging.hpp"
#include "codisp/randomfield.hpp"
#include "codisp/rng.hpp"

namespace codisp {

namespace {

using exp::json;
using exp::OutputDir;
using exp::RunContext;
using exp::RunRecord;
namespace fs = std::filesystem;

struct Common {
  std::string out;
  std::uint64_t seed = 1;
  int threads = 0;
  std::optional<int> max_lag_x, max_lag_y;
  std::size_t min_pairs = 30;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--out", c.out, "Output directory")->required();
  sub->add_option("--seed", c.seed, "Base seed")->capture_default_str();
  sub->add_option("--threads", c.threads, "Worker threads (0 = all)")->check(CLI::NonNegativeNumber);
  sub->add_option("--max-lag-x", c.max_lag_x, "Largest column offset (default min(rows, cols) / 4)")
      ->check(CLI::PositiveNumber);
  sub->add_option("--max-lag-y", c.max_lag_y, "Largest row offset (default min(rows, cols) / 4)")
      ->check(CLI::PositiveNumber);
  sub->add_option("--min-pairs", c.min_pairs, "Pairs needed for a defined lag")->capture_default_str();
}

RunContext context_of(const Common& c, const std::vector<std::string>& argv) {
  RunContext ctx;
  ctx.out = c.out;
  ctx.seed = c.seed;
  ctx.threads = c.threads;
  ctx.map.max_lag_x = c.max_lag_x;
  ctx.map.max_lag_y = c.max_lag_y;
  ctx.map.min_pairs = c.min_pairs;
  ctx.argv = argv;
  return ctx;
}

// "Al=1" style per-element overrides.
std::pair<std::string, std::string> split_assignment(const std::string& s, const std::string& flag) {
  const auto eq = s.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw Error(ErrorCode::InvalidArgument, flag + " expects ELEMENT=VALUE, got '" + s + "'");
  }
  return {s.substr(0, eq), s.substr(eq + 1)};
}

double to_number(const std::string& s, const std::string& flag) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::InvalidArgument, flag + ": '" + s + "' is not a number");
}

SimulationMethod parse_method(const std::string& m) {
  if (m == "mixing") return SimulationMethod::Mixing;
  if (m == "cholesky") return SimulationMethod::Cholesky;
  throw Error(ErrorCode::InvalidArgument, "method must be mixing or cholesky");
}

Detrend parse_detrend(const std::string& d) {
  if (d == "poly2") return Detrend::Poly2;
  if (d == "none") return Detrend::None;
  throw Error(ErrorCode::InvalidArgument, "detrend must be poly2 or none");
}

void write_grid_outputs(OutputDir& out, const std::string& stem, const Grid& g) {
  out.write_grid_csv(stem + ".csv", g);
}

int replay(const fs::path& manifest_path, const std::string& out_dir, std::optional<int> threads,
           std::ostream& out, std::ostream& err);

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Codispersion analysis toolkit", "codisp"};
  app.require_subcommand(1);
  app.set_version_flag("--version", exp::kVersion);

  std::function<void()> action;
  Common common;

  // exp-saltpepper
  exp::SaltPepperParams sp;
  std::optional<std::string> sp_input;
  auto* c_sp = app.add_subcommand("exp-saltpepper", "Salt-and-pepper noise on a texture");
  add_common(c_sp, common);
  c_sp->add_option("--input", sp_input, "Reference grid (.pgm or .csv); synthetic texture if omitted");
  c_sp->add_option("--size", sp.source.size, "Synthetic texture side")->capture_default_str();
  c_sp->add_option("--mode", sp.mode, "mixture or classic")->capture_default_str();
  c_sp->add_option("--delta", sp.delta, "Contamination probabilities")->delimiter(',')->capture_default_str();
  c_sp->add_option("--tau2", sp.tau2, "Noise variances")->delimiter(',')->capture_default_str();
  c_sp->add_option("--sigma2", sp.sigma2, "Clean-component variance")->capture_default_str();
  c_sp->add_option("--low", sp.low, "Classic mode low value")->capture_default_str();
  c_sp->add_option("--high", sp.high, "Classic mode high value")->capture_default_str();
  c_sp->add_option("--replicates", sp.replicates, "Seeds per combination")->capture_default_str();
  c_sp->callback([&] {
    if (sp_input) sp.source.input = *sp_input;
    action = [&] { exp::run_saltpepper(context_of(common, args), sp); };
  });

  // exp-grf
  exp::GrfParams gp;
  std::string gp_method = "mixing";
  auto* c_grf = app.add_subcommand("exp-grf", "Contamination of one member of a correlated Gaussian field pair");
  add_common(c_grf, common);
  c_grf->add_option("--size", gp.size, "Lattice side")->capture_default_str();
  c_grf->add_option("--method", gp_method, "mixing or cholesky")->capture_default_str();
  c_grf->add_option("--nu", gp.nu, "Matern smoothness")->capture_default_str();
  c_grf->add_option("--a", gp.a, "Matern inverse range")->capture_default_str();
  c_grf->add_option("--rho", gp.rho, "Colocated correlation")->capture_default_str();
  c_grf->add_option("--sigma2", gp.sigma2, "Marginal variance")->capture_default_str();
  c_grf->add_option("--delta", gp.delta, "Contamination probabilities")->delimiter(',')->capture_default_str();
  c_grf->add_option("--tau2", gp.tau2, "Noise variances")->delimiter(',')->capture_default_str();
  c_grf->add_option("--replicates", gp.replicates, "Field pairs")->capture_default_str();
  c_grf->callback([&] {
    gp.method = parse_method(gp_method);
    action = [&] { exp::run_grf(context_of(common, args), gp); };
  });

  // exp-missing
  exp::MissingParams mp;
  std::optional<std::string> mp_input;
  auto* c_mis = app.add_subcommand("exp-missing", "Randomly placed missing blocks");
  add_common(c_mis, common);
  c_mis->add_option("--input", mp_input, "Reference grid (.pgm or .csv); synthetic texture if omitted");
  c_mis->add_option("--size", mp.source.size, "Synthetic texture side")->capture_default_str();
  c_mis->add_option("--block-size", mp.block_size, "Block sides")->delimiter(',')->capture_default_str();
  c_mis->add_option("--proportion", mp.proportion, "Per-position block probabilities")
      ->delimiter(',')
      ->capture_default_str();
  c_mis->add_option("--replicates", mp.replicates, "Seeds per combination")->capture_default_str();
  c_mis->callback([&] {
    if (mp_input) mp.source.input = *mp_input;
    action = [&] { exp::run_missing(context_of(common, args), mp); };
  });

  // exp-gap
  exp::GapParams gap;
  std::optional<std::string> gap_input;
  std::string gap_anchor = "center";
  bool gap_no_grids = false;
  auto* c_gap = app.add_subcommand("exp-gap", "Single square gap, imputed before mapping");
  add_common(c_gap, common);
  c_gap->add_option("--input", gap_input, "Reference grid (.pgm or .csv); synthetic texture if omitted");
  c_gap->add_option("--size", gap.source.size, "Synthetic texture side")->capture_default_str();
  c_gap->add_option("--gap-size", gap.gap_size, "Gap sides")->delimiter(',')->capture_default_str();
  c_gap->add_option("--anchor", gap_anchor, "center or random")->capture_default_str();
  c_gap->add_flag("--no-imputed", gap_no_grids, "Skip writing the imputed grids");
  c_gap->callback([&] {
    if (gap_input) gap.source.input = *gap_input;
    if (gap_anchor != "center" && gap_anchor != "random") {
      throw Error(ErrorCode::InvalidArgument, "--anchor must be center or random");
    }
    gap.random_anchor = gap_anchor == "random";
    gap.write_imputed = !gap_no_grids;
    action = [&] { exp::run_gap(context_of(common, args), gap); };
  });

  // exp-thinning
  exp::ThinningParams tp;
  std::optional<std::string> tp_trees, tp_soil;
  std::vector<std::string> tp_lambda, tp_family, tp_nugget, tp_detrend;
  auto* c_thin = app.add_subcommand("exp-thinning", "Kriged soil surfaces from thinned samples vs tree marks");
  add_common(c_thin, common);
  c_thin->add_option("--trees", tp_trees, "Tree CSV with x, y and the tree mark");
  c_thin->add_option("--soil", tp_soil, "Soil CSV with x, y and one column per element");
  c_thin->add_option("--tree-mark", tp.tree_mark, "Tree mark column")->capture_default_str();
  c_thin->add_option("--species-column", tp.species_column, "Column used to select one species");
  c_thin->add_option("--species", tp.species, "Species to keep");
  c_thin->add_option("--elements", tp.elements, "Soil elements")->delimiter(',')->capture_default_str();
  c_thin->add_option("--keep", tp.keep, "Fractions of soil samples kept")->delimiter(',')->capture_default_str();
  c_thin->add_option("--lambda", tp_lambda, "Box-Cox lambda per element, e.g. Ca=0.5");
  c_thin->add_option("--family", tp_family, "Variogram family per element, e.g. Al=wave");
  c_thin->add_option("--nugget", tp_nugget, "Fixed nugget per element, or ELEMENT=estimated");
  c_thin->add_option("--detrend", tp_detrend, "poly2 or none per element");
  c_thin->add_option("--spacing", tp.spacing, "Lag bin spacing for the point map")->capture_default_str();
  c_thin->add_option("--point-max-lag", tp.max_lag, "Lag bins per axis")->capture_default_str();
  c_thin->add_option("--synthetic-trees", tp.synthetic_trees, "Trees in the synthetic plot")
      ->capture_default_str();
  c_thin->callback([&] {
    if (tp_trees) tp.trees = *tp_trees;
    if (tp_soil) tp.soil = *tp_soil;
    tp.models = exp::default_element_models();
    for (const auto& s : tp_lambda) {
      auto [e, v] = split_assignment(s, "--lambda");
      tp.models[e].lambda = to_number(v, "--lambda");
    }
    for (const auto& s : tp_family) {
      auto [e, v] = split_assignment(s, "--family");
      tp.models[e].family = parse_variogram_family(v);
    }
    for (const auto& s : tp_nugget) {
      auto [e, v] = split_assignment(s, "--nugget");
      tp.models[e].nugget = v == "estimated" ? std::nullopt : std::optional(to_number(v, "--nugget"));
    }
    for (const auto& s : tp_detrend) {
      auto [e, v] = split_assignment(s, "--detrend");
      tp.models[e].detrend = parse_detrend(v);
    }
    action = [&] { exp::run_thinning(context_of(common, args), tp); };
  });

  // map
  std::string map_x, map_y;
  auto* c_map = app.add_subcommand("map", "Codispersion map between two grids");
  add_common(c_map, common);
  c_map->add_option("--x", map_x, "First grid (.pgm or .csv)")->required();
  c_map->add_option("--y", map_y, "Second grid (.pgm or .csv)")->required();
  c_map->callback([&] {
    action = [&] {
      const RunContext ctx = context_of(common, args);
      exp::guarded_run(ctx, "map", [&](OutputDir& o) {
        const Grid x = exp::load_grid(map_x), y = exp::load_grid(map_y);
        const CodispMap m = codisp_map(x, y, ctx.map.window_for(x.rows(), x.cols()), ctx.map.config());
        o.write_map("map", m);
        exp::SummaryTable t("map", {}, ctx.map.min_pairs);
        t.set_row(0, {}, summarize(m));
        o.write("summary.csv", t.format());
        RunRecord r;
        r.parameters = {{"x", map_x}, {"y", map_y}};
        r.input_digests = {{map_x, io::sha256_file(map_x)}, {map_y, io::sha256_file(map_y)}};
        return r;
      });
    };
  });

  // contaminate
  std::string ct_input, ct_mode = "mixture";
  MixtureNoiseSpec ct_mix;
  double ct_low = 0.0, ct_high = 255.0;
  std::size_t ct_block = 15;
  double ct_prop = 0.000002;
  std::vector<std::size_t> ct_gap{50};
  std::optional<std::size_t> ct_row, ct_col;
  auto* c_ct = app.add_subcommand("contaminate", "Apply one contamination to a grid");
  add_common(c_ct, common);
  c_ct->add_option("--input", ct_input, "Grid (.pgm or .csv)")->required();
  c_ct->add_option("--mode", ct_mode, "mixture, classic, blocks or gap")->capture_default_str();
  c_ct->add_option("--delta", ct_mix.delta, "Contamination probability")->capture_default_str();
  c_ct->add_option("--tau2", ct_mix.tau2, "Noise variance")->capture_default_str();
  c_ct->add_option("--sigma2", ct_mix.sigma2, "Clean-component variance")->capture_default_str();
  c_ct->add_option("--low", ct_low, "Classic mode low value")->capture_default_str();
  c_ct->add_option("--high", ct_high, "Classic mode high value")->capture_default_str();
  c_ct->add_option("--block-size", ct_block, "Block side")->capture_default_str();
  c_ct->add_option("--proportion", ct_prop, "Per-position block probability")->capture_default_str();
  c_ct->add_option("--gap-size", ct_gap, "Gap side, or rows,cols")->delimiter(',')->capture_default_str();
  c_ct->add_option("--anchor-row", ct_row, "Gap top row (random if omitted)");
  c_ct->add_option("--anchor-col", ct_col, "Gap left column (random if omitted)");
  c_ct->callback([&] {
    action = [&] {
      const RunContext ctx = context_of(common, args);
      exp::guarded_run(ctx, "contaminate", [&](OutputDir& o) {
        const Grid g = exp::load_grid(ct_input);
        const std::uint64_t seed = derive_seed(ctx.seed, 1);
        RunRecord r;
        r.parameters = {{"input", ct_input}, {"mode", ct_mode}};
        Grid res;
        if (ct_mode == "mixture") {
          ct_mix.seed = seed;
          res = salt_pepper_mixture(g, ct_mix);
          r.parameters["delta"] = ct_mix.delta;
          r.parameters["tau2"] = ct_mix.tau2;
          r.parameters["sigma2"] = ct_mix.sigma2;
        } else if (ct_mode == "classic") {
          res = salt_pepper_classic(g, ct_mix.delta, ct_low, ct_high, seed);
          r.parameters["delta"] = ct_mix.delta;
          r.parameters["low"] = ct_low;
          r.parameters["high"] = ct_high;
        } else if (ct_mode == "blocks") {
          res = missing_random_blocks(g, {ct_block, ct_prop, seed});
          r.parameters["block_size"] = ct_block;
          r.parameters["proportion"] = ct_prop;
        } else if (ct_mode == "gap") {
          if (ct_gap.empty() || ct_gap.size() > 2) throw Error(ErrorCode::InvalidArgument, "--gap-size takes 1 or 2 values");
          if (ct_row.has_value() != ct_col.has_value()) {
            throw Error(ErrorCode::InvalidArgument, "--anchor-row and --anchor-col go together");
          }
          GapSpec spec{ct_gap[0], ct_gap.back(), std::nullopt, seed};
          if (ct_row) spec.anchor = GapAnchor{*ct_row, *ct_col};
          const GapAnchor a = resolve_gap_anchor(g, spec);
          spec.anchor = a;
          res = cut_gap(g, spec);
          r.parameters["gap_rows"] = spec.gap_rows;
          r.parameters["gap_cols"] = spec.gap_cols;
          r.parameters["anchor"] = {a.row, a.col};
        } else {
          throw Error(ErrorCode::InvalidArgument, "--mode must be mixture, classic, blocks or gap");
        }
        write_grid_outputs(o, "contaminated", res);
        r.input_digests = {{ct_input, io::sha256_file(ct_input)}};
        return r;
      });
    };
  });

  // simulate
  std::string sim_kind = "bivariate", sim_method = "mixing";
  std::size_t sim_rows = 64, sim_cols = 64;
  double sim_nu = 0.5, sim_a = 0.1, sim_rho = 0.8, sim_sigma2 = 1.0, sim_noise = 1.0;
  std::vector<double> sim_phi{0.4, 0.3, -0.1};
  auto* c_sim = app.add_subcommand("simulate", "Simulate Gaussian or AR-2D fields");
  add_common(c_sim, common);
  c_sim->add_option("--kind", sim_kind, "bivariate, grf or ar2d")->capture_default_str();
  c_sim->add_option("--rows", sim_rows, "Rows")->capture_default_str();
  c_sim->add_option("--cols", sim_cols, "Columns")->capture_default_str();
  c_sim->add_option("--method", sim_method, "mixing or cholesky (bivariate)")->capture_default_str();
  c_sim->add_option("--nu", sim_nu, "Matern smoothness")->capture_default_str();
  c_sim->add_option("--a", sim_a, "Matern inverse range")->capture_default_str();
  c_sim->add_option("--rho", sim_rho, "Colocated correlation (bivariate)")->capture_default_str();
  c_sim->add_option("--sigma2", sim_sigma2, "Marginal variance")->capture_default_str();
  c_sim->add_option("--phi", sim_phi, "AR-2D coefficients phi1,phi2,phi3")->delimiter(',')->expected(3);
  c_sim->add_option("--noise-sd", sim_noise, "AR-2D innovation sd")->capture_default_str();
  c_sim->callback([&] {
    action = [&] {
      const RunContext ctx = context_of(common, args);
      exp::guarded_run(ctx, "simulate", [&](OutputDir& o) {
        const std::uint64_t seed = derive_seed(ctx.seed, 1);
        RunRecord r;
        r.parameters = {{"kind", sim_kind}, {"rows", sim_rows}, {"cols", sim_cols}};
        if (sim_kind == "bivariate") {
          const auto p = MaternParams::parsimonious(sim_nu, sim_nu, sim_a, sim_a, sim_a, sim_sigma2, sim_sigma2,
                                                    sim_rho, 0.0, 0.0);
          const FieldPair f = simulate_bivariate_grf(sim_rows, sim_cols, p, parse_method(sim_method), seed);
          write_grid_outputs(o, "x", f.x);
          write_grid_outputs(o, "y", f.y);
          r.parameters.update({{"method", sim_method}, {"nu", sim_nu}, {"a", sim_a}, {"rho", sim_rho},
                               {"sigma2", sim_sigma2}});
        } else if (sim_kind == "grf") {
          write_grid_outputs(o, "field", simulate_grf(sim_rows, sim_cols, sim_nu, sim_a, sim_sigma2, 0.0, seed));
          r.parameters.update({{"nu", sim_nu}, {"a", sim_a}, {"sigma2", sim_sigma2}});
        } else if (sim_kind == "ar2d") {
          const Ar2dCoeffs c{sim_phi[0], sim_phi[1], sim_phi[2]};
          write_grid_outputs(o, "field", simulate_ar2d(sim_rows, sim_cols, c, sim_noise, seed));
          r.parameters.update({{"phi", sim_phi}, {"noise_sd", sim_noise}});
        } else {
          throw Error(ErrorCode::InvalidArgument, "--kind must be bivariate, grf or ar2d");
        }
        return r;
      });
    };
  });

  // impute
  std::string imp_input;
  auto* c_imp = app.add_subcommand("impute", "Fill the single rectangular gap of a grid");
  add_common(c_imp, common);
  c_imp->add_option("--input", imp_input, "Grid with one rectangular gap (.pgm + .mask.pgm, or .csv)")
      ->required();
  c_imp->callback([&] {
    action = [&] {
      const RunContext ctx = context_of(common, args);
      exp::guarded_run(ctx, "impute", [&](OutputDir& o) {
        const Grid z = exp::load_grid(imp_input);
        const auto rect = find_gap(z);
        write_grid_outputs(o, "imputed", impute_gap(z));
        RunRecord r;
        r.parameters = {{"input", imp_input}};
        if (rect) r.parameters["gap"] = {rect->row, rect->col, rect->rows, rect->cols};
        r.input_digests = {{imp_input, io::sha256_file(imp_input)}};
        return r;
      });
    };
  });

  // krige
  std::string kr_soil, kr_targets, kr_element, kr_family = "exponential", kr_detrend = "poly2";
  double kr_lambda = 1.0;
  std::optional<double> kr_nugget, kr_bin, kr_maxd;
  auto* c_kr = app.add_subcommand("krige", "Box-Cox, detrend, variogram fit and ordinary kriging");
  add_common(c_kr, common);
  c_kr->add_option("--soil", kr_soil, "Sample CSV with x, y and the element column")->required();
  c_kr->add_option("--element", kr_element, "Column to krige")->required();
  c_kr->add_option("--targets", kr_targets, "CSV with x, y prediction sites")->required();
  c_kr->add_option("--lambda", kr_lambda, "Box-Cox lambda")->capture_default_str();
  c_kr->add_option("--family", kr_family, "exponential, spherical, gaussian or wave")->capture_default_str();
  c_kr->add_option("--nugget", kr_nugget, "Fixed nugget (estimated if omitted)");
  c_kr->add_option("--detrend", kr_detrend, "poly2 or none")->capture_default_str();
  c_kr->add_option("--bin-width", kr_bin, "Variogram bin width");
  c_kr->add_option("--max-dist", kr_maxd, "Variogram distance cutoff");
  c_kr->callback([&] {
    action = [&] {
      const RunContext ctx = context_of(common, args);
      exp::guarded_run(ctx, "krige", [&](OutputDir& o) {
        const MarkedPointSet soil = io::read_points_csv(kr_soil, {kr_element});
        const MarkedPointSet targets = io::read_points_csv(kr_targets, {});
        const ModelSpec ms{parse_variogram_family(kr_family), kr_nugget, kr_bin, kr_maxd};
        const KrigeResult res =
            krige_pipeline(soil, kr_element, {kr_lambda, parse_detrend(kr_detrend)}, ms, targets.points());
        MarkedPointSet pred(targets.points(), targets.extent());
        pred.add_mark(kr_element, res.predictions);
        o.write("predictions.csv", io::format_points_csv(pred));
        std::string bins = "distance,gamma,pairs\n";
        for (const auto& b : res.bins) {
          bins += std::to_string(b.distance) + "," + std::to_string(b.gamma) + "," + std::to_string(b.pairs) + "\n";
        }
        o.write("variogram.csv", bins);
        RunRecord r;
        r.parameters = {{"soil", kr_soil},         {"targets", kr_targets}, {"element", kr_element},
                        {"lambda", kr_lambda},     {"family", kr_family},   {"detrend", kr_detrend},
                        {"fitted_nugget", res.model.nugget}, {"fitted_partial_sill", res.model.partial_sill},
                        {"fitted_range", res.model.range}};
        r.parameters["nugget"] = kr_nugget ? json(*kr_nugget) : json("estimated");
        r.input_digests = {{kr_soil, io::sha256_file(kr_soil)}, {kr_targets, io::sha256_file(kr_targets)}};
        return r;
      });
    };
  });

  // gray
  std::string gray_input;
  auto* c_gray = app.add_subcommand("gray", "Convert a PPM colour image to a PGM graymap");
  add_common(c_gray, common);
  c_gray->add_option("--input", gray_input, "P3 or P6 image")->required();
  c_gray->callback([&] {
    action = [&] {
      const RunContext ctx = context_of(common, args);
      exp::guarded_run(ctx, "gray", [&](OutputDir& o) {
        const auto [g, maxval] = io::ppm_to_gray(io::read_file(gray_input));
        o.write("gray.pgm", io::format_pgm(g, maxval));
        RunRecord r;
        r.parameters = {{"input", gray_input}, {"weights", {0.2126, 0.7152, 0.0722}}};
        r.input_digests = {{gray_input, io::sha256_file(gray_input)}};
        return r;
      });
    };
  });

  // render
  std::string render_map;
  auto* c_render = app.add_subcommand("render", "Render a map CSV as a 16-bit PGM");
  add_common(c_render, common);
  c_render->add_option("--map", render_map, "Map CSV (h1,h2,value,pairs)")->required();
  c_render->callback([&] {
    action = [&] {
      const RunContext ctx = context_of(common, args);
      exp::guarded_run(ctx, "render", [&](OutputDir& o) {
        const CodispMap m = io::parse_map_csv(io::read_file(render_map));
        o.write_map_image(fs::path(render_map).stem().string(), m);
        RunRecord r;
        r.parameters = {{"map", render_map}};
        r.input_digests = {{render_map, io::sha256_file(render_map)}};
        return r;
      });
    };
  });

  // replay
  std::string rp_manifest, rp_out;
  std::optional<int> rp_threads;
  auto* c_rp = app.add_subcommand("replay", "Re-run a manifest and compare output digests");
  c_rp->add_option("manifest", rp_manifest, "manifest.json of an earlier run")->required();
  c_rp->add_option("--out", rp_out, "Output directory for the re-run")->required();
  c_rp->add_option("--threads", rp_threads, "Worker threads for the re-run");
  int rp_code = 0;
  c_rp->callback([&] { action = [&] { rp_code = replay(rp_manifest, rp_out, rp_threads, out, err); }; });

  try {
    app.parse(std::vector<std::string>(args.rbegin(), args.rend()));
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  const int saved_threads = omp_get_max_threads();
  if (common.threads > 0) omp_set_num_threads(common.threads);
  struct Restore {
    int n;
    ~Restore() { omp_set_num_threads(n); }
  } restore{saved_threads};
  action();
  return rp_code;
}

int replay(const fs::path& manifest_path, const std::string& out_dir, std::optional<int> threads,
           std::ostream& out, std::ostream& err) {
  const json m = json::parse(io::read_file(manifest_path));
  std::vector<std::string> argv = m.at("argv").get<std::vector<std::string>>();
  std::vector<std::string> next;
  for (std::size_t i = 0; i < argv.size(); ++i) {
    const std::string& a = argv[i];
    const bool drop_pair = a == "--out" || (threads && a == "--threads");
    if (drop_pair) {
      ++i;
      continue;
    }
    if (a.rfind("--out=", 0) == 0 || (threads && a.rfind("--threads=", 0) == 0)) continue;
    next.push_back(a);
  }
  next.push_back("--out");
  next.push_back(out_dir);
  if (threads) {
    next.push_back("--threads");
    next.push_back(std::to_string(*threads));
  }
  const int code = dispatch(next, out, err);
  if (code != 0) return code;

  std::size_t same = 0, differ = 0;
  for (const auto& [name, digest] : m.at("outputs").items()) {
    const fs::path p = fs::path(out_dir) / name;
    if (fs::exists(p) && io::sha256_file(p) == digest.get<std::string>()) {
      ++same;
    } else {
      ++differ;
      err << "replay: " << name << " differs\n";
    }
  }
  out << "replay: " << same << " identical, " << differ << " different\n";
  return differ == 0 ? 0 : 4;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  try {
    return dispatch(args, out, err);
  } catch (const Error& e) {
    err << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
    switch (e.category()) {
      case ErrorCategory::Usage: return 2;
      case ErrorCategory::InputFormat: return 3;
      case ErrorCategory::Numerical: return 4;
    }
    return 4;
  } catch (const json::exception& e) {
    err << "error: malformed manifest: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 4;
  }
}

}  // namespace codisp
