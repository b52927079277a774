#pragma once

// Seeded experiment drivers. Each driver writes, into one output directory,
// a map_<params>.csv / .pgm pair per parameter combination, summary.csv and
// manifest.json. Outputs depend only on the inputs, parameters and seed.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "codisp/codispersion.hpp"
#include "codisp/grid.hpp"
#include "codisp/kriging.hpp"
#include "codisp/randomfield.hpp"

namespace codisp::exp {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

inline constexpr const char* kVersion = "0.3.1";

/// Tracks every file written into one directory so a failed run can be
/// rolled back and the manifest can list its outputs.
class OutputDir {
 public:
  explicit OutputDir(fs::path dir);

  const fs::path& path() const noexcept { return dir_; }
  void write(const std::string& name, const std::string& content);
  /// <stem>.csv plus the rendered <stem>.pgm and its mask.
  void write_map(const std::string& stem, const CodispMap& map);
  void write_map_image(const std::string& stem, const CodispMap& map);
  void write_grid_csv(const std::string& name, const Grid& g);
  /// Sorted file names (relative to the directory).
  std::vector<std::string> files() const;
  /// Removes everything written so far.
  void discard() noexcept;

 private:
  fs::path dir_;
  mutable std::mutex mu_;
  std::vector<std::string> files_;
};

/// summary.csv rows: experiment, params..., mean_codisp, min_codisp,
/// max_codisp, defined_fraction, pair_floor. Rows are ordered by index and
/// may be set from several threads.
class SummaryTable {
 public:
  SummaryTable(std::string experiment, std::vector<std::string> param_columns, std::size_t pair_floor);
  void set_row(std::size_t i, std::vector<std::string> params, const MapSummary& s);
  std::string format() const;

 private:
  std::string experiment_;
  std::vector<std::string> columns_;
  std::size_t pair_floor_;
  mutable std::mutex mu_;
  std::map<std::size_t, std::vector<std::string>> rows_;
};

/// Lag window and pair floor shared by all drivers.
struct MapOptions {
  std::optional<int> max_lag_x;
  std::optional<int> max_lag_y;
  std::size_t min_pairs = 30;

  LagWindow window_for(std::size_t rows, std::size_t cols) const;
  CodispConfig config() const;
  json to_json() const;
};

/// A texture read from a PGM/CSV file, or a synthetic Matern field
/// (nu = 1.5, range 40 cells, unit variance) when no file is given.
struct TextureSource {
  std::optional<fs::path> input;
  std::size_t size = 512;
};

struct RunContext {
  fs::path out;
  std::uint64_t seed = 1;
  MapOptions map;
  std::vector<std::string> argv;  ///< recorded verbatim in the manifest
  int threads = 0;                ///< 0 = OpenMP default
};

struct SaltPepperParams {
  TextureSource source;
  std::string mode = "mixture";  ///< mixture | classic
  std::vector<double> delta{0.05, 0.10, 0.25};
  std::vector<double> tau2{1.0, 5.0, 10.0};
  double sigma2 = 1.0;
  double low = 0.0, high = 255.0;
  std::size_t replicates = 1;
};

struct GrfParams {
  std::size_t size = 64;
  SimulationMethod method = SimulationMethod::Mixing;
  double nu = 0.5;
  double a = 0.1;
  double rho = 0.8;
  double sigma2 = 1.0;
  std::vector<double> delta{0.05, 0.10, 0.25};
  std::vector<double> tau2{10.0};
  std::size_t replicates = 1;
};

struct MissingParams {
  TextureSource source;
  std::vector<std::size_t> block_size{15, 30, 60};
  std::vector<double> proportion{0.000002, 0.000004, 0.000008};
  std::size_t replicates = 1;
};

struct GapParams {
  TextureSource source{std::nullopt, 1024};
  std::vector<std::size_t> gap_size{50, 100, 200};
  bool random_anchor = false;
  bool write_imputed = true;
};

struct ElementModel {
  double lambda = 1.0;
  VariogramFamily family = VariogramFamily::Exponential;
  std::optional<double> nugget;
  Detrend detrend = Detrend::Poly2;
};

struct ThinningParams {
  std::optional<fs::path> trees;
  std::optional<fs::path> soil;
  std::string tree_mark = "dbh";
  std::optional<std::string> species_column;
  std::optional<std::string> species;
  std::vector<std::string> elements{"Al", "Ca", "P"};
  std::vector<double> keep{1.0, 0.9, 0.8};
  std::map<std::string, ElementModel> models;  ///< per element, defaults filled in
  double spacing = 20.0;
  int max_lag = 10;
  std::size_t synthetic_trees = 3000;
};

/// Box-Cox lambda, variogram family and nugget used for Al, Ca and P unless
/// overridden.
std::map<std::string, ElementModel> default_element_models();

/// Synthetic stand-in for a forest plot: soil samples on a 25 x 20 lattice
/// over a 1000 x 500 extent, carrying Al, Ca and P driven by a smooth latent
/// surface, and `n_trees` uniformly placed trees whose dbh mark follows the
/// same surface.
std::pair<MarkedPointSet, MarkedPointSet> synthetic_plot(std::uint64_t seed, std::size_t n_trees = 3000);

/// Smooth Matern texture used when a driver has no input file.
Grid synthetic_texture(std::size_t size, std::uint64_t seed);

void run_saltpepper(const RunContext& ctx, const SaltPepperParams& p);
void run_grf(const RunContext& ctx, const GrfParams& p);
void run_missing(const RunContext& ctx, const MissingParams& p);
void run_gap(const RunContext& ctx, const GapParams& p);
void run_thinning(const RunContext& ctx, const ThinningParams& p);

/// Reads a grid from .pgm or .csv.
Grid load_grid(const fs::path& path);

struct RunRecord {
  json parameters = json::object();
  std::map<std::string, std::string> input_digests;  ///< path -> sha256
};

/// Runs `body` against the output directory and writes manifest.json on
/// success. On any exception every file written so far is removed before
/// rethrowing.
void guarded_run(const RunContext& ctx, const std::string& command,
                 const std::function<RunRecord(OutputDir&)>& body);

}  // namespace codisp::exp
