#pragma once

// File formats: PGM (P2/P5, optional .mask.pgm sidecar), CSV grids with an
// NA token, header-driven point CSVs, codispersion maps as CSV and PGM, and
// the PPM -> gray luminance converter.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "codisp/grid.hpp"

namespace codisp::io {

namespace fs = std::filesystem;

/// Whole file as bytes. Throws IoError.
std::string read_file(const fs::path& path);
/// Writes to a temporary sibling and renames it into place. Throws IoError.
void write_file_atomic(const fs::path& path, const std::string& content);
/// Lower-case hex SHA-256 of a file's bytes.
std::string sha256_file(const fs::path& path);

/// "a/b.pgm" -> "a/b.mask.pgm"
fs::path mask_sidecar(const fs::path& pgm_path);

enum class PgmEncoding { Ascii, Binary };

/// Parses P2 or P5 with maxval <= 65535. Throws MalformedHeader on a bad or
/// truncated file and ValueOutOfRange for samples above maxval.
Grid parse_pgm(const std::string& bytes);
/// As parse_pgm; a sibling .mask.pgm, when present, masks cells where it is 0.
Grid read_pgm(const fs::path& path);

/// Observed values are rounded to the nearest integer and must lie in
/// [0, maxval] (ValueOutOfRange). Missing cells are written as 0.
std::string format_pgm(const Grid& g, int maxval, PgmEncoding enc = PgmEncoding::Binary);
/// Writes the value file and, for a grid with missing cells, the mask
/// sidecar (0 = missing, maxval = observed). Returns the files written.
std::vector<fs::path> write_pgm(const Grid& g, const fs::path& path, int maxval = 255,
                                PgmEncoding enc = PgmEncoding::Binary);

/// Dense numeric CSV, NA for missing cells. Throws RaggedRows, UnparsableToken.
Grid parse_grid_csv(const std::string& text);
Grid read_grid_csv(const fs::path& path);
/// 17 significant digits, so values round-trip exactly.
std::string format_grid_csv(const Grid& g);
void write_grid_csv(const Grid& g, const fs::path& path);

struct RowFilter {
  std::string column;
  std::string value;
};

/// Header-driven point reader: columns x and y are required, each name in
/// `marks` becomes a numeric mark. Rows whose `filter` column differs from
/// the filter value are skipped. Throws MissingColumn, NonNumeric.
MarkedPointSet parse_points_csv(const std::string& text, const std::vector<std::string>& marks,
                                const std::optional<RowFilter>& filter = std::nullopt);
MarkedPointSet read_points_csv(const fs::path& path, const std::vector<std::string>& marks,
                               const std::optional<RowFilter>& filter = std::nullopt);
/// x, y, then all marks in name order.
std::string format_points_csv(const MarkedPointSet& pts);

/// h1,h2,value,pairs with h1 = column offset, h2 = row offset; NA for
/// undefined lags.
std::string format_map_csv(const CodispMap& map);
/// Inverse of format_map_csv; the lag set must form a full window.
CodispMap parse_map_csv(const std::string& text);

/// Map image of (max_y + 1) x (2 max_x + 1) cells, top row = largest row
/// offset, column = column offset + max_x. Values map [-1, 1] -> [0, 65535];
/// undefined lags and cells outside the window are 32768 and masked.
Grid map_image(const CodispMap& map);
std::vector<fs::path> write_map_pgm(const CodispMap& map, const fs::path& path);

/// P3/P6 colour image converted to gray: 0.2126 R + 0.7152 G + 0.0722 B,
/// rounded half-up. Returns the gray grid and the source maxval.
std::pair<Grid, int> ppm_to_gray(const std::string& bytes);

}  // namespace codisp::io
