#include "codisp/io.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "codisp/error.hpp"

namespace codisp::io {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const fs::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error(ErrorCode::IoError, "short write to " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error(ErrorCode::IoError, "cannot rename into " + path.string());
  }
}

std::string sha256_file(const fs::path& path) {
  const std::string bytes = read_file(path);
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::IoError, "sha256 failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 0xF];
  }
  return out;
}

fs::path mask_sidecar(const fs::path& pgm_path) {
  fs::path p = pgm_path;
  p.replace_extension();
  p += ".mask.pgm";
  return p;
}

namespace {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Netpbm header tokenizer: whitespace separated, '#' starts a comment.
class PnmReader {
 public:
  explicit PnmReader(const std::string& bytes) : s_(bytes) {}

  std::string magic() {
    if (s_.size() < 2) throw Error(ErrorCode::MalformedHeader, "file too short");
    pos_ = 2;
    return s_.substr(0, 2);
  }

  long long integer() {
    skip_space();
    const std::size_t start = pos_;
    while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    if (start == pos_) throw Error(ErrorCode::MalformedHeader, "expected an integer");
    if (pos_ - start > 12) throw Error(ErrorCode::ValueOutOfRange, "integer too large");
    return std::stoll(s_.substr(start, pos_ - start));
  }

  // The single whitespace byte that separates the header from raster data.
  void raster_start() {
    if (pos_ >= s_.size() || !std::isspace(static_cast<unsigned char>(s_[pos_]))) {
      throw Error(ErrorCode::MalformedHeader, "missing separator before raster");
    }
    ++pos_;
  }

  std::size_t pos() const noexcept { return pos_; }
  const std::string& data() const noexcept { return s_; }

 private:
  void skip_space() {
    while (pos_ < s_.size()) {
      const char c = s_[pos_];
      if (c == '#') {
        while (pos_ < s_.size() && s_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        break;
      }
    }
    if (pos_ >= s_.size()) throw Error(ErrorCode::MalformedHeader, "unexpected end of file");
  }

  const std::string& s_;
  std::size_t pos_ = 0;
};

struct PnmHeader {
  bool ascii = false;
  int channels = 1;
  std::size_t width = 0, height = 0;
  int maxval = 0;
};

PnmHeader read_header(PnmReader& rd, bool color) {
  const std::string m = rd.magic();
  PnmHeader h;
  if (!color && (m == "P2" || m == "P5")) {
    h.ascii = m == "P2";
  } else if (color && (m == "P3" || m == "P6")) {
    h.ascii = m == "P3";
    h.channels = 3;
  } else {
    throw Error(ErrorCode::MalformedHeader, "unsupported magic '" + m + "'");
  }
  const long long w = rd.integer(), ht = rd.integer(), mv = rd.integer();
  if (w <= 0 || ht <= 0) throw Error(ErrorCode::MalformedHeader, "zero image dimension");
  if (mv <= 0 || mv > 65535) throw Error(ErrorCode::ValueOutOfRange, "maxval must be in 1..65535");
  h.width = static_cast<std::size_t>(w);
  h.height = static_cast<std::size_t>(ht);
  h.maxval = static_cast<int>(mv);
  return h;
}

std::vector<int> read_samples(PnmReader& rd, const PnmHeader& h) {
  const std::size_t n = h.width * h.height * static_cast<std::size_t>(h.channels);
  std::vector<int> out(n);
  if (h.ascii) {
    for (auto& v : out) {
      const long long s = rd.integer();
      if (s > h.maxval) throw Error(ErrorCode::ValueOutOfRange, "sample exceeds maxval");
      v = static_cast<int>(s);
    }
    return out;
  }
  rd.raster_start();
  const std::size_t bps = h.maxval < 256 ? 1 : 2;
  const std::string& s = rd.data();
  if (s.size() - rd.pos() < n * bps) throw Error(ErrorCode::MalformedHeader, "truncated raster");
  const auto* p = reinterpret_cast<const unsigned char*>(s.data() + rd.pos());
  for (std::size_t i = 0; i < n; ++i) {
    const int v = bps == 1 ? p[i] : (p[2 * i] << 8) | p[2 * i + 1];
    if (v > h.maxval) throw Error(ErrorCode::ValueOutOfRange, "sample exceeds maxval");
    out[i] = v;
  }
  return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    out.push_back(std::move(line));
  }
  while (!out.empty() && trim(out.back()).empty()) out.pop_back();
  return out;
}

std::optional<double> parse_double(const std::string& tok) {
  const std::string t = trim(tok);
  if (t.empty()) return std::nullopt;
  double v = 0.0;
  const char* first = t.data();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace

Grid parse_pgm(const std::string& bytes) {
  PnmReader rd(bytes);
  const PnmHeader h = read_header(rd, false);
  const std::vector<int> s = read_samples(rd, h);
  std::vector<double> values(s.begin(), s.end());
  return Grid(h.height, h.width, std::move(values));
}

Grid read_pgm(const fs::path& path) {
  Grid g = parse_pgm(read_file(path));
  const fs::path mpath = mask_sidecar(path);
  if (!fs::exists(mpath)) return g;
  const Grid m = parse_pgm(read_file(mpath));
  if (m.rows() != g.rows() || m.cols() != g.cols()) {
    throw Error(ErrorCode::MalformedHeader, "mask sidecar dimensions differ");
  }
  std::vector<std::uint8_t> mask(g.size());
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = m.values()[i] != 0.0 ? 1 : 0;
  return Grid(g.rows(), g.cols(), std::vector<double>(g.values().begin(), g.values().end()), std::move(mask));
}

std::string format_pgm(const Grid& g, int maxval, PgmEncoding enc) {
  if (maxval <= 0 || maxval > 65535) throw Error(ErrorCode::ValueOutOfRange, "maxval must be in 1..65535");
  std::vector<int> samples(g.size(), 0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!g.mask()[i]) continue;
    const double v = std::round(g.values()[i]);
    if (v < 0.0 || v > maxval) throw Error(ErrorCode::ValueOutOfRange, "value outside [0, maxval]");
    samples[i] = static_cast<int>(v);
  }
  std::string out = (enc == PgmEncoding::Ascii ? "P2\n" : "P5\n") + std::to_string(g.cols()) + " " +
                    std::to_string(g.rows()) + "\n" + std::to_string(maxval) + "\n";
  if (enc == PgmEncoding::Ascii) {
    for (std::size_t r = 0; r < g.rows(); ++r) {
      for (std::size_t c = 0; c < g.cols(); ++c) {
        if (c) out += ' ';
        out += std::to_string(samples[g.index(r, c)]);
      }
      out += '\n';
    }
  } else if (maxval < 256) {
    for (int v : samples) out += static_cast<char>(v);
  } else {
    for (int v : samples) {
      out += static_cast<char>(v >> 8);
      out += static_cast<char>(v & 0xFF);
    }
  }
  return out;
}

std::vector<fs::path> write_pgm(const Grid& g, const fs::path& path, int maxval, PgmEncoding enc) {
  write_file_atomic(path, format_pgm(g, maxval, enc));
  std::vector<fs::path> written{path};
  if (!g.fully_observed()) {
    Grid m(g.rows(), g.cols());
    for (std::size_t r = 0; r < g.rows(); ++r) {
      for (std::size_t c = 0; c < g.cols(); ++c) m.set(r, c, g.observed(r, c) ? maxval : 0);
    }
    write_file_atomic(mask_sidecar(path), format_pgm(m, maxval, enc));
    written.push_back(mask_sidecar(path));
  }
  return written;
}

Grid parse_grid_csv(const std::string& text) {
  const auto lines = lines_of(text);
  if (lines.empty()) throw Error(ErrorCode::UnparsableToken, "empty grid file");
  std::size_t cols = 0;
  std::vector<double> values;
  std::vector<std::uint8_t> mask;
  for (std::size_t r = 0; r < lines.size(); ++r) {
    const auto toks = split_csv_line(lines[r]);
    if (r == 0) cols = toks.size();
    if (toks.size() != cols) {
      throw Error(ErrorCode::RaggedRows, "row " + std::to_string(r + 1) + " has " + std::to_string(toks.size()) +
                                             " fields, expected " + std::to_string(cols));
    }
    for (const auto& tok : toks) {
      if (trim(tok) == "NA") {
        values.push_back(0.0);
        mask.push_back(0);
        continue;
      }
      const auto v = parse_double(tok);
      if (!v) throw Error(ErrorCode::UnparsableToken, "cannot parse '" + tok + "'");
      values.push_back(*v);
      mask.push_back(1);
    }
  }
  return Grid(lines.size(), cols, std::move(values), std::move(mask));
}

Grid read_grid_csv(const fs::path& path) { return parse_grid_csv(read_file(path)); }

std::string format_grid_csv(const Grid& g) {
  std::string out;
  for (std::size_t r = 0; r < g.rows(); ++r) {
    for (std::size_t c = 0; c < g.cols(); ++c) {
      if (c) out += ',';
      out += g.observed(r, c) ? format_double(g.value(r, c)) : "NA";
    }
    out += '\n';
  }
  return out;
}

void write_grid_csv(const Grid& g, const fs::path& path) { write_file_atomic(path, format_grid_csv(g)); }

MarkedPointSet parse_points_csv(const std::string& text, const std::vector<std::string>& marks,
                                const std::optional<RowFilter>& filter) {
  const auto lines = lines_of(text);
  if (lines.empty()) throw Error(ErrorCode::MissingColumn, "points file has no header");
  const auto header = split_csv_line(lines[0]);
  auto column = [&](const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (trim(header[i]) == name) return i;
    }
    throw Error(ErrorCode::MissingColumn, "column '" + name + "' not found");
  };
  const std::size_t cx = column("x"), cy = column("y");
  std::vector<std::size_t> cm;
  for (const auto& m : marks) cm.push_back(column(m));
  const std::optional<std::size_t> cf = filter ? std::optional(column(filter->column)) : std::nullopt;

  std::vector<Point> pts;
  std::vector<std::vector<double>> mark_values(marks.size());
  for (std::size_t r = 1; r < lines.size(); ++r) {
    if (trim(lines[r]).empty()) continue;
    const auto toks = split_csv_line(lines[r]);
    if (toks.size() != header.size()) {
      throw Error(ErrorCode::NonNumeric, "line " + std::to_string(r + 1) + " has the wrong field count");
    }
    if (cf && trim(toks[*cf]) != filter->value) continue;
    auto num = [&](std::size_t c) {
      const auto v = parse_double(toks[c]);
      if (!v) {
        throw Error(ErrorCode::NonNumeric,
                    "line " + std::to_string(r + 1) + ", column '" + trim(header[c]) + "': '" + toks[c] + "'");
      }
      return *v;
    };
    pts.push_back({num(cx), num(cy)});
    for (std::size_t k = 0; k < cm.size(); ++k) mark_values[k].push_back(num(cm[k]));
  }
  if (pts.empty()) throw Error(ErrorCode::EmptyResult, "no points selected");
  MarkedPointSet set(std::move(pts));
  for (std::size_t k = 0; k < marks.size(); ++k) set.add_mark(marks[k], std::move(mark_values[k]));
  return set;
}

MarkedPointSet read_points_csv(const fs::path& path, const std::vector<std::string>& marks,
                               const std::optional<RowFilter>& filter) {
  return parse_points_csv(read_file(path), marks, filter);
}

std::string format_points_csv(const MarkedPointSet& pts) {
  const auto names = pts.mark_names();
  std::string out = "x,y";
  for (const auto& n : names) out += "," + n;
  out += '\n';
  for (std::size_t i = 0; i < pts.size(); ++i) {
    out += format_double(pts.points()[i].x) + "," + format_double(pts.points()[i].y);
    for (const auto& n : names) out += "," + format_double(pts.mark(n)[i]);
    out += '\n';
  }
  return out;
}

std::string format_map_csv(const CodispMap& map) {
  std::string out = "h1,h2,value,pairs\n";
  const auto& lags = map.window.lags();
  for (std::size_t i = 0; i < lags.size(); ++i) {
    out += std::to_string(lags[i].dx) + "," + std::to_string(lags[i].dy) + ",";
    out += map.defined(i) ? format_double(map.values[i]) : "NA";
    out += "," + std::to_string(map.pair_counts[i]) + "\n";
  }
  return out;
}

CodispMap parse_map_csv(const std::string& text) {
  const auto lines = lines_of(text);
  if (lines.empty() || trim(lines[0]) != "h1,h2,value,pairs") {
    throw Error(ErrorCode::MalformedHeader, "expected header h1,h2,value,pairs");
  }
  struct Row {
    int dx, dy;
    double value;
    std::size_t pairs;
  };
  std::vector<Row> rows;
  int mx = 0, my = 0;
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto toks = split_csv_line(lines[r]);
    if (toks.size() != 4) throw Error(ErrorCode::RaggedRows, "map rows need 4 fields");
    const auto dx = parse_double(toks[0]), dy = parse_double(toks[1]), pairs = parse_double(toks[3]);
    if (!dx || !dy || !pairs) throw Error(ErrorCode::UnparsableToken, "bad map row " + std::to_string(r + 1));
    double value = std::numeric_limits<double>::quiet_NaN();
    if (trim(toks[2]) != "NA") {
      const auto v = parse_double(toks[2]);
      if (!v) throw Error(ErrorCode::UnparsableToken, "bad map value '" + toks[2] + "'");
      value = *v;
    }
    rows.push_back({static_cast<int>(*dx), static_cast<int>(*dy), value, static_cast<std::size_t>(*pairs)});
    mx = std::max(mx, std::abs(rows.back().dx));
    my = std::max(my, rows.back().dy);
  }
  CodispMap map;
  map.window = build_lag_window(std::max(mx, 1), std::max(my, 1));
  if (map.window.size() != rows.size()) throw Error(ErrorCode::MalformedHeader, "map lags do not form a window");
  map.values.resize(rows.size());
  map.pair_counts.resize(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Lag& l = map.window.lags()[i];
    if (rows[i].dx != l.dx || rows[i].dy != l.dy) {
      throw Error(ErrorCode::MalformedHeader, "map lags out of order");
    }
    map.values[i] = rows[i].value;
    map.pair_counts[i] = rows[i].pairs;
  }
  return map;
}

Grid map_image(const CodispMap& map) {
  const int mx = map.window.max_lag_x(), my = map.window.max_lag_y();
  const auto rows = static_cast<std::size_t>(my + 1), cols = static_cast<std::size_t>(2 * mx + 1);
  std::vector<double> values(rows * cols, 32768.0);
  std::vector<std::uint8_t> mask(rows * cols, 0);
  const auto& lags = map.window.lags();
  for (std::size_t i = 0; i < lags.size(); ++i) {
    if (!map.defined(i)) continue;
    const auto r = static_cast<std::size_t>(my - lags[i].dy);
    const auto c = static_cast<std::size_t>(lags[i].dx + mx);
    const double v = std::clamp(map.values[i], -1.0, 1.0);
    values[r * cols + c] = std::floor((v + 1.0) / 2.0 * 65535.0 + 0.5);
    mask[r * cols + c] = 1;
  }
  return Grid(rows, cols, std::move(values), std::move(mask));
}

std::vector<fs::path> write_map_pgm(const CodispMap& map, const fs::path& path) {
  const Grid g = map_image(map);
  // Written from a fully observed copy so masked cells carry 32768.
  Grid filled(g.rows(), g.cols(), 32768.0);
  for (std::size_t r = 0; r < g.rows(); ++r) {
    for (std::size_t c = 0; c < g.cols(); ++c) {
      if (g.observed(r, c)) filled.set(r, c, g.value(r, c));
    }
  }
  write_file_atomic(path, format_pgm(filled, 65535));
  Grid m(g.rows(), g.cols());
  for (std::size_t r = 0; r < g.rows(); ++r) {
    for (std::size_t c = 0; c < g.cols(); ++c) m.set(r, c, g.observed(r, c) ? 65535 : 0);
  }
  write_file_atomic(mask_sidecar(path), format_pgm(m, 65535));
  return {path, mask_sidecar(path)};
}

std::pair<Grid, int> ppm_to_gray(const std::string& bytes) {
  PnmReader rd(bytes);
  const PnmHeader h = read_header(rd, true);
  const std::vector<int> s = read_samples(rd, h);
  Grid g(h.height, h.width);
  for (std::size_t i = 0; i < h.width * h.height; ++i) {
    const double y = 0.2126 * s[3 * i] + 0.7152 * s[3 * i + 1] + 0.0722 * s[3 * i + 2];
    g.set(i / h.width, i % h.width, std::floor(y + 0.5));
  }
  return {std::move(g), h.maxval};
}

}  // namespace codisp::io
