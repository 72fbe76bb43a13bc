#pragma once

// ESRI ASCII grid (".asc") reading and writing.
//
// Layout: six header lines (ncols, nrows, xllcorner, yllcorner, cellsize,
// NODATA_value) followed by nrows lines of ncols values. The first data line
// is the northernmost row, which is row 0 of the in-memory raster.

#include "floodda/errors.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

namespace floodda {

struct AsciiGrid {
  std::size_t ncols = 0;
  std::size_t nrows = 0;
  double xllcorner = 0.0;
  double yllcorner = 0.0;
  double cellsize = 1.0;
  double nodata = -9999.0;
  std::vector<double> values; // row-major, row 0 first

  double at(std::size_t col, std::size_t row) const { return values[row * ncols + col]; }
};

namespace detail {

inline std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

inline void format_value(std::string &out, double v, int precision) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*g", precision, v);
  out += buf;
}

} // namespace detail

/// Serializes a raster. `precision` is the number of significant digits;
/// 17 round-trips doubles exactly.
inline std::string format_ascii_grid(const AsciiGrid &g, int precision = 17) {
  if (g.values.size() != g.ncols * g.nrows)
    throw ConfigError("ascii grid: value count does not match ncols*nrows");
  std::string out;
  out.reserve(g.values.size() * 8 + 128);
  out += "ncols " + std::to_string(g.ncols) + "\n";
  out += "nrows " + std::to_string(g.nrows) + "\n";
  out += "xllcorner ";
  detail::format_value(out, g.xllcorner, 17);
  out += "\nyllcorner ";
  detail::format_value(out, g.yllcorner, 17);
  out += "\ncellsize ";
  detail::format_value(out, g.cellsize, 17);
  out += "\nNODATA_value ";
  detail::format_value(out, g.nodata, 17);
  out += "\n";
  for (std::size_t r = 0; r < g.nrows; ++r) {
    for (std::size_t c = 0; c < g.ncols; ++c) {
      if (c)
        out += ' ';
      detail::format_value(out, g.values[r * g.ncols + c], precision);
    }
    out += '\n';
  }
  return out;
}

inline void write_ascii_grid(const std::filesystem::path &path, const AsciiGrid &g,
                             int precision = 17) {
  std::ofstream os(path, std::ios::binary);
  if (!os)
    throw MissingArtifact("cannot open for writing: " + path.string());
  os << format_ascii_grid(g, precision);
}

inline AsciiGrid parse_ascii_grid(std::istream &is, const std::string &origin = "<stream>") {
  AsciiGrid g;
  bool have_cols = false, have_rows = false;
  bool center_x = false, center_y = false;
  // Header keys are read until the first token that is not a known key.
  std::string key;
  std::streampos data_start = is.tellg();
  while (is >> key) {
    const std::string k = detail::lower(key);
    double value = 0.0;
    if (k == "ncols" || k == "nrows" || k == "xllcorner" || k == "yllcorner" ||
        k == "xllcenter" || k == "yllcenter" || k == "cellsize" || k == "nodata_value") {
      if (!(is >> value))
        throw ConfigError(origin + ": bad header value for " + key);
      if (k == "ncols") {
        g.ncols = static_cast<std::size_t>(value);
        have_cols = true;
      } else if (k == "nrows") {
        g.nrows = static_cast<std::size_t>(value);
        have_rows = true;
      } else if (k == "xllcorner" || k == "xllcenter") {
        g.xllcorner = value;
        center_x = (k == "xllcenter");
      } else if (k == "yllcorner" || k == "yllcenter") {
        g.yllcorner = value;
        center_y = (k == "yllcenter");
      } else if (k == "cellsize") {
        g.cellsize = value;
      } else {
        g.nodata = value;
      }
      data_start = is.tellg();
    } else {
      break;
    }
  }
  if (!have_cols || !have_rows)
    throw ConfigError(origin + ": missing ncols/nrows header");
  if (center_x)
    g.xllcorner -= 0.5 * g.cellsize;
  if (center_y)
    g.yllcorner -= 0.5 * g.cellsize;
  is.clear();
  is.seekg(data_start);
  const std::size_t n = g.ncols * g.nrows;
  g.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(is >> g.values[i]))
      throw ConfigError(origin + ": expected " + std::to_string(n) + " values, got " +
                        std::to_string(i));
  }
  return g;
}

inline AsciiGrid read_ascii_grid(const std::filesystem::path &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is)
    throw MissingArtifact("missing grid file: " + path.string());
  return parse_ascii_grid(is, path.string());
}

} // namespace floodda
