#pragma once

// Minimal comma-separated file helpers. Fields never contain commas or quotes.

#include "floodda/errors.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace floodda {

/// Shortest text that round-trips a double exactly.
inline std::string fmt_double(double v) {
  char buf[40];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string &name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name)
        return i;
    throw ConfigError("csv: missing column '" + name + "'");
  }
};

inline std::vector<std::string> split_csv_line(const std::string &line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ','))
    out.push_back(field);
  if (!line.empty() && line.back() == ',')
    out.emplace_back();
  return out;
}

inline CsvTable read_csv(const std::filesystem::path &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is)
    throw MissingArtifact("missing csv file: " + path.string());
  CsvTable t;
  std::string line;
  bool first = true;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (line.empty())
      continue;
    if (first) {
      t.header = split_csv_line(line);
      first = false;
      continue;
    }
    auto row = split_csv_line(line);
    if (row.size() != t.header.size())
      throw ConfigError(path.string() + ": row width does not match header");
    t.rows.push_back(std::move(row));
  }
  if (first)
    throw ConfigError(path.string() + ": empty csv");
  return t;
}

inline double parse_double(const std::string &s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception &) {
    throw ConfigError("not a number: '" + s + "'");
  }
  if (used != s.size())
    throw ConfigError("not a number: '" + s + "'");
  return v;
}

class CsvWriter {
public:
  CsvWriter(const std::filesystem::path &path, const std::vector<std::string> &header)
      : os_(path, std::ios::binary), path_(path) {
    if (!os_)
      throw MissingArtifact("cannot open for writing: " + path.string());
    row(header);
  }

  void row(const std::vector<std::string> &fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i)
        os_ << ',';
      os_ << fields[i];
    }
    os_ << '\n';
  }

private:
  std::ofstream os_;
  std::filesystem::path path_;
};

} // namespace floodda
