#pragma once

// Verification scores: gauge RMSE, contingency maps, CSI, Cohen's kappa and
// zonal WSR misfits.

#include "floodda/ascii_grid.hpp"
#include "floodda/domain.hpp"
#include "floodda/errors.hpp"
#include "floodda/observation.hpp"
#include "floodda/swe.hpp"

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace floodda {

inline double rmse(std::span<const double> sim, std::span<const double> obs) {
  if (sim.empty())
    throw ConfigError("rmse of an empty series");
  if (sim.size() != obs.size())
    throw ConfigError("rmse: series lengths differ");
  double acc = 0.0;
  for (std::size_t i = 0; i < sim.size(); ++i)
    acc += (sim[i] - obs[i]) * (sim[i] - obs[i]);
  return std::sqrt(acc / static_cast<double>(sim.size()));
}

struct ContingencyCounts {
  std::uint64_t tp = 0, fn = 0, fp = 0, tn = 0;

  std::uint64_t total() const { return tp + fn + fp + tn; }
  bool operator==(const ContingencyCounts &) const = default;
};

enum class Category : int {
  CorrectNegative = 0,
  Hit = 1,
  Miss = 2,
  FalseAlarm = 3,
  Invalid = -9999,
};

struct ContingencyMap {
  std::vector<Category> cells;

  ContingencyCounts counts() const {
    ContingencyCounts c;
    for (Category k : cells) {
      switch (k) {
      case Category::Hit: ++c.tp; break;
      case Category::Miss: ++c.fn; break;
      case Category::FalseAlarm: ++c.fp; break;
      case Category::CorrectNegative: ++c.tn; break;
      case Category::Invalid: break;
      }
    }
    return c;
  }
};

struct ContingencyResult {
  ContingencyMap map;
  ContingencyCounts counts;
};

/// Cells outside `region` (when given) are treated as invalid.
inline ContingencyResult contingency(std::span<const std::uint8_t> sim_wet, const FloodExtentMap &obs,
                                     std::span<const std::uint8_t> region = {}) {
  const std::size_t n = sim_wet.size();
  if (obs.wet_mask.size() != n || obs.valid_mask.size() != n || (!region.empty() && region.size() != n))
    throw ConfigError("contingency: grid mismatch");
  ContingencyResult r;
  r.map.cells.resize(n, Category::Invalid);
  for (std::size_t i = 0; i < n; ++i) {
    if (!obs.valid_mask[i] || (!region.empty() && !region[i]))
      continue;
    const bool s = sim_wet[i] != 0, o = obs.wet_mask[i] != 0;
    Category k;
    if (s && o) {
      k = Category::Hit;
      ++r.counts.tp;
    } else if (!s && o) {
      k = Category::Miss;
      ++r.counts.fn;
    } else if (s) {
      k = Category::FalseAlarm;
      ++r.counts.fp;
    } else {
      k = Category::CorrectNegative;
      ++r.counts.tn;
    }
    r.map.cells[i] = k;
  }
  return r;
}

/// nullopt when nobody saw water (tp + fn + fp = 0).
inline std::optional<double> csi(const ContingencyCounts &c) {
  const std::uint64_t d = c.tp + c.fn + c.fp;
  if (d == 0)
    return std::nullopt;
  return static_cast<double>(c.tp) / static_cast<double>(d);
}

/// nullopt for an empty tally or when chance agreement is 1.
inline std::optional<double> kappa(const ContingencyCounts &c) {
  const std::uint64_t total = c.total();
  if (total == 0)
    return std::nullopt;
  // Integer numerators keep p_e = 1 detection exact.
  const auto n2 = static_cast<long double>(total) * static_cast<long double>(total);
  const long double agree_chance =
      static_cast<long double>(c.tp + c.fp) * static_cast<long double>(c.tp + c.fn) +
      static_cast<long double>(c.fn + c.tn) * static_cast<long double>(c.fp + c.tn);
  if (agree_chance == n2)
    return std::nullopt;
  const double po = static_cast<double>(c.tp + c.tn) / static_cast<double>(total);
  const double pe = static_cast<double>(agree_chance / n2);
  return (po - pe) / (1.0 - pe);
}

inline AsciiGrid contingency_to_ascii(const ContingencyMap &m, const Grid &g) {
  if (m.cells.size() != g.cell_count())
    throw ConfigError("contingency map does not match grid");
  AsciiGrid a;
  a.ncols = g.ncols;
  a.nrows = g.nrows;
  a.cellsize = g.cell_size;
  a.nodata = -9999;
  a.values.reserve(m.cells.size());
  for (Category k : m.cells)
    a.values.push_back(static_cast<double>(static_cast<int>(k)));
  return a;
}

inline ContingencyMap contingency_from_ascii(const AsciiGrid &a) {
  ContingencyMap m;
  m.cells.reserve(a.values.size());
  for (double v : a.values) {
    const long k = std::lround(v);
    if (k == 0 || k == 1 || k == 2 || k == 3 || k == -9999)
      m.cells.push_back(static_cast<Category>(k));
    else
      throw ConfigError("invalid contingency code " + std::to_string(v));
  }
  return m;
}

struct WsrMisfit {
  double time = 0.0;
  int zone_id = 0;
  double obs = 0.0, sim = 0.0;
  double misfit = 0.0; // obs - sim
};

/// Misfits in observation order; sim WSR from the recorded depth snapshot.
inline std::vector<WsrMisfit> wsr_misfit_series(const WindowRecord &sim,
                                                std::span<const WsrObservation> obs,
                                                std::span<const FloodplainZone> zones,
                                                double wet_threshold = kWetThreshold) {
  std::vector<WsrMisfit> out;
  out.reserve(obs.size());
  for (const auto &o : obs) {
    const DepthSnapshot *snap = sim.find_snapshot(o.time);
    if (!snap)
      throw MissingArtifact("no depth snapshot at t=" + std::to_string(o.time) + " s for zone " +
                            std::to_string(o.zone_id));
    const FloodplainZone *zone = nullptr;
    for (const auto &z : zones)
      if (z.zone_id == o.zone_id)
        zone = &z;
    if (!zone)
      throw ConfigError("unknown zone " + std::to_string(o.zone_id));
    const double s = wsr_of_depth(snap->h, *zone, wet_threshold);
    out.push_back(WsrMisfit{o.time, o.zone_id, o.wsr, s, o.wsr - s});
  }
  return out;
}

} // namespace floodda
