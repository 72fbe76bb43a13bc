#pragma once

// Gauge and wet-surface-ratio observations: operators, synthetic generation
// from a truth run, and file formats.

#include "floodda/ascii_grid.hpp"
#include "floodda/csv.hpp"
#include "floodda/domain.hpp"
#include "floodda/errors.hpp"
#include "floodda/random.hpp"
#include "floodda/swe.hpp"

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace floodda {

inline constexpr double kWetThreshold = 0.05; // m, observational wet/dry cut

struct GaugeObservation {
  double time = 0.0;
  std::string station;
  double eta_obs = 0.0; // m
  double sigma = 0.05;  // m

  bool operator==(const GaugeObservation &) const = default;
};

struct WsrObservation {
  double time = 0.0;
  int zone_id = 1;
  double wsr = 0.0;
  double sigma = 0.05;

  bool operator==(const WsrObservation &) const = default;
};

struct FloodExtentMap {
  double time = 0.0;
  std::vector<std::uint8_t> wet_mask;
  std::vector<std::uint8_t> valid_mask;

  bool operator==(const FloodExtentMap &) const = default;
};

using Observation = std::variant<GaugeObservation, WsrObservation>;

struct ObservationSet {
  std::vector<GaugeObservation> gauge;
  std::vector<WsrObservation> wsr;
  std::vector<FloodExtentMap> maps;
};

inline double observation_time(const Observation &o) {
  return std::visit([](const auto &x) { return x.time; }, o);
}
inline double observation_value(const Observation &o) {
  if (const auto *g = std::get_if<GaugeObservation>(&o))
    return g->eta_obs;
  return std::get<WsrObservation>(o).wsr;
}
inline double observation_sigma(const Observation &o) {
  return std::visit([](const auto &x) { return x.sigma; }, o);
}

/// Fraction of zone cells with depth >= threshold.
inline double wsr_of_depth(std::span<const double> h, const FloodplainZone &zone,
                           double wet_threshold = kWetThreshold) {
  if (zone.cells.empty())
    throw ConfigError("wsr of an empty zone");
  std::size_t wet = 0;
  for (std::size_t i : zone.cells)
    wet += h[i] >= wet_threshold ? 1 : 0;
  return static_cast<double>(wet) / static_cast<double>(zone.cells.size());
}

/// Fraction of observed (valid) zone cells that are wet.
inline double wsr_of_extent(const FloodExtentMap &map, const FloodplainZone &zone) {
  std::size_t valid = 0, wet = 0;
  for (std::size_t i : zone.cells) {
    if (!map.valid_mask[i])
      continue;
    ++valid;
    wet += map.wet_mask[i] ? 1 : 0;
  }
  if (valid == 0)
    throw ConfigError("zone " + std::to_string(zone.zone_id) + " has no valid observed cells");
  return static_cast<double>(wet) / static_cast<double>(valid);
}

inline std::vector<std::uint8_t> wet_mask_of_depth(std::span<const double> h,
                                                   double wet_threshold = kWetThreshold) {
  std::vector<std::uint8_t> m(h.size());
  for (std::size_t i = 0; i < h.size(); ++i)
    m[i] = h[i] >= wet_threshold ? 1 : 0;
  return m;
}

inline FloodExtentMap extent_of_depth(double time, std::span<const double> h,
                                      double wet_threshold = kWetThreshold) {
  FloodExtentMap m;
  m.time = time;
  m.wet_mask = wet_mask_of_depth(h, wet_threshold);
  m.valid_mask.assign(h.size(), 1);
  return m;
}

// ---------------------------------------------------------------------------
// Synthetic observations

struct ObservationNoise {
  double sigma_wl = 0.05;  // m
  double sigma_wsr = 0.05; // dimensionless
  // Error std-dev written with noiseless observations, so R stays positive.
  static constexpr double kSigmaFloor = 1.0e-3;
};

/// Builds the twin-experiment observation set from a recorded truth run.
/// Gauge observations are taken at every recorded truth gauge time; extent
/// maps and WSR at each overpass time, which must have a truth snapshot.
inline ObservationSet synthesize_observations(const WindowRecord &truth, const Catchment &catchment,
                                              std::span<const double> overpass_times,
                                              const ObservationNoise &noise, std::uint64_t seed) {
  if (noise.sigma_wl < 0.0 || noise.sigma_wsr < 0.0)
    throw ConfigError("observation noise must be non-negative");
  ObservationSet out;
  std::normal_distribution<double> normal(0.0, 1.0);

  auto rng_wl = make_stream(seed, {static_cast<std::uint64_t>(Stream::GaugeNoise)});
  const double sig_wl = std::max(noise.sigma_wl, ObservationNoise::kSigmaFloor);
  for (const auto &station : catchment.gauges) {
    const GaugeSeries *series = truth.find_gauge(station.name);
    if (!series)
      throw MissingArtifact("truth has no gauge series for station " + station.name);
    for (std::size_t k = 0; k < series->times.size(); ++k) {
      const double z = normal(rng_wl);
      out.gauge.push_back(GaugeObservation{series->times[k], station.name,
                                           series->eta[k] + noise.sigma_wl * z, sig_wl});
    }
  }

  auto rng_wsr = make_stream(seed, {static_cast<std::uint64_t>(Stream::WsrNoise)});
  const double sig_wsr = std::max(noise.sigma_wsr, ObservationNoise::kSigmaFloor);
  for (double t : overpass_times) {
    const DepthSnapshot *snap = truth.find_snapshot(t);
    if (!snap)
      throw ConfigError("overpass time " + std::to_string(t) + " s lies outside the truth record");
    FloodExtentMap map = extent_of_depth(t, snap->h);
    for (const auto &zone : catchment.zones) {
      const double z = normal(rng_wsr);
      const double w = std::clamp(wsr_of_extent(map, zone) + noise.sigma_wsr * z, 0.0, 1.0);
      out.wsr.push_back(WsrObservation{t, zone.zone_id, w, sig_wsr});
    }
    out.maps.push_back(std::move(map));
  }
  return out;
}

/// Observation operator: member diagnostics in batch order.
inline std::vector<double> predict_observations(const WindowRecord &record, const Catchment &catchment,
                                                std::span<const Observation> batch) {
  std::vector<double> out;
  out.reserve(batch.size());
  for (const auto &obs : batch) {
    if (const auto *g = std::get_if<GaugeObservation>(&obs)) {
      const GaugeSeries *series = record.find_gauge(g->station);
      if (!series)
        throw MissingArtifact("no recorded series for gauge observation at station " + g->station);
      auto it = std::lower_bound(series->times.begin(), series->times.end(), g->time - 1e-6);
      if (it == series->times.end() || std::abs(*it - g->time) > 1e-6)
        throw MissingArtifact("no recorded diagnostic for gauge observation " + g->station +
                              " at t = " + std::to_string(g->time) + " s");
      out.push_back(series->eta[static_cast<std::size_t>(it - series->times.begin())]);
    } else {
      const auto &w = std::get<WsrObservation>(obs);
      if (w.zone_id < 1 || w.zone_id > static_cast<int>(kZones))
        throw ConfigError("wsr observation names unknown zone " + std::to_string(w.zone_id));
      const DepthSnapshot *snap = record.find_snapshot(w.time);
      if (!snap)
        throw MissingArtifact("no recorded depth snapshot for wsr observation zone " +
                              std::to_string(w.zone_id) + " at t = " + std::to_string(w.time) + " s");
      out.push_back(wsr_of_depth(snap->h, catchment.zones[static_cast<std::size_t>(w.zone_id - 1)]));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Files

inline void write_gauge_observations(const std::filesystem::path &path,
                                     std::span<const GaugeObservation> obs) {
  CsvWriter w(path, {"time_s", "station", "eta_m", "sigma_m"});
  for (const auto &o : obs)
    w.row({fmt_double(o.time), o.station, fmt_double(o.eta_obs), fmt_double(o.sigma)});
}

inline std::vector<GaugeObservation> read_gauge_observations(const std::filesystem::path &path) {
  const CsvTable t = read_csv(path);
  const auto ct = t.column("time_s"), cs = t.column("station"), ce = t.column("eta_m"),
             cg = t.column("sigma_m");
  std::vector<GaugeObservation> out;
  for (const auto &r : t.rows) {
    GaugeObservation o{parse_double(r[ct]), r[cs], parse_double(r[ce]), parse_double(r[cg])};
    if (!(o.sigma > 0.0))
      throw ConfigError(path.string() + ": gauge sigma must be positive");
    out.push_back(std::move(o));
  }
  return out;
}

inline void write_wsr_observations(const std::filesystem::path &path,
                                   std::span<const WsrObservation> obs) {
  CsvWriter w(path, {"time_s", "zone", "wsr", "sigma"});
  for (const auto &o : obs)
    w.row({fmt_double(o.time), std::to_string(o.zone_id), fmt_double(o.wsr), fmt_double(o.sigma)});
}

inline std::vector<WsrObservation> read_wsr_observations(const std::filesystem::path &path) {
  const CsvTable t = read_csv(path);
  const auto ct = t.column("time_s"), cz = t.column("zone"), cw = t.column("wsr"),
             cg = t.column("sigma");
  std::vector<WsrObservation> out;
  for (const auto &r : t.rows) {
    WsrObservation o{parse_double(r[ct]), static_cast<int>(parse_double(r[cz])),
                     parse_double(r[cw]), parse_double(r[cg])};
    if (!(o.sigma > 0.0) || o.wsr < 0.0 || o.wsr > 1.0)
      throw ConfigError(path.string() + ": invalid wsr row");
    out.push_back(o);
  }
  return out;
}

inline AsciiGrid extent_to_ascii(const FloodExtentMap &m, const Grid &g) {
  AsciiGrid a;
  a.ncols = g.ncols;
  a.nrows = g.nrows;
  a.cellsize = g.cell_size;
  a.values.resize(g.cell_count());
  for (std::size_t i = 0; i < a.values.size(); ++i)
    a.values[i] = !m.valid_mask[i] ? a.nodata : (m.wet_mask[i] ? 1.0 : 0.0);
  return a;
}

inline FloodExtentMap extent_from_ascii(const AsciiGrid &a, double time) {
  FloodExtentMap m;
  m.time = time;
  m.wet_mask.resize(a.values.size());
  m.valid_mask.resize(a.values.size());
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    const double v = a.values[i];
    m.valid_mask[i] = v != a.nodata;
    m.wet_mask[i] = m.valid_mask[i] && v == 1.0;
  }
  return m;
}

} // namespace floodda
