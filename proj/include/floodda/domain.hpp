#pragma once

// Catchment geometry, friction zoning, floodplain zones, gauges and boundary
// forcing for a synthetic dyked river valley.

#include "floodda/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

namespace floodda {

inline constexpr std::size_t kSegments = 6; // river friction segments 1..6
inline constexpr std::size_t kZones = 5;    // floodplain correction zones
inline constexpr std::size_t kGauges = 3;

/// Regular raster. Row 0 is the northern edge, column 0 the upstream edge.
struct Grid {
  std::size_t ncols = 0;
  std::size_t nrows = 0;
  double cell_size = 0.0;
  std::vector<double> bed;              // m above datum
  std::vector<std::uint8_t> channel;    // 1 on river-bed cells
  std::vector<std::uint8_t> segment_id; // 1..6 on channel, 0 on floodplain

  std::size_t cell_count() const { return ncols * nrows; }
  std::size_t index(std::size_t col, std::size_t row) const { return row * ncols + col; }
  std::size_t col_of(std::size_t cell) const { return cell % ncols; }
  std::size_t row_of(std::size_t cell) const { return cell / ncols; }
  double cell_area() const { return cell_size * cell_size; }

  void validate() const {
    if (ncols < 2 || nrows < 2)
      throw ConfigError("grid must be at least 2x2");
    if (!(cell_size > 0.0))
      throw ConfigError("grid cell_size must be positive");
    const std::size_t n = cell_count();
    if (bed.size() != n || channel.size() != n || segment_id.size() != n)
      throw ConfigError("grid field sizes do not match ncols*nrows");
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite(bed[i]))
        throw ConfigError("non-finite bed elevation at cell " + std::to_string(i));
      const bool ok = channel[i] ? (segment_id[i] >= 1 && segment_id[i] <= kSegments)
                                 : segment_id[i] == 0;
      if (!ok)
        throw ConfigError("segment id inconsistent with channel mask at cell " +
                          std::to_string(i));
    }
  }
};

struct FloodplainZone {
  int zone_id = 0; // 1..5
  std::vector<std::uint8_t> cell_mask;
  std::vector<std::size_t> cells; // indices where cell_mask is set, ascending
  double area = 0.0;              // m²

  std::size_t size() const { return cells.size(); }
};

/// Builds a zone from a mask, deriving the cell list and area.
inline FloodplainZone make_zone(int id, std::vector<std::uint8_t> mask, double cell_area) {
  FloodplainZone z;
  z.zone_id = id;
  z.cell_mask = std::move(mask);
  for (std::size_t i = 0; i < z.cell_mask.size(); ++i)
    if (z.cell_mask[i])
      z.cells.push_back(i);
  z.area = static_cast<double>(z.cells.size()) * cell_area;
  return z;
}

struct GaugeStation {
  std::string name;
  std::size_t cell_index = 0;
  double obs_period = 900.0; // s
};

struct RatingCurve {
  double a = 1.0;    // m^(3-b)/s
  double eta0 = 0.0; // m, zero-flow stage
  double b = 5.0 / 3.0;
};

/// Q = a * max(0, eta - eta0)^b.
inline double rating_curve_discharge(double eta, const RatingCurve &rc) {
  const double head = eta - rc.eta0;
  if (!(head > 0.0))
    return 0.0;
  return rc.a * std::pow(head, rc.b);
}

/// Piecewise-linear discharge series.
struct Hydrograph {
  std::vector<double> times;     // s, strictly increasing
  std::vector<double> discharge; // m³/s, >= 0

  double start() const { return times.front(); }
  double end() const { return times.back(); }

  void validate() const {
    if (times.empty() || times.size() != discharge.size())
      throw ConfigError("hydrograph needs matching, non-empty time and discharge series");
    for (std::size_t i = 0; i < times.size(); ++i) {
      if (!std::isfinite(times[i]) || !std::isfinite(discharge[i]) || discharge[i] < 0.0)
        throw ConfigError("hydrograph values must be finite with Q >= 0");
      if (i > 0 && !(times[i] > times[i - 1]))
        throw ConfigError("hydrograph times must be strictly increasing");
    }
  }
};

inline double interpolate_hydrograph(double t, const Hydrograph &hg) {
  if (hg.times.empty())
    throw MissingForcing("empty hydrograph");
  if (!(t >= hg.times.front() && t <= hg.times.back()))
    throw MissingForcing("no inflow forcing at t = " + std::to_string(t) + " s (span " +
                         std::to_string(hg.times.front()) + " .. " +
                         std::to_string(hg.times.back()) + ")");
  const auto it = std::upper_bound(hg.times.begin(), hg.times.end(), t);
  if (it == hg.times.end())
    return hg.discharge.back();
  const std::size_t k = static_cast<std::size_t>(it - hg.times.begin()) - 1;
  const double w = (t - hg.times[k]) / (hg.times[k + 1] - hg.times[k]);
  return hg.discharge[k] + w * (hg.discharge[k + 1] - hg.discharge[k]);
}

/// Exact integral of the piecewise-linear hydrograph over [t0, t1].
inline double integrate_hydrograph(const Hydrograph &hg, double t0, double t1) {
  double total = 0.0;
  double a = t0;
  double qa = interpolate_hydrograph(t0, hg);
  for (std::size_t k = 0; k < hg.times.size(); ++k) {
    const double b = hg.times[k];
    if (b <= a)
      continue;
    if (b >= t1)
      break;
    total += 0.5 * (qa + hg.discharge[k]) * (b - a);
    a = b;
    qa = hg.discharge[k];
  }
  total += 0.5 * (qa + interpolate_hydrograph(t1, hg)) * (t1 - a);
  return total;
}

struct BoundaryConfig {
  Hydrograph inflow_hydrograph;
  RatingCurve rating_curve;
  std::vector<std::size_t> upstream_cells;   // west face receives inflow
  std::vector<std::size_t> downstream_cells; // east face discharges
  std::vector<std::size_t> stage_cells;      // cells whose mean stage drives the rating curve

  bool closed() const { return upstream_cells.empty() && downstream_cells.empty(); }
};

/// The uncertain inputs corrected by the filter.
struct ControlVector {
  std::array<double, 7> ks{};     // Strickler, [0] floodplain, [1..6] river segments
  double mu = 1.0;                // inflow multiplier
  std::array<double, kZones> dh{}; // m, one per floodplain zone

  void validate() const {
    for (double k : ks)
      if (!(k > 0.0) || !std::isfinite(k))
        throw ConfigError("Strickler coefficients must be positive");
    if (!(mu > 0.0) || !std::isfinite(mu))
      throw ConfigError("inflow multiplier must be positive");
    for (double d : dh)
      if (!std::isfinite(d))
        throw ConfigError("zone corrections must be finite");
  }

  bool operator==(const ControlVector &) const = default;
};

/// Calibrated friction values and neutral forcing/state corrections.
inline ControlVector calibrated_controls() {
  ControlVector cv;
  cv.ks = {17.0, 45.0, 38.0, 38.0, 40.0, 40.0, 40.0};
  cv.mu = 1.0;
  cv.dh = {};
  return cv;
}

/// Per-cell Strickler coefficient looked up through the segment map.
inline std::vector<double> materialize_friction(const Grid &grid, const ControlVector &cv) {
  cv.validate();
  std::vector<double> field(grid.cell_count());
  for (std::size_t i = 0; i < field.size(); ++i)
    field[i] = cv.ks[grid.segment_id[i]];
  return field;
}

// ---------------------------------------------------------------------------
// Synthetic catchment

struct CatchmentSpec {
  std::size_t ncols = 100;
  std::size_t nrows = 60;
  double cell_size = 50.0;              // m
  double valley_slope = 2.0e-4;         // along-valley bed slope
  double outlet_bank_elevation = 10.0;  // bank level at the downstream edge
  double channel_depth = 4.0;           // bank-full depth
  double channel_width = 150.0;         // m, rounded to whole cells (>= 2)
  double meander_amplitude = 300.0;     // m
  double meander_wavelength = 2500.0;   // m
  double dyke_height = 1.0;             // river dyke crest above bank level
  double floodplain_cross_slope = 1.0e-3;
  double valley_halfwidth = 1250.0;     // m, beyond it the valley walls rise
  double dyked_start = 0.15;            // fraction of length where dykes begin
  double dyked_end = 0.92;              // fraction of length where dykes end
  std::size_t inflow_halfwidth = 3;     // floodplain cells each side of the channel on the inflow edge
  std::array<double, kGauges> gauge_positions{0.08, 0.5, 0.9};
  double gauge_period = 900.0;          // s
  // Rating curve; a <= 0 derives a from channel geometry at ks = 40.
  double rating_a = 0.0;
  double rating_b = 5.0 / 3.0;
};

struct Catchment {
  Grid grid;
  std::array<FloodplainZone, kZones> zones;
  std::array<GaugeStation, kGauges> gauges;
  BoundaryConfig boundary;
  std::vector<std::uint8_t> dyke; // 1 on river and transverse dyke cells
};

namespace detail {

inline double channel_centre_row(const CatchmentSpec &s, std::size_t col) {
  const double axis = 0.5 * static_cast<double>(s.nrows - 1);
  const double x = (static_cast<double>(col) + 0.5) * s.cell_size;
  const double amp = s.meander_amplitude / s.cell_size;
  return axis + amp * std::sin(2.0 * std::numbers::pi * x / s.meander_wavelength);
}

} // namespace detail

inline Catchment build_synthetic_catchment(const CatchmentSpec &s, Hydrograph inflow) {
  if (s.ncols < 20 || s.nrows < 20)
    throw ConfigError("synthetic catchment needs at least 20x20 cells");
  if (!(s.cell_size > 0.0) || !(s.channel_depth > 0.0) || s.dyke_height < 0.0 ||
      !(s.valley_halfwidth > 0.0) || !(s.meander_wavelength > 0.0))
    throw ConfigError("invalid catchment geometry parameters");
  if (!(s.dyked_start >= 0.0 && s.dyked_start < s.dyked_end && s.dyked_end <= 1.0))
    throw ConfigError("dyked span fractions must satisfy 0 <= start < end <= 1");
  inflow.validate();

  const std::size_t nc = s.ncols, nr = s.nrows;
  const double dx = s.cell_size;
  Catchment c;
  Grid &g = c.grid;
  g.ncols = nc;
  g.nrows = nr;
  g.cell_size = dx;
  g.bed.assign(nc * nr, 0.0);
  g.channel.assign(nc * nr, 0);
  g.segment_id.assign(nc * nr, 0);
  c.dyke.assign(nc * nr, 0);

  const std::size_t width =
      std::max<std::size_t>(2, static_cast<std::size_t>(std::lround(s.channel_width / dx)));
  if (width + 4 > nr)
    throw ConfigError("channel too wide for the grid");

  // Channel rows per column; successive columns keep at least one shared row.
  std::vector<long> first_row(nc);
  for (std::size_t col = 0; col < nc; ++col) {
    const double centre = detail::channel_centre_row(s, col);
    long r0 = static_cast<long>(std::floor(centre - 0.5 * static_cast<double>(width) + 0.5));
    if (col > 0) {
      const long lim = static_cast<long>(width) - 1;
      r0 = std::clamp(r0, first_row[col - 1] - lim, first_row[col - 1] + lim);
    }
    r0 = std::clamp<long>(r0, 2, static_cast<long>(nr - width) - 2);
    first_row[col] = r0;
  }

  // Arc length along the channel for equal-length friction segments.
  std::vector<double> arc(nc, 0.0);
  for (std::size_t col = 1; col < nc; ++col) {
    const double dy = static_cast<double>(first_row[col] - first_row[col - 1]);
    arc[col] = arc[col - 1] + dx * std::sqrt(1.0 + dy * dy);
  }
  const double total_arc = arc.back() + dx;

  const double axis = 0.5 * static_cast<double>(nr - 1);
  const auto dyke_lo = static_cast<std::size_t>(std::floor(s.dyked_start * static_cast<double>(nc)));
  const auto dyke_hi = std::min(nc, static_cast<std::size_t>(std::floor(s.dyked_end * static_cast<double>(nc))));

  auto bank = [&](std::size_t col) {
    return s.outlet_bank_elevation + s.valley_slope * static_cast<double>(nc - 1 - col) * dx;
  };
  auto in_valley = [&](std::size_t row) {
    return std::abs(static_cast<double>(row) - axis) * dx <= s.valley_halfwidth;
  };

  for (std::size_t col = 0; col < nc; ++col) {
    const double zb = bank(col);
    const long r0 = first_row[col];
    const long r1 = r0 + static_cast<long>(width) - 1;
    const auto seg = static_cast<std::uint8_t>(
        1 + std::min<std::size_t>(kSegments - 1,
                                  static_cast<std::size_t>(std::floor(
                                      static_cast<double>(kSegments) * (arc[col] + 0.5 * dx) / total_arc))));
    for (std::size_t row = 0; row < nr; ++row) {
      const std::size_t i = g.index(col, row);
      const long r = static_cast<long>(row);
      if (r >= r0 && r <= r1) {
        g.channel[i] = 1;
        g.segment_id[i] = seg;
        g.bed[i] = zb - s.channel_depth;
        continue;
      }
      const double dist = static_cast<double>(r < r0 ? r0 - r : r - r1) * dx;
      double z = zb + s.floodplain_cross_slope * dist;
      if (!in_valley(row)) {
        const double beyond = std::abs(static_cast<double>(row) - axis) * dx - s.valley_halfwidth;
        z += 5.0 + s.dyke_height + 0.01 * beyond;
      }
      g.bed[i] = z;
    }
  }

  // River dykes: floodplain cells sharing a face with the channel, inside the dyked span.
  for (std::size_t col = dyke_lo; col < dyke_hi; ++col) {
    for (std::size_t row = 0; row < nr; ++row) {
      const std::size_t i = g.index(col, row);
      if (g.channel[i])
        continue;
      const bool touches = (row > 0 && g.channel[i - nc]) || (row + 1 < nr && g.channel[i + nc]) ||
                           (col > 0 && g.channel[i - 1]) || (col + 1 < nc && g.channel[i + 1]);
      if (touches) {
        c.dyke[i] = 1;
        g.bed[i] = std::max(g.bed[i], bank(col) + s.dyke_height);
      }
    }
  }

  // Transverse dykes split each bank into compartments; five of them are the zones.
  std::array<std::size_t, kZones + 1> band{};
  for (std::size_t k = 0; k <= kZones; ++k)
    band[k] = dyke_lo + (dyke_hi - 1 - dyke_lo) * k / kZones;
  for (std::size_t k = 0; k <= kZones; ++k) {
    const std::size_t col = band[k];
    for (std::size_t row = 0; row < nr; ++row) {
      const std::size_t i = g.index(col, row);
      if (g.channel[i] || !in_valley(row))
        continue;
      c.dyke[i] = 1;
      g.bed[i] = std::max(g.bed[i], bank(col) + s.dyke_height + 1.0);
    }
  }

  for (std::size_t k = 0; k < kZones; ++k) {
    std::vector<std::uint8_t> mask(nc * nr, 0);
    const bool north = (k % 2 == 0);
    for (std::size_t col = band[k] + 1; col < band[k + 1]; ++col) {
      for (std::size_t row = 0; row < nr; ++row) {
        const std::size_t i = g.index(col, row);
        if (g.channel[i] || c.dyke[i] || !in_valley(row))
          continue;
        const long r = static_cast<long>(row);
        if (north ? r < first_row[col] : r > first_row[col])
          mask[i] = 1;
      }
    }
    c.zones[k] = make_zone(static_cast<int>(k + 1), std::move(mask), g.cell_area());
    if (c.zones[k].cells.empty())
      throw ConfigError("floodplain zone " + std::to_string(k + 1) + " is empty");
  }

  static const std::array<const char *, kGauges> names{"upstream", "midstream", "downstream"};
  for (std::size_t k = 0; k < kGauges; ++k) {
    const auto col = std::min(
        nc - 1, static_cast<std::size_t>(std::lround(s.gauge_positions[k] * static_cast<double>(nc - 1))));
    const auto row = static_cast<std::size_t>(first_row[col] + static_cast<long>(width / 2));
    c.gauges[k] = GaugeStation{names[k], g.index(col, row), s.gauge_period};
  }

  BoundaryConfig &bc = c.boundary;
  bc.inflow_hydrograph = std::move(inflow);
  {
    const long lo = first_row[0] - static_cast<long>(s.inflow_halfwidth);
    const long hi = first_row[0] + static_cast<long>(width) - 1 + static_cast<long>(s.inflow_halfwidth);
    for (long r = std::max<long>(lo, 0); r <= std::min<long>(hi, static_cast<long>(nr) - 1); ++r)
      if (in_valley(static_cast<std::size_t>(r)))
        bc.upstream_cells.push_back(g.index(0, static_cast<std::size_t>(r)));
  }
  for (std::size_t row = 0; row < nr; ++row) {
    const std::size_t i = g.index(nc - 1, row);
    if (in_valley(row))
      bc.downstream_cells.push_back(i);
    if (g.channel[i])
      bc.stage_cells.push_back(i);
  }
  const double zb_out = bank(nc - 1) - s.channel_depth;
  const double w_m = static_cast<double>(width) * dx;
  bc.rating_curve.eta0 = zb_out;
  bc.rating_curve.b = s.rating_b;
  bc.rating_curve.a = s.rating_a > 0.0 ? s.rating_a : 40.0 * w_m * std::sqrt(s.valley_slope);

  g.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Double-peak event hydrograph

/// Base flow plus two log-normal pulses, sampled at regular knots.
struct HydrographSpec {
  double duration = 14.0 * 86400.0; // s
  double knot_spacing = 3600.0;     // s
  double base_flow = 350.0;         // m³/s
  double peak1_amplitude = 1500.0;  // m³/s above base flow
  double peak1_onset = 0.5 * 86400.0;
  double peak1_time_to_peak = 3.0 * 86400.0;
  double peak1_shape = 0.45;
  double peak2_amplitude = 1200.0;
  double peak2_onset = 6.5 * 86400.0;
  double peak2_time_to_peak = 3.5 * 86400.0;
  double peak2_shape = 0.45;
};

namespace detail {
inline double lognormal_pulse(double t, double onset, double time_to_peak, double shape) {
  const double tau = t - onset;
  if (!(tau > 0.0))
    return 0.0;
  const double l = std::log(tau / time_to_peak);
  return std::exp(-l * l / (2.0 * shape * shape));
}
} // namespace detail

inline Hydrograph make_double_peak_hydrograph(const HydrographSpec &s) {
  if (!(s.duration > 0.0) || !(s.knot_spacing > 0.0) || s.base_flow < 0.0 ||
      !(s.peak1_time_to_peak > 0.0) || !(s.peak2_time_to_peak > 0.0) ||
      !(s.peak1_shape > 0.0) || !(s.peak2_shape > 0.0))
    throw ConfigError("invalid hydrograph parameters");
  Hydrograph hg;
  const auto n = static_cast<std::size_t>(std::ceil(s.duration / s.knot_spacing));
  for (std::size_t k = 0; k <= n; ++k) {
    const double t = std::min(s.duration, static_cast<double>(k) * s.knot_spacing);
    const double q =
        s.base_flow +
        s.peak1_amplitude * detail::lognormal_pulse(t, s.peak1_onset, s.peak1_time_to_peak, s.peak1_shape) +
        s.peak2_amplitude * detail::lognormal_pulse(t, s.peak2_onset, s.peak2_time_to_peak, s.peak2_shape);
    hg.times.push_back(t);
    hg.discharge.push_back(q);
  }
  return hg;
}

} // namespace floodda
