#pragma once

// First-order finite-volume shallow-water solver on the catchment raster.
//
// Interface fluxes: Rusanov with hydrostatic reconstruction of the bed, so a
// lake at rest is preserved exactly. The per-face bed-slope correction is
// folded into the momentum flux seen by each side of the face, which keeps the
// update well balanced without forming g/2 h^2 differences.
// Friction: semi-implicit Strickler, applied pointwise after the flux update.

#include "floodda/domain.hpp"
#include "floodda/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

namespace floodda {

struct VolumeBudget {
  double inflow = 0.0;  // m³ entered through the upstream boundary
  double outflow = 0.0; // m³ left through the downstream boundary
  double clipped = 0.0; // m³ removed by the drying threshold (negative if added)
  double sink = 0.0;    // m³ removed by an external floodplain sink

  bool operator==(const VolumeBudget &) const = default;
};

struct ModelState {
  std::vector<double> h; // m
  std::vector<double> u; // m/s, along columns (downstream)
  std::vector<double> v; // m/s, along rows (southward)
  double t = 0.0;        // s
  VolumeBudget budget;

  bool operator==(const ModelState &) const = default;
};

inline ModelState dry_state(const Grid &grid, double t = 0.0) {
  ModelState s;
  s.h.assign(grid.cell_count(), 0.0);
  s.u.assign(grid.cell_count(), 0.0);
  s.v.assign(grid.cell_count(), 0.0);
  s.t = t;
  return s;
}

struct SolverConfig {
  double cfl_number = 0.45;
  double drying_threshold = 1.0e-3; // m
  double gravity = 9.81;            // m/s²
  double max_dt = 60.0;             // s

  void validate() const {
    if (!(cfl_number > 0.0 && cfl_number <= 1.0))
      throw ConfigError("cfl_number must lie in (0, 1]");
    if (!(drying_threshold > 0.0))
      throw ConfigError("drying_threshold must be positive");
    if (!(gravity > 0.0) || !(max_dt > 0.0))
      throw ConfigError("gravity and max_dt must be positive");
  }
};

/// Strickler friction slope magnitude |V|^2 / (K^2 h^(4/3)).
inline double friction_slope(double h, double speed, double ks) {
  return speed * speed / (ks * ks * h * std::cbrt(h));
}

/// Semi-implicit friction update of one cell's velocity. The damping factor is
/// >= 1, so a component never changes sign and |V| never grows.
inline void apply_friction(double h, double &u, double &v, double ks, double gravity, double dt) {
  const double speed = std::sqrt(u * u + v * v);
  if (!(speed > 0.0) || !(h > 0.0))
    return;
  const double damp = 1.0 + dt * gravity * speed / (ks * ks * h * std::cbrt(h));
  u /= damp;
  v /= damp;
}

inline double compute_stable_dt(const ModelState &state, const Grid &grid, const SolverConfig &cfg) {
  double max_speed = 0.0;
  const std::size_t n = state.h.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double h = state.h[i];
    if (!(h > 0.0))
      continue;
    const double s = std::sqrt(state.u[i] * state.u[i] + state.v[i] * state.v[i]) +
                     std::sqrt(cfg.gravity * h);
    max_speed = std::max(max_speed, s);
  }
  if (!(max_speed > 0.0))
    return cfg.max_dt;
  return std::min(cfg.max_dt, cfg.cfl_number * grid.cell_size / max_speed);
}

/// Holds the per-member friction field and scratch buffers; one instance per
/// concurrently running member.
class ShallowWaterSolver {
public:
  /// Inflow velocity ceiling used when the upstream wet section is tiny.
  static constexpr double kMaxInflowVelocity = 3.0;

  ShallowWaterSolver(const Grid &grid, std::vector<double> friction, const BoundaryConfig &bc,
                     SolverConfig cfg)
      : grid_(&grid), bc_(&bc), ks_(std::move(friction)), cfg_(cfg) {
    cfg_.validate();
    if (ks_.size() != grid.cell_count())
      throw ConfigError("friction field size does not match grid");
    const std::size_t n = grid.cell_count();
    hu_.resize(n);
    hv_.resize(n);
    acc_h_.resize(n);
    acc_hu_.resize(n);
    acc_hv_.resize(n);
    open_west_.assign(n, 0);
    open_east_.assign(n, 0);
    for (std::size_t c : bc.upstream_cells) {
      if (c >= n || grid.col_of(c) != 0)
        throw ConfigError("upstream boundary cells must lie on the first column");
      open_west_[c] = 1;
    }
    for (std::size_t c : bc.downstream_cells) {
      if (c >= n || grid.col_of(c) != grid.ncols - 1)
        throw ConfigError("downstream boundary cells must lie on the last column");
      open_east_[c] = 1;
    }
  }

  const SolverConfig &config() const { return cfg_; }
  const Grid &grid() const { return *grid_; }

  double stable_dt(const ModelState &s) const { return compute_stable_dt(s, *grid_, cfg_); }

  /// Advances `s` by `dt` in place. `inflow_multiplier` scales every
  /// hydrograph lookup.
  void advance(ModelState &s, double dt, double inflow_multiplier = 1.0) {
    const Grid &g = *grid_;
    const std::size_t nc = g.ncols, nr = g.nrows, n = g.cell_count();
    const double grav = cfg_.gravity;
    const double dx = g.cell_size;
    const double area = g.cell_area();
    const double *z = g.bed.data();
    double *h = s.h.data();
    double *u = s.u.data();
    double *v = s.v.data();
    double *hu = hu_.data();
    double *hv = hv_.data();
    double *ah = acc_h_.data();
    double *ahu = acc_hu_.data();
    double *ahv = acc_hv_.data();

    for (std::size_t i = 0; i < n; ++i) {
      hu[i] = h[i] * u[i];
      hv[i] = h[i] * v[i];
      ah[i] = 0.0;
      ahu[i] = 0.0;
      ahv[i] = 0.0;
    }

    // Faces between columns (normal +x). L is the west cell.
    for (std::size_t row = 0; row < nr; ++row) {
      const std::size_t base = row * nc;
      for (std::size_t col = 0; col + 1 < nc; ++col) {
        const std::size_t L = base + col, R = L + 1;
        face_flux(h[L], h[R], z[L], z[R], u[L], u[R], v[L], v[R], grav, ah[L], ah[R], ahu[L],
                  ahu[R], ahv[L], ahv[R]);
      }
    }
    // Faces between rows (normal +y, southward). L is the north cell.
    for (std::size_t row = 0; row + 1 < nr; ++row) {
      const std::size_t base = row * nc;
      for (std::size_t col = 0; col < nc; ++col) {
        const std::size_t L = base + col, R = L + nc;
        face_flux(h[L], h[R], z[L], z[R], v[L], v[R], u[L], u[R], grav, ah[L], ah[R], ahv[L],
                  ahv[R], ahu[L], ahu[R]);
      }
    }

    // Reflective walls on every closed edge face.
    for (std::size_t row = 0; row < nr; ++row) {
      const std::size_t w = row * nc, e = w + nc - 1;
      if (!open_west_[w])
        ahu[w] += wall_flux(h[w], -u[w], grav);
      if (!open_east_[e])
        ahu[e] -= wall_flux(h[e], u[e], grav);
    }
    for (std::size_t col = 0; col < nc; ++col) {
      const std::size_t nth = col, sth = (nr - 1) * nc + col;
      ahv[nth] += wall_flux(h[nth], -v[nth], grav);
      ahv[sth] -= wall_flux(h[sth], v[sth], grav);
    }

    // Upstream inflow, spread evenly over the inflow cells.
    if (!bc_->upstream_cells.empty()) {
      const double q_total =
          inflow_multiplier * interpolate_hydrograph(s.t + 0.5 * dt, bc_->inflow_hydrograph);
      double wet_area = 0.0;
      for (std::size_t c : bc_->upstream_cells)
        wet_area += h[c] * dx;
      const double u_in = wet_area > 0.0 ? std::min(q_total / wet_area, kMaxInflowVelocity) : 0.0;
      const double flux = q_total / static_cast<double>(bc_->upstream_cells.size()) / dx;
      for (std::size_t c : bc_->upstream_cells) {
        ah[c] += flux;
        ahu[c] += flux * u_in;
      }
      s.budget.inflow += q_total * dt;
    }

    // Downstream outflow from the rating curve, shared by conveyance h^(5/3).
    if (!bc_->downstream_cells.empty()) {
      double stage = 0.0;
      for (std::size_t c : bc_->stage_cells)
        stage += h[c] + z[c];
      const double q_rating =
          bc_->stage_cells.empty()
              ? 0.0
              : rating_curve_discharge(stage / static_cast<double>(bc_->stage_cells.size()),
                                       bc_->rating_curve);
      double conveyance = 0.0;
      for (std::size_t c : bc_->downstream_cells)
        conveyance += h[c] * std::cbrt(h[c] * h[c]);
      if (q_rating > 0.0 && conveyance > 0.0) {
        double q_out_total = 0.0;
        for (std::size_t c : bc_->downstream_cells) {
          if (!(h[c] > 0.0))
            continue;
          double q = q_rating * h[c] * std::cbrt(h[c] * h[c]) / conveyance;
          q = std::min(q, 0.5 * h[c] * area / dt);
          const double flux = q / dx;
          ah[c] -= flux;
          ahu[c] -= flux * flux / h[c];
          ahv[c] -= flux * v[c];
          q_out_total += q;
        }
        s.budget.outflow += q_out_total * dt;
      }
    }

    const double k = dt / dx;
    const double thr = cfg_.drying_threshold;
    const double t_new = s.t + dt;
    for (std::size_t i = 0; i < n; ++i) {
      if (ah[i] == 0.0 && ahu[i] == 0.0 && ahv[i] == 0.0 && h[i] == 0.0)
        continue;
      const double hn = h[i] + k * ah[i];
      const double hun = hu[i] + k * ahu[i];
      const double hvn = hv[i] + k * ahv[i];
      if (!std::isfinite(hn) || !std::isfinite(hun) || !std::isfinite(hvn))
        throw SolverDivergence(i, t_new);
      if (hn < thr) {
        s.budget.clipped += hn * area;
        h[i] = 0.0;
        u[i] = 0.0;
        v[i] = 0.0;
        continue;
      }
      double un = hun / hn, vn = hvn / hn;
      apply_friction(hn, un, vn, ks_[i], grav, dt);
      h[i] = hn;
      u[i] = un;
      v[i] = vn;
    }
    s.t = t_new;
  }

private:
  // Rusanov flux on reconstructed depths. `un*` are face-normal velocities,
  // `ut*` tangential ones.
  static inline void face_flux(double hL, double hR, double zL, double zR, double unL,
                               double unR, double utL, double utR, double grav, double &ahL,
                               double &ahR, double &anL, double &anR, double &atL,
                               double &atR) {
    if (hL <= 0.0 && hR <= 0.0)
      return;
    const double zs = zL > zR ? zL : zR;
    const double hLs = std::max(0.0, hL + zL - zs);
    const double hRs = std::max(0.0, hR + zR - zs);
    if (hLs <= 0.0 && hRs <= 0.0)
      return;
    const double cL = std::sqrt(grav * hLs), cR = std::sqrt(grav * hRs);
    const double a = std::max(std::abs(unL) + cL, std::abs(unR) + cR);
    const double pL = 0.5 * grav * hLs * hLs;
    const double pR = 0.5 * grav * hRs * hRs;
    const double qL = hLs * unL, qR = hRs * unR;
    const double fh = 0.5 * (qL + qR) - 0.5 * a * (hRs - hLs);
    const double fn = 0.5 * ((qL * unL + pL) + (qR * unR + pR)) - 0.5 * a * (qR - qL);
    const double ft = 0.5 * (qL * utL + qR * utR) - 0.5 * a * (hRs * utR - hLs * utL);
    ahL -= fh;
    ahR += fh;
    anL -= fn - pL;
    anR += fn - pR;
    atL -= ft;
    atR += ft;
  }

  // Normal momentum leaving through a wall, for outward normal velocity `un`,
  // with the hydrostatic part removed.
  static inline double wall_flux(double h, double un, double grav) {
    if (!(h > 0.0))
      return 0.0;
    const double a = std::abs(un) + std::sqrt(grav * h);
    return h * un * un + a * h * un;
  }

  const Grid *grid_;
  const BoundaryConfig *bc_;
  std::vector<double> ks_;
  SolverConfig cfg_;
  std::vector<double> hu_, hv_, acc_h_, acc_hu_, acc_hv_;
  std::vector<std::uint8_t> open_west_, open_east_;
};

/// One explicit update; convenience wrapper around ShallowWaterSolver.
inline ModelState step(ModelState state, const Grid &grid, const std::vector<double> &friction,
                       const BoundaryConfig &bc, const SolverConfig &cfg, double dt,
                       double inflow_multiplier = 1.0) {
  ShallowWaterSolver solver(grid, friction, bc, cfg);
  solver.advance(state, dt, inflow_multiplier);
  return state;
}

inline double total_volume(const ModelState &s, const Grid &g) {
  double v = 0.0;
  for (double h : s.h)
    v += h;
  return v * g.cell_area();
}

// ---------------------------------------------------------------------------
// Window propagation with recorders

struct Recorders {
  bool gauges = false;                // record every gauge at its obs_period
  std::vector<double> snapshot_times; // full depth fields
};

struct GaugeSeries {
  std::string station;
  std::vector<double> times;
  std::vector<double> eta; // free-surface elevation, m

  bool operator==(const GaugeSeries &) const = default;
};

struct DepthSnapshot {
  double time = 0.0;
  std::vector<double> h;

  bool operator==(const DepthSnapshot &) const = default;
};

struct WindowRecord {
  std::vector<GaugeSeries> gauges;
  std::vector<DepthSnapshot> snapshots;

  const GaugeSeries *find_gauge(const std::string &station) const {
    for (const auto &g : gauges)
      if (g.station == station)
        return &g;
    return nullptr;
  }
  const DepthSnapshot *find_snapshot(double time, double tol = 1e-6) const {
    for (const auto &s : snapshots)
      if (std::abs(s.time - time) <= tol)
        return &s;
    return nullptr;
  }
};

/// Uniform water-removal sink on a set of cells (m/s). Used only to give the
/// synthetic truth a process the forecast model lacks.
struct FloodplainSink {
  std::vector<std::uint8_t> mask;
  double rate = 0.0;
};

struct WindowResult {
  ModelState state;
  WindowRecord record;
};

namespace detail {

inline std::vector<double> multiples_in(double period, double t0, double t1) {
  std::vector<double> out;
  if (!(period > 0.0))
    return out;
  const double tol = 1e-9 * std::max(1.0, std::abs(t1));
  auto k = static_cast<long long>(std::ceil(t0 / period - 1e-12));
  for (;; ++k) {
    const double t = static_cast<double>(k) * period;
    if (t > t1 + tol)
      break;
    if (t >= t0 - tol)
      out.push_back(t);
  }
  return out;
}

inline void apply_sink(ModelState &s, const FloodplainSink &sink, const Grid &g,
                       double threshold, double dt) {
  const double removal = sink.rate * dt;
  const double area = g.cell_area();
  for (std::size_t i = 0; i < s.h.size(); ++i) {
    if (!sink.mask[i] || !(s.h[i] > 0.0))
      continue;
    const double taken = std::min(s.h[i], removal);
    s.h[i] -= taken;
    s.budget.sink += taken * area;
    if (s.h[i] < threshold) {
      s.budget.clipped += s.h[i] * area;
      s.h[i] = 0.0;
      s.u[i] = 0.0;
      s.v[i] = 0.0;
    }
  }
}

} // namespace detail

/// Integrates `state` from t0 to t1 under control vector `cv` (friction from
/// cv.ks, inflow scaled by cv.mu; cv.dh is not applied here).
inline WindowResult run_window(ModelState state, const Catchment &catchment, const ControlVector &cv,
                               double t0, double t1, const Recorders &recorders,
                               const SolverConfig &cfg, const FloodplainSink *sink = nullptr) {
  if (!(t1 > t0))
    throw ConfigError("run_window needs t1 > t0");
  if (std::abs(state.t - t0) > 1e-6)
    throw ConfigError("state time " + std::to_string(state.t) + " does not match window start " +
                      std::to_string(t0));
  const Grid &g = catchment.grid;
  if (sink && sink->mask.size() != g.cell_count())
    throw ConfigError("sink mask size does not match grid");
  ShallowWaterSolver solver(g, materialize_friction(g, cv), catchment.boundary, cfg);
  state.t = t0;

  WindowResult out;
  std::vector<double> events;
  std::vector<std::vector<double>> gauge_times;
  if (recorders.gauges) {
    for (const auto &st : catchment.gauges) {
      gauge_times.push_back(detail::multiples_in(st.obs_period, t0, t1));
      events.insert(events.end(), gauge_times.back().begin(), gauge_times.back().end());
      out.record.gauges.push_back(GaugeSeries{st.name, {}, {}});
    }
  }
  for (double ts : recorders.snapshot_times)
    if (ts >= t0 - 1e-9 && ts <= t1 + 1e-9)
      events.push_back(ts);
  // Steps also land on hydrograph knots, where the midpoint inflow rule is exact.
  if (!catchment.boundary.upstream_cells.empty())
    for (double tk : catchment.boundary.inflow_hydrograph.times)
      if (tk > t0 && tk < t1)
        events.push_back(tk);
  std::sort(events.begin(), events.end());
  events.erase(std::unique(events.begin(), events.end(),
                           [](double a, double b) { return std::abs(a - b) <= 1e-9; }),
               events.end());

  std::vector<std::size_t> gauge_cursor(gauge_times.size(), 0);
  auto record_at = [&](double te) {
    for (std::size_t k = 0; k < gauge_times.size(); ++k) {
      auto &cur = gauge_cursor[k];
      if (cur < gauge_times[k].size() && std::abs(gauge_times[k][cur] - te) <= 1e-9) {
        const std::size_t cell = catchment.gauges[k].cell_index;
        out.record.gauges[k].times.push_back(gauge_times[k][cur]);
        out.record.gauges[k].eta.push_back(state.h[cell] + g.bed[cell]);
        ++cur;
      }
    }
    for (double ts : recorders.snapshot_times)
      if (std::abs(ts - te) <= 1e-9)
        out.record.snapshots.push_back(DepthSnapshot{ts, state.h});
  };

  std::size_t ev = 0;
  while (ev < events.size() && events[ev] <= t0 + 1e-9)
    record_at(events[ev++]);

  double t = t0;
  while (t < t1) {
    const double target = ev < events.size() ? std::min(events[ev], t1) : t1;
    double dt = solver.stable_dt(state);
    bool land = false;
    const double remaining = target - t;
    if (dt >= remaining) {
      dt = remaining;
      land = true;
    } else if (dt > 0.5 * remaining) {
      dt = 0.5 * remaining; // avoid a sliver step before the target
    }
    if (!(dt > 1e-9))
      throw SolverDivergence(0, t);
    solver.advance(state, dt, cv.mu);
    if (land)
      state.t = target;
    t = state.t;
    if (sink && sink->rate > 0.0)
      detail::apply_sink(state, *sink, g, cfg.drying_threshold, dt);
    while (ev < events.size() && events[ev] <= t + 1e-9)
      record_at(events[ev++]);
  }
  out.state = std::move(state);
  return out;
}

} // namespace floodda
