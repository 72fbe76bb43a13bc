#include "floodda/swe.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace floodda;

namespace {

Grid basin(std::size_t nc, std::size_t nr, double dx, double (*bed)(std::size_t, std::size_t)) {
  Grid g;
  g.ncols = nc;
  g.nrows = nr;
  g.cell_size = dx;
  g.bed.resize(nc * nr);
  g.channel.assign(nc * nr, 0);
  g.segment_id.assign(nc * nr, 0);
  for (std::size_t r = 0; r < nr; ++r)
    for (std::size_t c = 0; c < nc; ++c)
      g.bed[g.index(c, r)] = bed(c, r);
  return g;
}

double bumpy(std::size_t c, std::size_t r) {
  return 0.4 * std::sin(0.7 * static_cast<double>(c)) * std::cos(0.45 * static_cast<double>(r)) +
         0.002 * static_cast<double>(c * r % 17);
}

double flat(std::size_t, std::size_t) { return 0.0; }

double max_abs(const std::vector<double> &v) {
  double m = 0.0;
  for (double x : v)
    m = std::max(m, std::abs(x));
  return m;
}

Catchment small_catchment() {
  CatchmentSpec s;
  s.ncols = 30;
  s.nrows = 24;
  s.cell_size = 100.0;
  s.channel_width = 200.0;
  s.meander_amplitude = 300.0;
  s.meander_wavelength = 2000.0;
  s.valley_halfwidth = 1000.0;
  HydrographSpec hs;
  hs.duration = 6.0 * 3600.0;
  hs.knot_spacing = 1800.0;
  hs.base_flow = 80.0;
  hs.peak1_amplitude = 200.0;
  hs.peak1_onset = 0.0;
  hs.peak1_time_to_peak = 2.0 * 3600.0;
  hs.peak2_amplitude = 0.0;
  return build_synthetic_catchment(s, make_double_peak_hydrograph(hs));
}

ModelState channel_filled(const Catchment &c, double depth) {
  ModelState s = dry_state(c.grid);
  for (std::size_t i = 0; i < s.h.size(); ++i)
    if (c.grid.channel[i])
      s.h[i] = depth;
  return s;
}

} // namespace

TEST(StableDt, HandEvaluatedCfl) {
  const Grid g = basin(3, 3, 10.0, flat);
  ModelState s = dry_state(g);
  s.h.assign(9, 1.0);
  SolverConfig cfg;
  cfg.cfl_number = 0.9;
  cfg.max_dt = 1e9;
  EXPECT_NEAR(compute_stable_dt(s, g, cfg), 0.9 * 10.0 / std::sqrt(9.81), 1e-12);
  EXPECT_NEAR(compute_stable_dt(s, g, cfg), 2.873, 1e-3);
}

TEST(StableDt, AllDryReturnsMaxDt) {
  const Grid g = basin(4, 4, 10.0, flat);
  SolverConfig cfg;
  EXPECT_EQ(compute_stable_dt(dry_state(g), g, cfg), cfg.max_dt);
}

TEST(StableDt, LinearInCellSize) {
  Grid g = basin(4, 4, 10.0, flat);
  ModelState s = dry_state(g);
  s.h = std::vector<double>(16, 0.7);
  s.u = std::vector<double>(16, 0.3);
  s.v = std::vector<double>(16, -0.2);
  SolverConfig cfg;
  cfg.max_dt = 1e9;
  const double a = compute_stable_dt(s, g, cfg);
  g.cell_size = 20.0;
  EXPECT_DOUBLE_EQ(compute_stable_dt(s, g, cfg), 2.0 * a);
}

TEST(Friction, StricklerSlopeByHand) { EXPECT_DOUBLE_EQ(friction_slope(1.0, 1.0, 40.0), 6.25e-4); }

TEST(Friction, SemiImplicitNeverReversesOrGrows) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> vel(-5.0, 5.0), dep(1e-3, 10.0), ks(1.0, 80.0), dt(0.0, 1e4);
  for (int k = 0; k < 100000; ++k) {
    const double u0 = vel(rng), v0 = vel(rng);
    double u = u0, v = v0;
    apply_friction(dep(rng), u, v, ks(rng), 9.81, dt(rng));
    EXPECT_FALSE(u * u0 < 0.0);
    EXPECT_FALSE(v * v0 < 0.0);
    EXPECT_LE(u * u + v * v, u0 * u0 + v0 * v0);
  }
}

TEST(Step, LakeAtRestIsPreserved) {
  Grid g = basin(40, 30, 25.0, bumpy);
  ModelState s = dry_state(g);
  const double eta = 0.2; // some bumps stay dry
  for (std::size_t i = 0; i < s.h.size(); ++i) {
    // A film thinner than the drying threshold is not at rest; make it an islet.
    if (eta - g.bed[i] < SolverConfig{}.drying_threshold)
      g.bed[i] = std::max(g.bed[i], eta);
    s.h[i] = std::max(0.0, eta - g.bed[i]);
  }
  const ModelState s0 = s;
  const BoundaryConfig closed;
  ShallowWaterSolver solver(g, std::vector<double>(g.cell_count(), 30.0), closed, SolverConfig{});
  for (int n = 0; n < 1000; ++n)
    solver.advance(s, solver.stable_dt(s));
  EXPECT_LE(max_abs(s.u), 1e-12);
  EXPECT_LE(max_abs(s.v), 1e-12);
  for (std::size_t i = 0; i < s.h.size(); ++i)
    EXPECT_NEAR(s.h[i], s0.h[i], 1e-13);
}

TEST(Step, ClosedBasinConservesVolume) {
  const Grid g = basin(50, 50, 20.0, bumpy);
  ModelState s = dry_state(g);
  for (std::size_t r = 0; r < 50; ++r)
    for (std::size_t c = 0; c < 50; ++c) {
      const double d2 = std::pow(static_cast<double>(c) - 20.0, 2) + std::pow(static_cast<double>(r) - 25.0, 2);
      s.h[g.index(c, r)] = std::max(0.0, 0.5 - g.bed[g.index(c, r)] + 1.5 * std::exp(-d2 / 30.0));
    }
  const double v0 = total_volume(s, g);
  const BoundaryConfig closed;
  ShallowWaterSolver solver(g, std::vector<double>(g.cell_count(), 25.0), closed, SolverConfig{});
  double peak_speed = 0.0;
  for (int n = 0; n < 1000; ++n) {
    solver.advance(s, solver.stable_dt(s));
    peak_speed = std::max(peak_speed, max_abs(s.u));
  }
  const double v1 = total_volume(s, g) + s.budget.clipped;
  EXPECT_LE(std::abs(v1 - v0) / v0, 1e-8);
  EXPECT_GT(peak_speed, 0.05); // water actually moved
}

TEST(Step, DamBreakOntoDryBedStaysNonNegative) {
  const Grid g = basin(40, 12, 10.0, bumpy);
  ModelState s = dry_state(g);
  for (std::size_t r = 0; r < 12; ++r)
    for (std::size_t c = 0; c < 10; ++c)
      s.h[g.index(c, r)] = 2.0;
  const BoundaryConfig closed;
  ShallowWaterSolver solver(g, std::vector<double>(g.cell_count(), 30.0), closed, SolverConfig{});
  for (int n = 0; n < 1500; ++n) {
    solver.advance(s, solver.stable_dt(s));
    for (std::size_t i = 0; i < s.h.size(); ++i) {
      ASSERT_GE(s.h[i], 0.0);
      if (s.h[i] == 0.0) {
        ASSERT_EQ(s.u[i], 0.0);
        ASSERT_EQ(s.v[i], 0.0);
      }
    }
  }
  EXPECT_GT(s.h[g.index(39, 6)], 0.0);
}

TEST(Step, NonFiniteResultReportsCellAndTime) {
  const Grid g = basin(6, 6, 10.0, flat);
  ModelState s = dry_state(g, 100.0);
  s.h.assign(36, 1.0);
  s.u[14] = std::nan("");
  const BoundaryConfig closed;
  try {
    step(s, g, std::vector<double>(36, 30.0), closed, SolverConfig{}, 0.5);
    FAIL() << "expected divergence";
  } catch (const SolverDivergence &e) {
    EXPECT_DOUBLE_EQ(e.time(), 100.5);
    EXPECT_LT(e.cell(), 36u);
  }
}

TEST(Step, FrictionFieldSizeIsChecked) {
  const Grid g = basin(6, 6, 10.0, flat);
  const BoundaryConfig closed;
  EXPECT_THROW(ShallowWaterSolver(g, std::vector<double>(5, 30.0), closed, SolverConfig{}), ConfigError);
}

TEST(RunWindow, InflowVolumeScalesWithMultiplier) {
  const Catchment c = small_catchment();
  const ModelState s0 = channel_filled(c, 2.0);
  const SolverConfig cfg;
  ControlVector cv = calibrated_controls();
  const double t1 = c.boundary.inflow_hydrograph.end();
  const double exact = integrate_hydrograph(c.boundary.inflow_hydrograph, 0.0, t1);
  const auto ref = run_window(s0, c, cv, 0.0, t1, Recorders{}, cfg);
  cv.mu = 1.1;
  const auto scaled = run_window(s0, c, cv, 0.0, t1, Recorders{}, cfg);
  EXPECT_NEAR(ref.state.budget.inflow, exact, 1e-10 * exact);
  EXPECT_NEAR(scaled.state.budget.inflow, 1.1 * exact, 1e-10 * exact);
  EXPECT_NEAR(scaled.state.budget.inflow / ref.state.budget.inflow, 1.1, 1e-10);
}

TEST(RunWindow, OpenCatchmentVolumeBudgetCloses) {
  const Catchment c = small_catchment();
  const ModelState s0 = channel_filled(c, 2.0);
  const auto r = run_window(s0, c, calibrated_controls(), 0.0, c.boundary.inflow_hydrograph.end(), Recorders{},
                            SolverConfig{});
  const auto &b = r.state.budget;
  const double lhs = total_volume(r.state, c.grid);
  const double rhs = total_volume(s0, c.grid) + b.inflow - b.outflow - b.clipped - b.sink;
  EXPECT_NEAR(lhs, rhs, 1e-9 * b.inflow);
  EXPECT_GT(b.outflow, 0.0);
}

TEST(RunWindow, NoRecordersGiveOnlyFinalState) {
  const Catchment c = small_catchment();
  const auto r = run_window(channel_filled(c, 2.0), c, calibrated_controls(), 0.0, 3600.0, Recorders{}, SolverConfig{});
  EXPECT_TRUE(r.record.gauges.empty());
  EXPECT_TRUE(r.record.snapshots.empty());
  EXPECT_DOUBLE_EQ(r.state.t, 3600.0);
}

TEST(RunWindow, RecordsGaugesOnTheirClockAndSnapshotsOnRequest) {
  const Catchment c = small_catchment();
  Recorders rec;
  rec.gauges = true;
  rec.snapshot_times = {1234.5, 5400.0, 99999.0};
  const ModelState s0 = channel_filled(c, 2.0);
  const auto r = run_window(s0, c, calibrated_controls(), 0.0, 7200.0, rec, SolverConfig{});
  ASSERT_EQ(r.record.gauges.size(), 3u);
  for (std::size_t k = 0; k < 3; ++k) {
    const auto &gs = r.record.gauges[k];
    EXPECT_EQ(gs.station, c.gauges[k].name);
    ASSERT_EQ(gs.times.size(), 9u);
    for (std::size_t j = 0; j < 9; ++j)
      EXPECT_EQ(gs.times[j], 900.0 * static_cast<double>(j));
    const std::size_t cell = c.gauges[k].cell_index;
    EXPECT_DOUBLE_EQ(gs.eta[0], s0.h[cell] + c.grid.bed[cell]);
  }
  ASSERT_EQ(r.record.snapshots.size(), 2u);
  EXPECT_EQ(r.record.snapshots[0].time, 1234.5);
  EXPECT_EQ(r.record.snapshots[1].time, 5400.0);
  EXPECT_NE(r.record.find_snapshot(5400.0), nullptr);
  EXPECT_EQ(r.record.find_snapshot(99999.0), nullptr);
}

TEST(RunWindow, SplitWindowsMatchOneWindow) {
  const Catchment c = small_catchment();
  const ModelState s0 = channel_filled(c, 2.0);
  const SolverConfig cfg;
  Recorders rec;
  rec.gauges = true;
  const auto whole = run_window(s0, c, calibrated_controls(), 0.0, 7200.0, rec, cfg);
  const auto a = run_window(s0, c, calibrated_controls(), 0.0, 3600.0, rec, cfg);
  const auto b = run_window(a.state, c, calibrated_controls(), 3600.0, 7200.0, rec, cfg);
  EXPECT_EQ(b.state.h, whole.state.h);
  EXPECT_EQ(b.state.u, whole.state.u);
  EXPECT_EQ(b.state.v, whole.state.v);
}

TEST(RunWindow, IsBitwiseDeterministic) {
  const Catchment c = small_catchment();
  Recorders rec;
  rec.gauges = true;
  rec.snapshot_times = {3000.0};
  const ModelState s0 = channel_filled(c, 2.0);
  const auto a = run_window(s0, c, calibrated_controls(), 0.0, 5000.0, rec, SolverConfig{});
  const auto b = run_window(s0, c, calibrated_controls(), 0.0, 5000.0, rec, SolverConfig{});
  EXPECT_EQ(a.state, b.state);
  EXPECT_EQ(a.record.gauges, b.record.gauges);
  EXPECT_EQ(a.record.snapshots, b.record.snapshots);
}

TEST(RunWindow, RejectsMismatchedStartAndEmptyWindow) {
  const Catchment c = small_catchment();
  const ModelState s0 = channel_filled(c, 2.0);
  EXPECT_THROW(run_window(s0, c, calibrated_controls(), 10.0, 100.0, Recorders{}, SolverConfig{}), ConfigError);
  EXPECT_THROW(run_window(s0, c, calibrated_controls(), 0.0, 0.0, Recorders{}, SolverConfig{}), ConfigError);
}

TEST(RunWindow, SinkRemovesWaterOnlyFromMaskedCells) {
  Catchment c;
  c.grid = basin(10, 10, 50.0, flat);
  ModelState s0 = dry_state(c.grid);
  s0.h.assign(100, 0.5);
  FloodplainSink sink;
  sink.mask.assign(100, 0);
  for (std::size_t i = 0; i < 100; i += 2)
    sink.mask[i] = 1;
  sink.rate = 1e-5;
  const auto r = run_window(s0, c, calibrated_controls(), 0.0, 3600.0, Recorders{}, SolverConfig{}, &sink);
  EXPECT_NEAR(r.state.budget.sink, 1e-5 * 3600.0 * 50.0 * c.grid.cell_area(), 1e-9 * r.state.budget.sink);
  const double v = total_volume(r.state, c.grid) + r.state.budget.sink + r.state.budget.clipped;
  EXPECT_NEAR(v, total_volume(s0, c.grid), 1e-12 * v);
}
