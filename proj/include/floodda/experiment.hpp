#pragma once

// Twin-experiment pipeline: truth run, observation synthesis, FR/IDA/IWDA/IHDA
// runs and verification, in memory and as on-disk stages.

#include "floodda/ascii_grid.hpp"
#include "floodda/config.hpp"
#include "floodda/csv.hpp"
#include "floodda/domain.hpp"
#include "floodda/enkf.hpp"
#include "floodda/errors.hpp"
#include "floodda/metrics.hpp"
#include "floodda/observation.hpp"
#include "floodda/swe.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace floodda {

namespace fs = std::filesystem;

struct Twin {
  ExperimentConfig cfg;
  Catchment catchment;
  ModelState initial; // shared by truth, FR and every member
  std::vector<double> overpasses;
  double t_end = 0.0;
  FloodplainSink leakage;
};

inline std::vector<double> overpass_schedule(const ExperimentConfig &cfg) {
  if (!cfg.overpass_times.empty()) {
    auto t = cfg.overpass_times;
    std::sort(t.begin(), t.end());
    return t;
  }
  // Spread over the middle 80% of the event, on the gauge clock.
  std::vector<double> t;
  const double d = cfg.hydrograph.duration;
  const double p = cfg.catchment.gauge_period;
  const std::size_t n = cfg.overpass_count;
  for (std::size_t k = 0; k < n; ++k) {
    const double f = n == 1 ? 0.5 : 0.1 + 0.8 * static_cast<double>(k) / static_cast<double>(n - 1);
    t.push_back(std::round(f * d / p) * p);
  }
  return t;
}

inline ControlVector truth_controls(const ExperimentConfig &cfg) {
  ControlVector cv = cfg.prior.mean;
  cv.mu = cfg.truth.mu;
  for (std::size_t s : cfg.truth.ks_segments)
    cv.ks[s] += cfg.truth.ks_offset_sigma * cfg.prior.ks_std[s];
  cv.dh = {};
  cv.validate();
  return cv;
}

/// Steady base-flow run from a dry bed; the event starts from its end state.
inline ModelState spin_up_state(const ExperimentConfig &cfg, const Catchment &c) {
  ModelState s = dry_state(c.grid, 0.0);
  if (cfg.spin_up > 0.0) {
    Catchment steady = c;
    const double q0 = interpolate_hydrograph(c.boundary.inflow_hydrograph.start(), c.boundary.inflow_hydrograph);
    steady.boundary.inflow_hydrograph = Hydrograph{{0.0, cfg.spin_up}, {q0, q0}};
    s = run_window(std::move(s), steady, cfg.prior.mean, 0.0, cfg.spin_up, Recorders{}, cfg.solver).state;
  }
  s.t = 0.0;
  s.budget = VolumeBudget{};
  return s;
}

inline Twin prepare_twin(const ExperimentConfig &cfg) {
  cfg.validate();
  Twin tw;
  tw.cfg = cfg;
  tw.catchment = build_synthetic_catchment(cfg.catchment, make_double_peak_hydrograph(cfg.hydrograph));
  tw.t_end = tw.catchment.boundary.inflow_hydrograph.end();
  tw.overpasses = overpass_schedule(cfg);
  tw.initial = spin_up_state(cfg, tw.catchment);
  tw.leakage.mask.assign(tw.catchment.grid.cell_count(), 0);
  for (const auto &z : tw.catchment.zones)
    for (std::size_t i : z.cells)
      tw.leakage.mask[i] = 1;
  tw.leakage.rate = cfg.truth.leakage_rate;
  return tw;
}

inline Recorders event_recorders(const Twin &tw) {
  Recorders r;
  r.gauges = true;
  r.snapshot_times = tw.overpasses;
  return r;
}

struct TruthRun {
  ControlVector controls;
  WindowRecord record;
  VolumeBudget budget;
};

inline TruthRun run_truth(const Twin &tw) {
  TruthRun t;
  t.controls = truth_controls(tw.cfg);
  const FloodplainSink *sink = tw.leakage.rate > 0.0 ? &tw.leakage : nullptr;
  auto r = run_window(tw.initial, tw.catchment, t.controls, 0.0, tw.t_end, event_recorders(tw), tw.cfg.solver, sink);
  t.record = std::move(r.record);
  t.budget = r.state.budget;
  return t;
}

inline ObservationSet make_observations(const Twin &tw, const WindowRecord &truth) {
  return synthesize_observations(truth, tw.catchment, tw.overpasses, tw.cfg.noise, tw.cfg.obs_seed);
}

struct RunResult {
  Mode mode = Mode::FR;
  std::vector<CycleDiagnostics> cycles;
  WindowRecord record; // ensemble mean for DA modes
  std::optional<Ensemble> ensemble;
};

inline RunResult run_mode(const Twin &tw, Mode mode, const ObservationSet *obs) {
  RunResult out;
  out.mode = mode;
  const ExperimentConfig &cfg = tw.cfg;
  if (mode == Mode::FR) {
    auto r = run_window(tw.initial, tw.catchment, cfg.prior.mean, 0.0, tw.t_end, event_recorders(tw), cfg.solver);
    out.record = std::move(r.record);
    CycleDiagnostics d;
    d.t0 = 0.0;
    d.t1 = tw.t_end;
    d.analysis_skipped = true;
    const auto x = flatten(cfg.prior.mean);
    for (std::size_t k = 0; k < kControlSize; ++k)
      d.variables.push_back(VariableStats{control_names()[k], x[k], 0.0, x[k], 0.0});
    out.cycles.push_back(std::move(d));
    return out;
  }
  if (!obs)
    throw MissingArtifact("observations are required for mode " + mode_name(mode));
  Ensemble ens;
  ens.rng_seed = cfg.seed;
  for (auto &cv : draw_prior_ensemble(cfg.prior, cfg.members, cfg.seed)) {
    cv.dh = {};
    ens.members.push_back(Member{cv, tw.initial});
  }
  CycleContext ctx;
  ctx.catchment = &tw.catchment;
  ctx.solver = cfg.solver;
  ctx.prior = cfg.prior;
  ctx.observations = obs;
  ctx.output_snapshot_times = tw.overpasses;
  ctx.t_end = tw.t_end;
  ctx.threads = cfg.threads;
  auto res = run_assimilation(ens, cycle_for_mode(mode, cfg.cycle), 0.0, ctx);
  out.cycles = std::move(res.cycles);
  out.record = std::move(res.mean_record);
  out.ensemble = std::move(ens);
  return out;
}

// ---------------------------------------------------------------------------
// Verification

struct StationRmse {
  std::string station;
  std::size_t n = 0;
  double rmse_truth = 0.0; // against the noiseless truth series
  double rmse_obs = 0.0;   // against the synthetic gauge observations
};

struct OverpassScore {
  double time = 0.0;
  ContingencyResult domain, zones;
};

struct ModeReport {
  Mode mode = Mode::FR;
  std::vector<StationRmse> rmse;
  std::vector<WsrMisfit> wsr;
  std::vector<OverpassScore> scores;
};

inline std::vector<std::uint8_t> zone_region(const Catchment &c) {
  std::vector<std::uint8_t> m(c.grid.cell_count(), 0);
  for (const auto &z : c.zones)
    for (std::size_t i : z.cells)
      m[i] = 1;
  return m;
}

inline ModeReport verify_mode(const Twin &tw, Mode mode, const WindowRecord &truth, const ObservationSet &obs,
                              const WindowRecord &sim) {
  ModeReport rep;
  rep.mode = mode;
  for (const auto &st : tw.catchment.gauges) {
    const GaugeSeries *ts = truth.find_gauge(st.name);
    const GaugeSeries *ss = sim.find_gauge(st.name);
    if (!ts || !ss)
      throw MissingArtifact("gauge series for station " + st.name + " is missing");
    std::map<double, double> sim_at;
    for (std::size_t k = 0; k < ss->times.size(); ++k)
      sim_at[ss->times[k]] = ss->eta[k];
    auto lookup = [&](double t) {
      auto it = sim_at.lower_bound(t - 1e-6);
      if (it == sim_at.end() || std::abs(it->first - t) > 1e-6)
        throw MissingArtifact("simulated series for " + st.name + " lacks t = " + fmt_double(t));
      return it->second;
    };
    std::vector<double> a, b, c, d;
    for (std::size_t k = 0; k < ts->times.size(); ++k) {
      a.push_back(lookup(ts->times[k]));
      b.push_back(ts->eta[k]);
    }
    for (const auto &o : obs.gauge)
      if (o.station == st.name) {
        c.push_back(lookup(o.time));
        d.push_back(o.eta_obs);
      }
    StationRmse r{st.name, a.size(), rmse(a, b), 0.0};
    r.rmse_obs = c.empty() ? std::nan("") : rmse(c, d);
    rep.rmse.push_back(r);
  }
  rep.wsr = wsr_misfit_series(sim, obs.wsr, tw.catchment.zones);
  const auto region = zone_region(tw.catchment);
  for (const auto &map : obs.maps) {
    const DepthSnapshot *snap = sim.find_snapshot(map.time);
    if (!snap)
      throw MissingArtifact("no simulated depth snapshot at t = " + fmt_double(map.time));
    const auto wet = wet_mask_of_depth(snap->h);
    rep.scores.push_back(OverpassScore{map.time, contingency(wet, map), contingency(wet, map, region)});
  }
  return rep;
}

/// Mean over overpasses where the score is defined; nullopt if none is.
template <class Score>
std::optional<double> mean_score(const std::vector<OverpassScore> &s, bool zones, Score score) {
  double acc = 0.0;
  std::size_t n = 0;
  for (const auto &o : s)
    if (auto v = score((zones ? o.zones : o.domain).counts)) {
      acc += *v;
      ++n;
    }
  if (n == 0)
    return std::nullopt;
  return acc / static_cast<double>(n);
}

/// Mean |misfit| per zone (index 0 = zone 1).
inline std::array<double, kZones> mean_abs_wsr_misfit(const std::vector<WsrMisfit> &m) {
  std::array<double, kZones> acc{}, n{};
  for (const auto &x : m) {
    const auto z = static_cast<std::size_t>(x.zone_id - 1);
    acc[z] += std::abs(x.misfit);
    n[z] += 1.0;
  }
  for (std::size_t z = 0; z < kZones; ++z)
    acc[z] = n[z] > 0 ? acc[z] / n[z] : std::nan("");
  return acc;
}

// ---------------------------------------------------------------------------
// Artifact files

inline std::string time_tag(double t) {
  char buf[48];
  if (t == std::floor(t) && t >= 0.0 && t < 1e12)
    std::snprintf(buf, sizeof buf, "%09.0f", t);
  else
    std::snprintf(buf, sizeof buf, "%s", fmt_double(t).c_str());
  return buf;
}

inline AsciiGrid field_to_ascii(const Grid &g, const std::vector<double> &v) {
  AsciiGrid a;
  a.ncols = g.ncols;
  a.nrows = g.nrows;
  a.cellsize = g.cell_size;
  a.values = v;
  return a;
}

/// Writes gauge_<station>.csv files and depth_<time>.asc snapshots plus a
/// manifest.csv (kind,name,time_s,file) indexing them.
inline void write_record(const fs::path &dir, const WindowRecord &rec, const Grid &g) {
  fs::create_directories(dir);
  CsvWriter manifest(dir / "manifest.csv", {"kind", "name", "time_s", "file"});
  for (const auto &s : rec.gauges) {
    const std::string file = "gauge_" + s.station + ".csv";
    CsvWriter w(dir / file, {"time_s", "station", "eta_m"});
    for (std::size_t k = 0; k < s.times.size(); ++k)
      w.row({fmt_double(s.times[k]), s.station, fmt_double(s.eta[k])});
    manifest.row({"gauge", s.station, "", file});
  }
  for (const auto &s : rec.snapshots) {
    const std::string file = "depth_" + time_tag(s.time) + ".asc";
    write_ascii_grid(dir / file, field_to_ascii(g, s.h));
    manifest.row({"snapshot", "depth", fmt_double(s.time), file});
  }
}

inline WindowRecord read_record(const fs::path &dir, const Grid &g) {
  const CsvTable manifest = read_csv(dir / "manifest.csv");
  const std::size_t ck = manifest.column("kind"), cn = manifest.column("name"), ct = manifest.column("time_s"),
                    cf = manifest.column("file");
  std::vector<std::string> missing;
  for (const auto &row : manifest.rows)
    if (!fs::exists(dir / row[cf]))
      missing.push_back((dir / row[cf]).string());
  if (!missing.empty()) {
    std::string msg = "missing artifacts:";
    for (const auto &m : missing)
      msg += " " + m;
    throw MissingArtifact(msg);
  }
  WindowRecord rec;
  for (const auto &row : manifest.rows) {
    if (row[ck] == "gauge") {
      const CsvTable t = read_csv(dir / row[cf]);
      GaugeSeries s;
      s.station = row[cn];
      const std::size_t it = t.column("time_s"), ie = t.column("eta_m");
      for (const auto &r : t.rows) {
        s.times.push_back(parse_double(r[it]));
        s.eta.push_back(parse_double(r[ie]));
      }
      rec.gauges.push_back(std::move(s));
    } else if (row[ck] == "snapshot") {
      AsciiGrid a = read_ascii_grid(dir / row[cf]);
      if (a.ncols != g.ncols || a.nrows != g.nrows)
        throw ConfigError(row[cf] + ": grid does not match the configured catchment");
      rec.snapshots.push_back(DepthSnapshot{parse_double(row[ct]), std::move(a.values)});
    }
  }
  return rec;
}

inline void write_controls(const fs::path &path, const ControlVector &cv) {
  CsvWriter w(path, {"variable", "value"});
  const auto x = flatten(cv);
  for (std::size_t k = 0; k < kControlSize; ++k)
    w.row({control_names()[k], fmt_double(x[k])});
}

inline void write_observations(const fs::path &dir, const ObservationSet &obs, const Grid &g) {
  fs::create_directories(dir);
  write_gauge_observations(dir / "gauge_obs.csv", obs.gauge);
  write_wsr_observations(dir / "wsr_obs.csv", obs.wsr);
  CsvWriter manifest(dir / "manifest.csv", {"kind", "name", "time_s", "file"});
  manifest.row({"gauge_obs", "gauge", "", "gauge_obs.csv"});
  manifest.row({"wsr_obs", "wsr", "", "wsr_obs.csv"});
  for (const auto &m : obs.maps) {
    const std::string file = "extent_" + time_tag(m.time) + ".asc";
    write_ascii_grid(dir / file, extent_to_ascii(m, g));
    manifest.row({"extent", "extent", fmt_double(m.time), file});
  }
}

inline ObservationSet read_observations(const fs::path &dir) {
  const CsvTable manifest = read_csv(dir / "manifest.csv");
  const std::size_t ck = manifest.column("kind"), ct = manifest.column("time_s"), cf = manifest.column("file");
  ObservationSet obs;
  for (const auto &row : manifest.rows) {
    if (row[ck] == "gauge_obs")
      obs.gauge = read_gauge_observations(dir / row[cf]);
    else if (row[ck] == "wsr_obs")
      obs.wsr = read_wsr_observations(dir / row[cf]);
    else if (row[ck] == "extent")
      obs.maps.push_back(extent_from_ascii(read_ascii_grid(dir / row[cf]), parse_double(row[ct])));
  }
  return obs;
}

// ---------------------------------------------------------------------------
// Pipeline stages

inline fs::path truth_dir(const ExperimentConfig &c) { return fs::path(c.out) / "truth"; }
inline fs::path obs_dir(const ExperimentConfig &c) { return fs::path(c.out) / "obs"; }
inline fs::path run_dir(const ExperimentConfig &c, Mode m) { return fs::path(c.out) / "runs" / mode_name(m); }
inline fs::path verify_dir(const ExperimentConfig &c) { return fs::path(c.out) / "verify"; }

inline void cmd_truth(const ExperimentConfig &cfg, std::ostream &log) {
  const Twin tw = prepare_twin(cfg);
  const TruthRun t = run_truth(tw);
  const fs::path dir = truth_dir(cfg);
  write_record(dir, t.record, tw.catchment.grid);
  write_controls(dir / "controls.csv", t.controls);
  CsvWriter b(dir / "budget.csv", {"inflow_m3", "outflow_m3", "clipped_m3", "sink_m3"});
  b.row({fmt_double(t.budget.inflow), fmt_double(t.budget.outflow), fmt_double(t.budget.clipped),
         fmt_double(t.budget.sink)});
  log << "truth: " << t.record.gauges.size() << " gauge series, " << t.record.snapshots.size()
      << " snapshots -> " << dir.string() << '\n';
}

inline void cmd_synthesize(const ExperimentConfig &cfg, std::ostream &log) {
  const Twin tw = prepare_twin(cfg);
  const WindowRecord truth = read_record(truth_dir(cfg), tw.catchment.grid);
  const ObservationSet obs = make_observations(tw, truth);
  write_observations(obs_dir(cfg), obs, tw.catchment.grid);
  log << "synthesize: " << obs.gauge.size() << " gauge, " << obs.wsr.size() << " wsr observations, "
      << obs.maps.size() << " extent maps -> " << obs_dir(cfg).string() << '\n';
}

inline void cmd_run(const ExperimentConfig &cfg, std::ostream &log) {
  const Twin tw = prepare_twin(cfg);
  std::optional<ObservationSet> obs;
  if (cfg.mode != Mode::FR)
    obs = read_observations(obs_dir(cfg));
  const RunResult r = run_mode(tw, cfg.mode, obs ? &*obs : nullptr);
  const fs::path dir = run_dir(cfg, cfg.mode);
  write_record(dir, r.record, tw.catchment.grid);
  write_cycle_diagnostics(dir / "controls.csv", r.cycles);
  write_cycle_summary(dir / "cycles.csv", r.cycles);
  if (cfg.checkpoint && r.ensemble)
    write_checkpoint(dir / "checkpoint", *r.ensemble, tw.catchment.grid);
  log << "run " << mode_name(cfg.mode) << ": " << r.cycles.size() << " cycle(s) -> " << dir.string() << '\n';
}

namespace detail {
inline std::string score_text(std::optional<double> v) { return v ? fmt_double(*v) : "undefined"; }

inline void write_scores(const fs::path &path, const std::vector<OverpassScore> &scores, bool zones) {
  CsvWriter w(path, {"time_s", "csi", "kappa", "tp", "fn", "fp", "tn"});
  for (const auto &s : scores) {
    const ContingencyCounts &c = (zones ? s.zones : s.domain).counts;
    w.row({fmt_double(s.time), score_text(csi(c)), score_text(kappa(c)), std::to_string(c.tp),
           std::to_string(c.fn), std::to_string(c.fp), std::to_string(c.tn)});
  }
}
} // namespace detail

/// Verifies every mode found under out/runs.
inline void cmd_verify(const ExperimentConfig &cfg, std::ostream &log) {
  const Twin tw = prepare_twin(cfg);
  const Grid &g = tw.catchment.grid;
  std::vector<std::string> missing;
  for (const fs::path p : {truth_dir(cfg) / "manifest.csv", truth_dir(cfg) / "controls.csv",
                           obs_dir(cfg) / "manifest.csv"})
    if (!fs::exists(p))
      missing.push_back(p.string());
  std::vector<Mode> modes;
  for (Mode m : {Mode::FR, Mode::IDA, Mode::IWDA, Mode::IHDA}) {
    const fs::path d = run_dir(cfg, m);
    if (!fs::exists(d))
      continue;
    modes.push_back(m);
    for (const char *f : {"manifest.csv", "controls.csv", "cycles.csv"})
      if (!fs::exists(d / f))
        missing.push_back((d / f).string());
  }
  if (modes.empty())
    missing.push_back((fs::path(cfg.out) / "runs" / "<mode>").string());
  if (!missing.empty()) {
    std::string msg = "verify: missing artifacts:";
    for (const auto &m : missing)
      msg += " " + m;
    throw MissingArtifact(msg);
  }

  const WindowRecord truth = read_record(truth_dir(cfg), g);
  const ObservationSet obs = read_observations(obs_dir(cfg));
  const CsvTable truth_ctl = read_csv(truth_dir(cfg) / "controls.csv");
  std::map<std::string, std::string> truth_value;
  for (const auto &r : truth_ctl.rows)
    truth_value[r[0]] = r[1];

  const fs::path out = verify_dir(cfg);
  fs::create_directories(out);
  CsvWriter ctl(out / "control_series.csv", {"mode", "window_index", "t0_s", "t1_s", "variable", "prior_mean",
                                             "prior_std", "post_mean", "post_std", "truth"});
  CsvWriter rm(out / "rmse.csv", {"mode", "station", "n", "rmse_truth_m", "rmse_obs_m"});
  CsvWriter wm(out / "wsr_misfit.csv", {"mode", "time_s", "zone", "wsr_obs", "wsr_sim", "misfit"});
  CsvWriter sm(out / "summary.csv", {"mode", "metric", "value"});

  for (Mode m : modes) {
    const fs::path d = run_dir(cfg, m);
    const std::string name = mode_name(m);
    const CsvTable cycles = read_csv(d / "cycles.csv");
    std::map<std::string, std::pair<std::string, std::string>> span;
    for (const auto &r : cycles.rows)
      span[r[cycles.column("window_index")]] = {r[cycles.column("t0_s")], r[cycles.column("t1_s")]};
    const CsvTable diag = read_csv(d / "controls.csv");
    for (const auto &r : diag.rows) {
      const auto &[t0, t1] = span[r[0]];
      const bool is_dh = r[1].rfind("dh", 0) == 0;
      ctl.row({name, r[0], t0, t1, r[1], r[2], r[3], r[4], r[5], is_dh ? "" : truth_value[r[1]]});
    }

    const WindowRecord sim = read_record(d, g);
    const ModeReport rep = verify_mode(tw, m, truth, obs, sim);
    double mean_rmse = 0.0;
    for (const auto &r : rep.rmse) {
      rm.row({name, r.station, std::to_string(r.n), fmt_double(r.rmse_truth), fmt_double(r.rmse_obs)});
      mean_rmse += r.rmse_truth / static_cast<double>(rep.rmse.size());
    }
    for (const auto &w : rep.wsr)
      wm.row({name, fmt_double(w.time), std::to_string(w.zone_id), fmt_double(w.obs), fmt_double(w.sim),
              fmt_double(w.misfit)});

    const fs::path cdir = out / "contingency" / name;
    fs::create_directories(cdir);
    for (const auto &s : rep.scores) {
      write_ascii_grid(cdir / ("contingency_" + time_tag(s.time) + ".asc"), contingency_to_ascii(s.domain.map, g));
      write_ascii_grid(cdir / ("contingency_zones_" + time_tag(s.time) + ".asc"),
                       contingency_to_ascii(s.zones.map, g));
    }
    detail::write_scores(out / ("scores_" + name + "_domain.csv"), rep.scores, false);
    detail::write_scores(out / ("scores_" + name + "_zones.csv"), rep.scores, true);

    sm.row({name, "mean_rmse_truth_m", fmt_double(mean_rmse)});
    sm.row({name, "mean_csi_domain", detail::score_text(mean_score(rep.scores, false, csi))});
    sm.row({name, "mean_csi_zones", detail::score_text(mean_score(rep.scores, true, csi))});
    sm.row({name, "mean_kappa_domain", detail::score_text(mean_score(rep.scores, false, kappa))});
    sm.row({name, "mean_kappa_zones", detail::score_text(mean_score(rep.scores, true, kappa))});
    const auto mis = mean_abs_wsr_misfit(rep.wsr);
    for (std::size_t z = 0; z < kZones; ++z)
      sm.row({name, "mean_abs_wsr_misfit_zone" + std::to_string(z + 1), fmt_double(mis[z])});
    log << "verify " << name << ": mean gauge rmse " << mean_rmse << " m\n";
  }
}

} // namespace floodda
