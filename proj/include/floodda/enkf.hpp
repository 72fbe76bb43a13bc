#pragma once

// Stochastic (perturbed-observation) ensemble Kalman filter over the control
// vector, with zonal floodplain state correction and overlapping-window
// cycling.

#include "floodda/ascii_grid.hpp"
#include "floodda/csv.hpp"
#include "floodda/domain.hpp"
#include "floodda/errors.hpp"
#include "floodda/observation.hpp"
#include "floodda/parallel.hpp"
#include "floodda/random.hpp"
#include "floodda/swe.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace floodda {

inline constexpr std::size_t kControlSize = 7 + 1 + kZones;

inline const std::array<std::string, kControlSize> &control_names() {
  static const std::array<std::string, kControlSize> names{
      "ks0", "ks1", "ks2", "ks3", "ks4", "ks5", "ks6", "mu", "dh1", "dh2", "dh3", "dh4", "dh5"};
  return names;
}

inline std::array<double, kControlSize> flatten(const ControlVector &cv) {
  std::array<double, kControlSize> x{};
  std::copy(cv.ks.begin(), cv.ks.end(), x.begin());
  x[7] = cv.mu;
  std::copy(cv.dh.begin(), cv.dh.end(), x.begin() + 8);
  return x;
}

inline ControlVector unflatten(const std::array<double, kControlSize> &x) {
  ControlVector cv;
  std::copy(x.begin(), x.begin() + 7, cv.ks.begin());
  cv.mu = x[7];
  std::copy(x.begin() + 8, x.end(), cv.dh.begin());
  return cv;
}

struct ActiveControls {
  bool ks = true;
  bool mu = true;
  bool dh = false;

  std::vector<std::size_t> indices() const {
    std::vector<std::size_t> idx;
    if (ks)
      for (std::size_t i = 0; i < 7; ++i)
        idx.push_back(i);
    if (mu)
      idx.push_back(7);
    if (dh)
      for (std::size_t i = 8; i < kControlSize; ++i)
        idx.push_back(i);
    return idx;
  }
};

struct ControlBounds {
  double ks_min = 1.0;
  double mu_min = 0.1;
};

inline ControlVector clip_to_bounds(ControlVector cv, const ControlBounds &b) {
  for (double &k : cv.ks)
    k = std::max(k, b.ks_min);
  cv.mu = std::max(cv.mu, b.mu_min);
  return cv;
}

/// Independent Gaussian prior per control component.
struct PriorSpec {
  ControlVector mean = calibrated_controls();
  std::array<double, 7> ks_std{0.85, 2.25, 1.9, 1.9, 2.0, 2.0, 2.0};
  double mu_std = 0.06;
  std::array<double, kZones> dh_std{0.25, 0.25, 0.25, 0.25, 0.25};
  ControlBounds bounds;

  std::array<double, kControlSize> std_devs() const {
    std::array<double, kControlSize> s{};
    std::copy(ks_std.begin(), ks_std.end(), s.begin());
    s[7] = mu_std;
    std::copy(dh_std.begin(), dh_std.end(), s.begin() + 8);
    return s;
  }

  void validate() const {
    mean.validate();
    for (double s : std_devs())
      if (!(s >= 0.0) || !std::isfinite(s))
        throw ConfigError("prior standard deviations must be non-negative");
    if (!(bounds.ks_min > 0.0) || !(bounds.mu_min > 0.0))
      throw ConfigError("control bounds must be positive");
  }
};

inline std::vector<ControlVector> draw_prior_ensemble(const PriorSpec &spec, std::size_t n,
                                                      std::uint64_t seed) {
  if (n < 2)
    throw ConfigError("an ensemble needs at least two members");
  spec.validate();
  const auto mean = flatten(spec.mean);
  const auto sd = spec.std_devs();
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<ControlVector> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto rng = make_stream(seed, {static_cast<std::uint64_t>(Stream::Prior), i});
    std::array<double, kControlSize> x{};
    for (std::size_t k = 0; k < kControlSize; ++k)
      x[k] = mean[k] + sd[k] * normal(rng);
    out.push_back(clip_to_bounds(unflatten(x), spec.bounds));
  }
  return out;
}

/// Fresh zone-correction draw for one member in one window.
inline std::array<double, kZones> draw_zone_corrections(const PriorSpec &spec, std::uint64_t seed,
                                                        std::size_t window, std::size_t member) {
  auto rng = make_stream(seed, {static_cast<std::uint64_t>(Stream::ZoneCorrection), window, member});
  std::normal_distribution<double> normal(0.0, 1.0);
  std::array<double, kZones> dh{};
  for (std::size_t k = 0; k < kZones; ++k)
    dh[k] = spec.mean.dh[k] + spec.dh_std[k] * normal(rng);
  return dh;
}

/// Uniform depth correction over the wet cells of each zone. Dry cells stay
/// dry; cells driven to zero depth lose their velocity.
inline ModelState apply_state_correction(ModelState state, std::span<const double> dh,
                                         std::span<const FloodplainZone> zones) {
  if (dh.size() != zones.size())
    throw ConfigError("one correction per zone expected");
  for (std::size_t k = 0; k < zones.size(); ++k) {
    if (dh[k] == 0.0)
      continue;
    for (std::size_t i : zones[k].cells) {
      if (!(state.h[i] > 0.0))
        continue;
      state.h[i] = std::max(0.0, state.h[i] + dh[k]);
      if (state.h[i] == 0.0) {
        state.u[i] = 0.0;
        state.v[i] = 0.0;
      }
    }
  }
  return state;
}

// ---------------------------------------------------------------------------
// Analysis

struct AnalysisSettings {
  ActiveControls active;
  ControlBounds bounds;
  double inflation = 1.0;
};

/// Observation perturbations, one column per member; column i depends only on
/// (seed, window, i).
inline Eigen::MatrixXd draw_observation_perturbations(const Eigen::VectorXd &sigma, std::size_t n,
                                                      std::uint64_t seed, std::size_t window) {
  Eigen::MatrixXd eps(sigma.size(), static_cast<Eigen::Index>(n));
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    auto rng = make_stream(seed, {static_cast<std::uint64_t>(Stream::Perturbation), window, i});
    for (Eigen::Index r = 0; r < sigma.size(); ++r)
      eps(r, static_cast<Eigen::Index>(i)) = sigma(r) * normal(rng);
  }
  return eps;
}

/// Stochastic EnKF update with caller-supplied perturbations.
/// `predicted` is m x n (column i = H(x_i)); `perturbations` is m x n.
inline std::vector<ControlVector>
analysis_with_perturbations(std::span<const ControlVector> prior, const Eigen::MatrixXd &predicted,
                            const Eigen::VectorXd &obs, const Eigen::VectorXd &sigma,
                            const Eigen::MatrixXd &perturbations, const AnalysisSettings &settings) {
  const auto n = static_cast<Eigen::Index>(prior.size());
  const Eigen::Index m = obs.size();
  if (n < 2)
    throw ConfigError("analysis needs at least two members");
  if (m < 1)
    throw ConfigError("analysis needs at least one observation");
  if (predicted.rows() != m || predicted.cols() != n || sigma.size() != m ||
      perturbations.rows() != m || perturbations.cols() != n)
    throw ConfigError("analysis: inconsistent dimensions");
  if (!(settings.inflation >= 1.0))
    throw ConfigError("inflation factor must be >= 1");
  for (Eigen::Index r = 0; r < m; ++r)
    if (!(sigma(r) > 0.0))
      throw ConfigError("observation error std-devs must be positive");

  const std::vector<std::size_t> idx = settings.active.indices();
  std::vector<std::array<double, kControlSize>> flat;
  flat.reserve(prior.size());
  for (const auto &cv : prior)
    flat.push_back(flatten(cv));
  if (idx.empty()) {
    return {prior.begin(), prior.end()};
  }

  const auto d = static_cast<Eigen::Index>(idx.size());
  Eigen::MatrixXd X(d, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index r = 0; r < d; ++r)
      X(r, j) = flat[static_cast<std::size_t>(j)][idx[static_cast<std::size_t>(r)]];

  const Eigen::VectorXd x_mean = X.rowwise().mean();
  const Eigen::VectorXd y_mean = predicted.rowwise().mean();
  const Eigen::MatrixXd A = X.colwise() - x_mean;
  const Eigen::MatrixXd Y = predicted.colwise() - y_mean;
  const double norm = 1.0 / static_cast<double>(n - 1);
  const Eigen::MatrixXd cxy = norm * (A * Y.transpose());
  Eigen::MatrixXd S = norm * (Y * Y.transpose());
  S.diagonal() += sigma.array().square().matrix();

  const Eigen::LLT<Eigen::MatrixXd> llt(S);
  if (llt.info() != Eigen::Success)
    throw Error("analysis: innovation covariance is not positive definite");
  const Eigen::MatrixXd innovations = (perturbations.colwise() + obs) - predicted;
  const Eigen::MatrixXd increments = cxy * llt.solve(innovations);
  X += increments;

  std::vector<ControlVector> out;
  out.reserve(prior.size());
  for (Eigen::Index j = 0; j < n; ++j) {
    auto x = flat[static_cast<std::size_t>(j)];
    for (Eigen::Index r = 0; r < d; ++r)
      x[idx[static_cast<std::size_t>(r)]] = X(r, j);
    out.push_back(clip_to_bounds(unflatten(x), settings.bounds));
  }

  if (settings.inflation != 1.0) {
    std::array<double, kControlSize> mean{};
    for (const auto &cv : out) {
      const auto x = flatten(cv);
      for (std::size_t r : idx)
        mean[r] += x[r];
    }
    for (std::size_t r : idx)
      mean[r] /= static_cast<double>(n);
    for (auto &cv : out) {
      auto x = flatten(cv);
      for (std::size_t r : idx)
        x[r] = mean[r] + settings.inflation * (x[r] - mean[r]);
      cv = clip_to_bounds(unflatten(x), settings.bounds);
    }
  }
  return out;
}

inline std::vector<ControlVector> analysis(std::span<const ControlVector> prior,
                                           const Eigen::MatrixXd &predicted,
                                           const Eigen::VectorXd &obs, const Eigen::VectorXd &sigma,
                                           std::uint64_t seed, std::size_t window,
                                           const AnalysisSettings &settings) {
  const Eigen::MatrixXd eps = draw_observation_perturbations(sigma, prior.size(), seed, window);
  return analysis_with_perturbations(prior, predicted, obs, sigma, eps, settings);
}

// ---------------------------------------------------------------------------
// Cycling

struct Member {
  ControlVector controls;
  ModelState state;
};

struct Ensemble {
  std::vector<Member> members;
  std::size_t window_index = 0;
  std::uint64_t rng_seed = 0;
};

struct CycleConfig {
  double window_length = 18.0 * 3600.0;
  double window_slide = 12.0 * 3600.0;
  ActiveControls active;
  double inflation = 1.0;
  bool use_gauges = true;
  bool use_wsr = false;
  std::size_t gauge_stride = 1; // assimilate every k-th gauge observation

  void validate() const {
    if (!(window_slide > 0.0) || !(window_slide <= window_length))
      throw ConfigError("window slide must satisfy 0 < slide <= length");
    if (!(inflation >= 1.0))
      throw ConfigError("inflation must be >= 1");
    if (gauge_stride < 1)
      throw ConfigError("gauge stride must be >= 1");
  }
};

struct CycleContext {
  const Catchment *catchment = nullptr;
  SolverConfig solver;
  PriorSpec prior;
  const ObservationSet *observations = nullptr;
  std::vector<double> output_snapshot_times; // recorded during the analyzed pass
  double t_end = 0.0;
  std::size_t threads = 0;
};

struct VariableStats {
  std::string name;
  double prior_mean = 0.0, prior_std = 0.0, post_mean = 0.0, post_std = 0.0;
};

struct CycleDiagnostics {
  std::size_t window_index = 0;
  double t0 = 0.0, t1 = 0.0;
  std::size_t n_gauge_obs = 0, n_wsr_obs = 0;
  bool analysis_skipped = false;
  double innovation_mean = 0.0, innovation_rms = 0.0;
  std::vector<VariableStats> variables;
};

struct CycleResult {
  CycleDiagnostics diagnostics;
  WindowRecord mean_record; // analyzed ensemble mean over this cycle's output span
  double next_t0 = 0.0;
  bool last = false;
};

namespace detail {

inline std::pair<std::array<double, kControlSize>, std::array<double, kControlSize>>
control_moments(const std::vector<Member> &members) {
  std::array<double, kControlSize> mean{}, var{};
  const double n = static_cast<double>(members.size());
  for (const auto &m : members) {
    const auto x = flatten(m.controls);
    for (std::size_t k = 0; k < kControlSize; ++k)
      mean[k] += x[k];
  }
  for (double &v : mean)
    v /= n;
  for (const auto &m : members) {
    const auto x = flatten(m.controls);
    for (std::size_t k = 0; k < kControlSize; ++k)
      var[k] += (x[k] - mean[k]) * (x[k] - mean[k]);
  }
  for (double &v : var)
    v = members.size() > 1 ? std::sqrt(v / (n - 1.0)) : 0.0;
  return {mean, var};
}

/// Averages member records over [t_from, t_to) (or [t_from, t_to] when
/// `inclusive`).
inline WindowRecord mean_record(const std::vector<WindowRecord> &records, double t_from, double t_to,
                                bool inclusive) {
  WindowRecord out;
  if (records.empty())
    return out;
  auto keep = [&](double t) {
    return t >= t_from - 1e-9 && (inclusive ? t <= t_to + 1e-9 : t < t_to - 1e-9);
  };
  const double n = static_cast<double>(records.size());
  for (std::size_t g = 0; g < records[0].gauges.size(); ++g) {
    GaugeSeries s;
    s.station = records[0].gauges[g].station;
    for (std::size_t k = 0; k < records[0].gauges[g].times.size(); ++k) {
      const double t = records[0].gauges[g].times[k];
      if (!keep(t))
        continue;
      double sum = 0.0;
      for (const auto &r : records)
        sum += r.gauges[g].eta[k];
      s.times.push_back(t);
      s.eta.push_back(sum / n);
    }
    out.gauges.push_back(std::move(s));
  }
  for (std::size_t k = 0; k < records[0].snapshots.size(); ++k) {
    const double t = records[0].snapshots[k].time;
    if (!keep(t))
      continue;
    DepthSnapshot s{t, std::vector<double>(records[0].snapshots[k].h.size(), 0.0)};
    for (const auto &r : records)
      for (std::size_t i = 0; i < s.h.size(); ++i)
        s.h[i] += r.snapshots[k].h[i];
    for (double &v : s.h)
      v /= n;
    out.snapshots.push_back(std::move(s));
  }
  return out;
}

inline std::string member_context(std::size_t member, std::size_t window) {
  return "member " + std::to_string(member) + ", window " + std::to_string(window);
}

} // namespace detail

/// Selects the observations assimilated in the window (t0, t1].
inline std::vector<Observation> window_observations(const ObservationSet &store, const Catchment &c,
                                                    const CycleConfig &cycle, double t0, double t1) {
  std::vector<Observation> batch;
  auto inside = [&](double t) { return t > t0 + 1e-9 && t <= t1 + 1e-9; };
  if (cycle.use_gauges) {
    for (const auto &station : c.gauges) {
      for (const auto &o : store.gauge) {
        if (o.station != station.name || !inside(o.time))
          continue;
        const auto k = static_cast<long long>(std::llround(o.time / station.obs_period));
        if (k % static_cast<long long>(cycle.gauge_stride) != 0)
          continue;
        batch.emplace_back(o);
      }
    }
  }
  if (cycle.use_wsr)
    for (const auto &o : store.wsr)
      if (inside(o.time))
        batch.emplace_back(o);
  return batch;
}

/// One assimilation cycle starting at t0. Members must hold states at t0.
inline CycleResult run_cycle(Ensemble &ens, const CycleConfig &cycle, double t0,
                             const CycleContext &ctx) {
  cycle.validate();
  if (!ctx.catchment || !ctx.observations)
    throw ConfigError("cycle context is incomplete");
  const Catchment &c = *ctx.catchment;
  const std::size_t n = ens.members.size();
  if (n < 2)
    throw ConfigError("an ensemble needs at least two members");
  const std::size_t w = ens.window_index;
  const double t1 = std::min(t0 + cycle.window_length, ctx.t_end);
  if (!(t1 > t0))
    throw ConfigError("cycle starts at or after the end of the event");
  const bool last = t1 >= ctx.t_end - 1e-9;
  const double t_stop = last ? t1 : t0 + cycle.window_slide;

  CycleResult result;
  result.last = last;
  result.next_t0 = t_stop;
  CycleDiagnostics &diag = result.diagnostics;
  diag.window_index = w;
  diag.t0 = t0;
  diag.t1 = t1;

  const std::vector<Observation> batch = window_observations(*ctx.observations, c, cycle, t0, t1);
  for (const auto &o : batch)
    (std::holds_alternative<GaugeObservation>(o) ? diag.n_gauge_obs : diag.n_wsr_obs) += 1;

  Recorders output_rec;
  output_rec.gauges = true;
  for (double ts : ctx.output_snapshot_times)
    if (ts >= t0 - 1e-9 && ts <= t_stop + 1e-9)
      output_rec.snapshot_times.push_back(ts);

  std::vector<WindowRecord> records(n);
  std::vector<ModelState> start_states(n);
  for (std::size_t i = 0; i < n; ++i)
    start_states[i] = ens.members[i].state;

  const auto [prior_mean, prior_std] = detail::control_moments(ens.members);

  if (batch.empty()) {
    diag.analysis_skipped = true;
    parallel_for(
        n,
        [&](std::size_t i) {
          try {
            auto r = run_window(start_states[i], c, ens.members[i].controls, t0, t_stop, output_rec,
                                ctx.solver);
            ens.members[i].state = std::move(r.state);
            records[i] = std::move(r.record);
          } catch (const SolverDivergence &e) {
            throw SolverDivergence(e.cell(), e.time(), detail::member_context(i, w));
          }
        },
        ctx.threads);
    for (std::size_t k = 0; k < kControlSize; ++k)
      diag.variables.push_back(VariableStats{control_names()[k], prior_mean[k], prior_std[k],
                                             prior_mean[k], prior_std[k]});
    result.mean_record = detail::mean_record(records, t0, t_stop, last);
    ens.window_index += 1;
    return result;
  }

  // (1) Forecast pass over the whole window.
  if (cycle.active.dh)
    for (std::size_t i = 0; i < n; ++i)
      ens.members[i].controls.dh = draw_zone_corrections(ctx.prior, ens.rng_seed, w, i);
  const auto [fc_mean, fc_std] = detail::control_moments(ens.members);

  Recorders forecast_rec;
  forecast_rec.gauges = diag.n_gauge_obs > 0;
  for (const auto &o : batch)
    if (const auto *wo = std::get_if<WsrObservation>(&o))
      forecast_rec.snapshot_times.push_back(wo->time);

  const auto m = static_cast<Eigen::Index>(batch.size());
  Eigen::MatrixXd predicted(m, static_cast<Eigen::Index>(n));
  parallel_for(
      n,
      [&](std::size_t i) {
        try {
          ModelState s = start_states[i];
          if (cycle.active.dh)
            s = apply_state_correction(std::move(s), ens.members[i].controls.dh, c.zones);
          auto r = run_window(std::move(s), c, ens.members[i].controls, t0, t1, forecast_rec,
                              ctx.solver);
          const auto hx = predict_observations(r.record, c, batch);
          for (Eigen::Index k = 0; k < m; ++k)
            predicted(k, static_cast<Eigen::Index>(i)) = hx[static_cast<std::size_t>(k)];
        } catch (const SolverDivergence &e) {
          throw SolverDivergence(e.cell(), e.time(), detail::member_context(i, w));
        }
      },
      ctx.threads);

  // (2) Analysis of the active controls.
  Eigen::VectorXd y(m), sigma(m);
  for (Eigen::Index k = 0; k < m; ++k) {
    y(k) = observation_value(batch[static_cast<std::size_t>(k)]);
    sigma(k) = observation_sigma(batch[static_cast<std::size_t>(k)]);
  }
  std::vector<ControlVector> prior_controls;
  prior_controls.reserve(n);
  for (const auto &mem : ens.members)
    prior_controls.push_back(mem.controls);
  AnalysisSettings settings{cycle.active, ctx.prior.bounds, cycle.inflation};
  const auto posterior = analysis(prior_controls, predicted, y, sigma, ens.rng_seed, w, settings);
  for (std::size_t i = 0; i < n; ++i)
    ens.members[i].controls = posterior[i];

  const Eigen::VectorXd innov = y - predicted.rowwise().mean();
  diag.innovation_mean = innov.mean();
  diag.innovation_rms = std::sqrt(innov.squaredNorm() / static_cast<double>(m));
  const auto [post_mean, post_std] = detail::control_moments(ens.members);
  for (std::size_t k = 0; k < kControlSize; ++k)
    diag.variables.push_back(
        VariableStats{control_names()[k], fc_mean[k], fc_std[k], post_mean[k], post_std[k]});

  // (3) zone correction of the window-start state, (4) analyzed re-run up to
  // the hand-off time.
  parallel_for(
      n,
      [&](std::size_t i) {
        try {
          ModelState s = std::move(start_states[i]);
          if (cycle.active.dh)
            s = apply_state_correction(std::move(s), ens.members[i].controls.dh, c.zones);
          auto r = run_window(std::move(s), c, ens.members[i].controls, t0, t_stop, output_rec,
                              ctx.solver);
          ens.members[i].state = std::move(r.state);
          records[i] = std::move(r.record);
        } catch (const SolverDivergence &e) {
          throw SolverDivergence(e.cell(), e.time(), detail::member_context(i, w));
        }
      },
      ctx.threads);

  result.mean_record = detail::mean_record(records, t0, t_stop, last);
  ens.window_index += 1;
  return result;
}

struct AssimilationResult {
  std::vector<CycleDiagnostics> cycles;
  WindowRecord mean_record; // analyzed ensemble mean over the whole event
};

/// Cycles from t_start until the event end.
inline AssimilationResult run_assimilation(Ensemble &ens, const CycleConfig &cycle, double t_start,
                                           const CycleContext &ctx) {
  AssimilationResult out;
  double t0 = t_start;
  for (;;) {
    CycleResult r = run_cycle(ens, cycle, t0, ctx);
    out.cycles.push_back(std::move(r.diagnostics));
    if (out.mean_record.gauges.empty()) {
      out.mean_record.gauges = std::move(r.mean_record.gauges);
    } else {
      for (std::size_t g = 0; g < out.mean_record.gauges.size(); ++g) {
        auto &dst = out.mean_record.gauges[g];
        const auto &src = r.mean_record.gauges[g];
        dst.times.insert(dst.times.end(), src.times.begin(), src.times.end());
        dst.eta.insert(dst.eta.end(), src.eta.begin(), src.eta.end());
      }
    }
    for (auto &s : r.mean_record.snapshots)
      out.mean_record.snapshots.push_back(std::move(s));
    if (r.last)
      break;
    t0 = r.next_t0;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Diagnostics and checkpoints

inline void write_cycle_diagnostics(const std::filesystem::path &path,
                                    const std::vector<CycleDiagnostics> &cycles) {
  CsvWriter w(path, {"window_index", "variable", "prior_mean", "prior_std", "post_mean", "post_std"});
  for (const auto &c : cycles)
    for (const auto &v : c.variables)
      w.row({std::to_string(c.window_index), v.name, fmt_double(v.prior_mean), fmt_double(v.prior_std),
             fmt_double(v.post_mean), fmt_double(v.post_std)});
}

inline void write_cycle_summary(const std::filesystem::path &path,
                                const std::vector<CycleDiagnostics> &cycles) {
  CsvWriter w(path, {"window_index", "t0_s", "t1_s", "n_gauge_obs", "n_wsr_obs", "analysis_skipped",
                     "innovation_mean", "innovation_rms"});
  for (const auto &c : cycles)
    w.row({std::to_string(c.window_index), fmt_double(c.t0), fmt_double(c.t1),
           std::to_string(c.n_gauge_obs), std::to_string(c.n_wsr_obs),
           c.analysis_skipped ? "1" : "0", fmt_double(c.innovation_mean),
           fmt_double(c.innovation_rms)});
}

namespace detail {

inline AsciiGrid field_grid(const Grid &g, const std::vector<double> &values) {
  AsciiGrid a;
  a.ncols = g.ncols;
  a.nrows = g.nrows;
  a.cellsize = g.cell_size;
  a.values = values;
  return a;
}

inline std::string member_tag(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "member_%03zu", i);
  return buf;
}

} // namespace detail

/// Text bundle: meta.csv, controls.csv and member_NNN_{h,u,v}.asc.
inline void write_checkpoint(const std::filesystem::path &dir, const Ensemble &ens, const Grid &g) {
  std::filesystem::create_directories(dir);
  if (ens.members.empty())
    throw ConfigError("cannot checkpoint an empty ensemble");
  {
    CsvWriter meta(dir / "meta.csv", {"key", "value"});
    meta.row({"members", std::to_string(ens.members.size())});
    meta.row({"window_index", std::to_string(ens.window_index)});
    meta.row({"rng_seed", std::to_string(ens.rng_seed)});
    meta.row({"time_s", fmt_double(ens.members.front().state.t)});
  }
  std::vector<std::string> header{"member"};
  for (const auto &n : control_names())
    header.push_back(n);
  CsvWriter ctl(dir / "controls.csv", header);
  for (std::size_t i = 0; i < ens.members.size(); ++i) {
    std::vector<std::string> row{std::to_string(i)};
    for (double x : flatten(ens.members[i].controls))
      row.push_back(fmt_double(x));
    ctl.row(row);
    const auto &s = ens.members[i].state;
    const std::string tag = detail::member_tag(i);
    write_ascii_grid(dir / (tag + "_h.asc"), detail::field_grid(g, s.h));
    write_ascii_grid(dir / (tag + "_u.asc"), detail::field_grid(g, s.u));
    write_ascii_grid(dir / (tag + "_v.asc"), detail::field_grid(g, s.v));
  }
}

inline Ensemble read_checkpoint(const std::filesystem::path &dir, const Grid &g) {
  const CsvTable meta = read_csv(dir / "meta.csv");
  auto meta_value = [&](const std::string &key) -> std::string {
    for (const auto &r : meta.rows)
      if (r.size() == 2 && r[0] == key)
        return r[1];
    throw MissingArtifact("checkpoint meta lacks '" + key + "'");
  };
  Ensemble ens;
  ens.window_index = std::stoull(meta_value("window_index"));
  ens.rng_seed = std::stoull(meta_value("rng_seed"));
  const double t = parse_double(meta_value("time_s"));
  const CsvTable ctl = read_csv(dir / "controls.csv");
  if (ctl.header.size() != kControlSize + 1)
    throw ConfigError("checkpoint controls.csv has the wrong number of columns");
  for (const auto &r : ctl.rows) {
    if (r.size() != kControlSize + 1)
      throw ConfigError("checkpoint controls.csv has a malformed row");
    const std::size_t i = std::stoull(r[0]);
    std::array<double, kControlSize> x{};
    for (std::size_t k = 0; k < kControlSize; ++k)
      x[k] = parse_double(r[k + 1]);
    Member m;
    m.controls = unflatten(x);
    const std::string tag = detail::member_tag(i);
    m.state.h = read_ascii_grid(dir / (tag + "_h.asc")).values;
    m.state.u = read_ascii_grid(dir / (tag + "_u.asc")).values;
    m.state.v = read_ascii_grid(dir / (tag + "_v.asc")).values;
    m.state.t = t;
    if (m.state.h.size() != g.cell_count() || m.state.u.size() != g.cell_count() ||
        m.state.v.size() != g.cell_count())
      throw ConfigError("checkpoint grid does not match the catchment");
    ens.members.push_back(std::move(m));
  }
  if (std::stoull(meta_value("members")) != ens.members.size())
    throw ConfigError("checkpoint member count mismatch");
  return ens;
}

} // namespace floodda
