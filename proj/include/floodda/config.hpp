#pragma once

// Experiment configuration: sections of `key = value` lines. Every key has an
// embedded default and the whole table can be dumped back in the same format.

#include "floodda/csv.hpp"
#include "floodda/domain.hpp"
#include "floodda/enkf.hpp"
#include "floodda/errors.hpp"
#include "floodda/observation.hpp"
#include "floodda/swe.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

namespace floodda {

enum class Mode { FR, IDA, IWDA, IHDA };

inline std::string mode_name(Mode m) {
  switch (m) {
  case Mode::FR: return "fr";
  case Mode::IDA: return "ida";
  case Mode::IWDA: return "iwda";
  case Mode::IHDA: return "ihda";
  }
  return "?";
}

inline Mode parse_mode(std::string s) {
  for (char &c : s)
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  for (Mode m : {Mode::FR, Mode::IDA, Mode::IWDA, Mode::IHDA})
    if (mode_name(m) == s)
      return m;
  throw ConfigError("unknown mode '" + s + "' (expected fr, ida, iwda or ihda)");
}

/// Controls and observation types per mode.
inline CycleConfig cycle_for_mode(Mode m, CycleConfig base) {
  base.active = ActiveControls{true, true, m == Mode::IHDA};
  base.use_gauges = true;
  base.use_wsr = m == Mode::IWDA || m == Mode::IHDA;
  return base;
}

/// How the synthetic truth departs from the forecast model.
struct TruthSpec {
  double mu = 1.1;
  std::vector<std::size_t> ks_segments{3, 5}; // river segments shifted by ks_offset_sigma prior std-devs
  double ks_offset_sigma = 2.0;
  double leakage_rate = 2.0e-6; // m/s removed from wet zone cells; 0 disables
};

struct ExperimentConfig {
  CatchmentSpec catchment;
  HydrographSpec hydrograph;
  PriorSpec prior;
  CycleConfig cycle;
  SolverConfig solver;
  ObservationNoise noise;
  std::size_t overpass_count = 11;
  std::vector<double> overpass_times; // empty: overpass_count evenly spread times
  TruthSpec truth;
  Mode mode = Mode::IDA;
  std::size_t members = 75;
  std::uint64_t seed = 1;       // ensemble draws and analysis perturbations
  std::uint64_t obs_seed = 101; // observation noise
  std::size_t threads = 0;      // 0: all hardware threads
  double spin_up = 86400.0;     // s of steady base flow before the event
  bool checkpoint = false;      // write the final ensemble of DA runs
  std::string out = "out";

  void validate() const {
    if (catchment.ncols < 20 || catchment.nrows < 20)
      throw ConfigError("grids smaller than 20x20 are not supported");
    prior.validate();
    cycle.validate();
    solver.validate();
    if (noise.sigma_wl < 0.0 || noise.sigma_wsr < 0.0)
      throw ConfigError("observation noise must be non-negative");
    if (members < 2)
      throw ConfigError("members must be >= 2");
    if (spin_up < 0.0)
      throw ConfigError("spin_up must be >= 0");
    if (!(truth.mu > 0.0) || truth.leakage_rate < 0.0)
      throw ConfigError("invalid truth settings");
    for (std::size_t s : truth.ks_segments)
      if (s > 6)
        throw ConfigError("truth ks segment out of range");
    if (overpass_times.empty() && overpass_count == 0)
      throw ConfigError("overpass_count must be >= 1");
    for (double t : overpass_times)
      if (!(t > 0.0) || t > hydrograph.duration)
        throw ConfigError("overpass time " + fmt_double(t) + " outside the event");
  }
};

// ---------------------------------------------------------------------------
// Text conversion

static_assert(std::is_same_v<std::uint64_t, std::size_t>, "seeds are parsed as size_t");

namespace detail {

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos)
    return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string &s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream ss(s);
  while (std::getline(ss, item, ','))
    if (auto t = trim(item); !t.empty())
      out.push_back(t);
  return out;
}

inline std::string to_text(double v) { return fmt_double(v); }
inline std::string to_text(std::size_t v) { return std::to_string(v); }
inline std::string to_text(bool v) { return v ? "true" : "false"; }
inline std::string to_text(const std::string &v) { return v; }
inline std::string to_text(Mode m) { return mode_name(m); }
template <class T> std::string join_text(const T &seq) {
  std::string s;
  for (const auto &x : seq) {
    if (!s.empty())
      s += ", ";
    s += to_text(x);
  }
  return s;
}
template <std::size_t N> std::string to_text(const std::array<double, N> &a) { return join_text(a); }
inline std::string to_text(const std::vector<double> &v) { return join_text(v); }
inline std::string to_text(const std::vector<std::size_t> &v) { return join_text(v); }

inline void from_text(const std::string &s, double &v) { v = parse_double(trim(s)); }
inline void from_text(const std::string &s, std::size_t &v) {
  const std::string t = trim(s);
  if (t.empty() || t.find_first_not_of("0123456789") != std::string::npos)
    throw ConfigError("not a non-negative integer: '" + s + "'");
  v = std::stoull(t);
}
inline void from_text(const std::string &s, bool &v) {
  const std::string t = trim(s);
  if (t == "true" || t == "1" || t == "yes")
    v = true;
  else if (t == "false" || t == "0" || t == "no")
    v = false;
  else
    throw ConfigError("not a boolean: '" + s + "'");
}
inline void from_text(const std::string &s, std::string &v) { v = trim(s); }
inline void from_text(const std::string &s, Mode &m) { m = parse_mode(trim(s)); }
template <std::size_t N> void from_text(const std::string &s, std::array<double, N> &a) {
  const auto items = split_list(s);
  if (items.size() != N)
    throw ConfigError("expected " + std::to_string(N) + " values, got '" + s + "'");
  for (std::size_t i = 0; i < N; ++i)
    a[i] = parse_double(items[i]);
}
inline void from_text(const std::string &s, std::vector<double> &v) {
  v.clear();
  for (const auto &x : split_list(s))
    v.push_back(parse_double(x));
}
inline void from_text(const std::string &s, std::vector<std::size_t> &v) {
  v.clear();
  for (const auto &x : split_list(s)) {
    std::size_t k = 0;
    from_text(x, k);
    v.push_back(k);
  }
}

} // namespace detail

struct ConfigField {
  std::string section;
  std::string key;
  std::string note;
  std::function<std::string(const ExperimentConfig &)> get;
  std::function<void(ExperimentConfig &, const std::string &)> set;
};

namespace detail {

template <class Acc> ConfigField field(std::string section, std::string key, Acc acc, std::string note = {}) {
  ConfigField f;
  f.section = std::move(section);
  f.key = std::move(key);
  f.note = std::move(note);
  f.get = [acc](const ExperimentConfig &c) { return to_text(acc(const_cast<ExperimentConfig &>(c))); };
  f.set = [acc](ExperimentConfig &c, const std::string &s) { from_text(s, acc(c)); };
  return f;
}

} // namespace detail

inline const std::vector<ConfigField> &config_fields() {
  using detail::field;
  using C = ExperimentConfig;
  static const std::vector<ConfigField> fields{
      field("experiment", "mode", [](C &c) -> auto & { return c.mode; }, "fr | ida | iwda | ihda"),
      field("experiment", "members", [](C &c) -> auto & { return c.members; }),
      field("experiment", "seed", [](C &c) -> auto & { return c.seed; }),
      field("experiment", "obs_seed", [](C &c) -> auto & { return c.obs_seed; }),
      field("experiment", "threads", [](C &c) -> auto & { return c.threads; }, "0 = all cores"),
      field("experiment", "spin_up_s", [](C &c) -> auto & { return c.spin_up; }),
      field("experiment", "checkpoint", [](C &c) -> auto & { return c.checkpoint; }),
      field("experiment", "out", [](C &c) -> auto & { return c.out; }),

      field("catchment", "ncols", [](C &c) -> auto & { return c.catchment.ncols; }),
      field("catchment", "nrows", [](C &c) -> auto & { return c.catchment.nrows; }),
      field("catchment", "cell_size", [](C &c) -> auto & { return c.catchment.cell_size; }, "m"),
      field("catchment", "valley_slope", [](C &c) -> auto & { return c.catchment.valley_slope; }),
      field("catchment", "outlet_bank_elevation", [](C &c) -> auto & { return c.catchment.outlet_bank_elevation; }),
      field("catchment", "channel_depth", [](C &c) -> auto & { return c.catchment.channel_depth; }),
      field("catchment", "channel_width", [](C &c) -> auto & { return c.catchment.channel_width; }),
      field("catchment", "meander_amplitude", [](C &c) -> auto & { return c.catchment.meander_amplitude; }),
      field("catchment", "meander_wavelength", [](C &c) -> auto & { return c.catchment.meander_wavelength; }),
      field("catchment", "dyke_height", [](C &c) -> auto & { return c.catchment.dyke_height; }),
      field("catchment", "floodplain_cross_slope", [](C &c) -> auto & { return c.catchment.floodplain_cross_slope; }),
      field("catchment", "valley_halfwidth", [](C &c) -> auto & { return c.catchment.valley_halfwidth; }),
      field("catchment", "dyked_start", [](C &c) -> auto & { return c.catchment.dyked_start; }),
      field("catchment", "dyked_end", [](C &c) -> auto & { return c.catchment.dyked_end; }),
      field("catchment", "inflow_halfwidth", [](C &c) -> auto & { return c.catchment.inflow_halfwidth; }),
      field("catchment", "gauge_positions", [](C &c) -> auto & { return c.catchment.gauge_positions; }),
      field("catchment", "gauge_period_s", [](C &c) -> auto & { return c.catchment.gauge_period; }),
      field("catchment", "rating_a", [](C &c) -> auto & { return c.catchment.rating_a; }, "<= 0: derived"),
      field("catchment", "rating_b", [](C &c) -> auto & { return c.catchment.rating_b; }),

      field("hydrograph", "duration_s", [](C &c) -> auto & { return c.hydrograph.duration; }),
      field("hydrograph", "knot_spacing_s", [](C &c) -> auto & { return c.hydrograph.knot_spacing; }),
      field("hydrograph", "base_flow", [](C &c) -> auto & { return c.hydrograph.base_flow; }),
      field("hydrograph", "peak1_amplitude", [](C &c) -> auto & { return c.hydrograph.peak1_amplitude; }),
      field("hydrograph", "peak1_onset_s", [](C &c) -> auto & { return c.hydrograph.peak1_onset; }),
      field("hydrograph", "peak1_time_to_peak_s", [](C &c) -> auto & { return c.hydrograph.peak1_time_to_peak; }),
      field("hydrograph", "peak1_shape", [](C &c) -> auto & { return c.hydrograph.peak1_shape; }),
      field("hydrograph", "peak2_amplitude", [](C &c) -> auto & { return c.hydrograph.peak2_amplitude; }),
      field("hydrograph", "peak2_onset_s", [](C &c) -> auto & { return c.hydrograph.peak2_onset; }),
      field("hydrograph", "peak2_time_to_peak_s", [](C &c) -> auto & { return c.hydrograph.peak2_time_to_peak; }),
      field("hydrograph", "peak2_shape", [](C &c) -> auto & { return c.hydrograph.peak2_shape; }),

      field("prior", "ks_mean", [](C &c) -> auto & { return c.prior.mean.ks; }, "floodplain, then segments 1..6"),
      field("prior", "ks_std", [](C &c) -> auto & { return c.prior.ks_std; }),
      field("prior", "mu_mean", [](C &c) -> auto & { return c.prior.mean.mu; }),
      field("prior", "mu_std", [](C &c) -> auto & { return c.prior.mu_std; }),
      field("prior", "dh_mean", [](C &c) -> auto & { return c.prior.mean.dh; }),
      field("prior", "dh_std", [](C &c) -> auto & { return c.prior.dh_std; }),
      field("prior", "ks_min", [](C &c) -> auto & { return c.prior.bounds.ks_min; }),
      field("prior", "mu_min", [](C &c) -> auto & { return c.prior.bounds.mu_min; }),

      field("cycle", "window_length_s", [](C &c) -> auto & { return c.cycle.window_length; }),
      field("cycle", "window_slide_s", [](C &c) -> auto & { return c.cycle.window_slide; }),
      field("cycle", "inflation", [](C &c) -> auto & { return c.cycle.inflation; }),
      field("cycle", "gauge_stride", [](C &c) -> auto & { return c.cycle.gauge_stride; }, "4 = hourly"),

      field("observation", "sigma_wl", [](C &c) -> auto & { return c.noise.sigma_wl; }, "m"),
      field("observation", "sigma_wsr", [](C &c) -> auto & { return c.noise.sigma_wsr; }),
      field("observation", "overpass_count", [](C &c) -> auto & { return c.overpass_count; }),
      field("observation", "overpass_times_s", [](C &c) -> auto & { return c.overpass_times; }, "empty: evenly spread"),

      field("truth", "mu", [](C &c) -> auto & { return c.truth.mu; }),
      field("truth", "ks_segments", [](C &c) -> auto & { return c.truth.ks_segments; }),
      field("truth", "ks_offset_sigma", [](C &c) -> auto & { return c.truth.ks_offset_sigma; }),
      field("truth", "leakage_rate", [](C &c) -> auto & { return c.truth.leakage_rate; }, "m/s"),

      field("solver", "cfl", [](C &c) -> auto & { return c.solver.cfl_number; }),
      field("solver", "drying_threshold", [](C &c) -> auto & { return c.solver.drying_threshold; }, "m"),
      field("solver", "gravity", [](C &c) -> auto & { return c.solver.gravity; }),
      field("solver", "max_dt_s", [](C &c) -> auto & { return c.solver.max_dt; }),
  };
  return fields;
}

/// Applies the keys found in `is` on top of `cfg`. Unknown keys are errors.
inline void apply_config(ExperimentConfig &cfg, std::istream &is, const std::string &origin = "<config>") {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(is, tree);
  } catch (const boost::property_tree::ini_parser_error &e) {
    throw ConfigError(origin + ": " + e.message() + " (line " + std::to_string(e.line()) + ")");
  }
  const auto &fields = config_fields();
  for (const auto &[section, body] : tree) {
    if (body.empty() && !body.data().empty())
      throw ConfigError(origin + ": key '" + section + "' outside any section");
    for (const auto &[key, value] : body) {
      const ConfigField *f = nullptr;
      for (const auto &cand : fields)
        if (cand.section == section && cand.key == key)
          f = &cand;
      if (!f)
        throw ConfigError(origin + ": unknown key [" + section + "] " + key);
      try {
        f->set(cfg, value.data());
      } catch (const ConfigError &e) {
        throw ConfigError(origin + ": [" + section + "] " + key + ": " + e.what());
      }
    }
  }
}

inline ExperimentConfig load_config(const std::filesystem::path &path) {
  std::ifstream is(path);
  if (!is)
    throw ConfigError("cannot read config file " + path.string());
  ExperimentConfig cfg;
  apply_config(cfg, is, path.string());
  return cfg;
}

inline void print_config(std::ostream &os, const ExperimentConfig &cfg) {
  std::string section;
  for (const auto &f : config_fields()) {
    if (f.section != section) {
      if (!section.empty())
        os << '\n';
      section = f.section;
      os << '[' << section << "]\n";
    }
    if (!f.note.empty())
      os << "; " << f.note << '\n';
    os << f.key << " = " << f.get(cfg) << '\n';
  }
}

} // namespace floodda
