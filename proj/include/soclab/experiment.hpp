#pragma once

// Experiment orchestration: a single driven run with transient detection and
// size statistics, the drive-rate and joint drive/size collapse comparisons,
// and the drive sweep that tracks how the scaling range shrinks with h.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "soclab/closure.hpp"
#include "soclab/collapse.hpp"
#include "soclab/config.hpp"
#include "soclab/histogram.hpp"
#include "soclab/lattice.hpp"
#include "soclab/power_law.hpp"
#include "soclab/steady_state.hpp"

namespace soclab {

inline constexpr const char* kVersion = "1.0.0";

struct TransientPolicy {
  std::int64_t window = 0;  // 0 selects 10 * L^2 / h_dt
  double slope_tol = 1e-2;
  std::int64_t max_timesteps = 10'000'000;
};

struct ExperimentConfig {
  int side = 100;
  std::int64_t threshold = 4;
  Boundaries boundaries = Boundaries::corner_pile();
  DriveSpec drive{};
  std::uint64_t seed = 1;
  std::int64_t target_avalanches = 1'000'000;
  TransientPolicy transient{};
  bool audit_ledger = false;  // recount the lattice after every timestep
  int bins_per_decade = 10;
  double window_tolerance = 0.15;
  int slope_half_width = 2;

  double histogram_base() const { return std::pow(10.0, 1.0 / bins_per_decade); }

  std::int64_t transient_window() const {
    if (transient.window > 0) return transient.window;
    const double turnover = 10.0 * double(side) * double(side) /
                            (double(drive.grains_per_event) * drive.event_probability);
    return std::max<std::int64_t>(100, std::llround(turnover));
  }

  void validate() const {
    if (side < 2) throw ConfigError("lattice side must be >= 2");
    if (threshold < 1) throw ConfigError("toppling threshold must be >= 1");
    drive.validate(side);
    if (target_avalanches < 1000) throw ConfigError("target avalanches must be >= 1000");
    if (transient.window < 0) throw ConfigError("transient window must be >= 0");
    if (!(transient.slope_tol > 0.0)) throw ConfigError("slope tolerance must be positive");
    if (transient.max_timesteps < 2 * transient_window())
      throw ConfigError("max transient timesteps must cover two detection windows");
    if (bins_per_decade < 1) throw ConfigError("bins per decade must be >= 1");
    if (!(window_tolerance > 0.0)) throw ConfigError("window tolerance must be positive");
    if (slope_half_width < 1) throw ConfigError("slope half width must be >= 1");
  }

  static const std::vector<std::string>& known_keys() {
    static const std::vector<std::string> keys = {
        "lattice.side",         "lattice.threshold",       "lattice.north",         "lattice.south",
        "lattice.east",         "lattice.west",            "drive.grains_per_event", "drive.site",
        "drive.region_extent",  "drive.event_probability", "run.seed",              "run.avalanches",
        "run.transient_window", "run.slope_tol",           "run.max_transient",     "run.audit_ledger",
        "analysis.bins_per_decade", "analysis.window_tolerance", "analysis.slope_half_width"};
    return keys;
  }

  static ExperimentConfig from(const KeyValueConfig& kv) {
    kv.require_known(known_keys());
    ExperimentConfig c;
    c.side = static_cast<int>(kv.get_int("lattice.side", c.side));
    c.threshold = kv.get_int("lattice.threshold", c.threshold);
    c.boundaries.north = parse_boundary(kv.get_string("lattice.north", to_string(c.boundaries.north)));
    c.boundaries.south = parse_boundary(kv.get_string("lattice.south", to_string(c.boundaries.south)));
    c.boundaries.east = parse_boundary(kv.get_string("lattice.east", to_string(c.boundaries.east)));
    c.boundaries.west = parse_boundary(kv.get_string("lattice.west", to_string(c.boundaries.west)));
    c.drive.grains_per_event = kv.get_int("drive.grains_per_event", c.drive.grains_per_event);
    c.drive.site_policy = parse_site_policy(kv.get_string("drive.site", to_string(c.drive.site_policy)));
    c.drive.region_extent = static_cast<int>(kv.get_int("drive.region_extent", c.drive.region_extent));
    c.drive.event_probability = kv.get_double("drive.event_probability", c.drive.event_probability);
    const auto seed = kv.get_int("run.seed", static_cast<std::int64_t>(c.seed));
    if (seed < 0) throw ConfigError("seed must be >= 0");
    c.seed = static_cast<std::uint64_t>(seed);
    c.target_avalanches = kv.get_int("run.avalanches", c.target_avalanches);
    c.transient.window = kv.get_int("run.transient_window", c.transient.window);
    c.transient.slope_tol = kv.get_double("run.slope_tol", c.transient.slope_tol);
    c.transient.max_timesteps = kv.get_int("run.max_transient", c.transient.max_timesteps);
    c.audit_ledger = kv.get_bool("run.audit_ledger", c.audit_ledger);
    c.bins_per_decade = static_cast<int>(kv.get_int("analysis.bins_per_decade", c.bins_per_decade));
    c.window_tolerance = kv.get_double("analysis.window_tolerance", c.window_tolerance);
    c.slope_half_width = static_cast<int>(kv.get_int("analysis.slope_half_width", c.slope_half_width));
    c.validate();
    return c;
  }

  /// Complete key set; parsing the result with from() gives back *this.
  KeyValueConfig to_kv() const {
    KeyValueConfig kv;
    kv.set("lattice.side", std::to_string(side));
    kv.set("lattice.threshold", std::to_string(threshold));
    kv.set("lattice.north", to_string(boundaries.north));
    kv.set("lattice.south", to_string(boundaries.south));
    kv.set("lattice.east", to_string(boundaries.east));
    kv.set("lattice.west", to_string(boundaries.west));
    kv.set("drive.grains_per_event", std::to_string(drive.grains_per_event));
    kv.set("drive.site", to_string(drive.site_policy));
    kv.set("drive.region_extent", std::to_string(drive.region_extent));
    kv.set("drive.event_probability", format_double(drive.event_probability));
    kv.set("run.seed", std::to_string(seed));
    kv.set("run.avalanches", std::to_string(target_avalanches));
    kv.set("run.transient_window", std::to_string(transient.window));
    kv.set("run.slope_tol", format_double(transient.slope_tol));
    kv.set("run.max_transient", std::to_string(transient.max_timesteps));
    kv.set("run.audit_ledger", audit_ledger ? "true" : "false");
    kv.set("analysis.bins_per_decade", std::to_string(bins_per_decade));
    kv.set("analysis.window_tolerance", format_double(window_tolerance));
    kv.set("analysis.slope_half_width", std::to_string(slope_half_width));
    return kv;
  }

  std::string echo() const {
    std::ostringstream os;
    to_kv().write(os);
    return os.str();
  }
};

/// Corner-driven pile with closed north and west sides, as used for both
/// collapse figures.
inline ExperimentConfig corner_pile_config(int side, std::int64_t grains_per_event, std::uint64_t seed,
                                           std::int64_t avalanches = 1'000'000) {
  ExperimentConfig c;
  c.side = side;
  c.drive.grains_per_event = grains_per_event;
  c.seed = seed;
  c.target_avalanches = avalanches;
  return c;
}

struct RunSummary {
  ExperimentConfig config;
  Ledger ledger;                      // at the end of the run
  std::int64_t steady_state_at = 0;   // first measured timestep
  std::int64_t transient_window = 0;
  std::int64_t measured_timesteps = 0;
  std::int64_t avalanches = 0;        // records with S >= 1 after steady state
  double eps_inj = 0.0;               // grains per timestep over the measurement
  double eps_diss = 0.0;
  double flux_imbalance = 0.0;        // |eps_inj - eps_diss| / eps_inj
  double ra_configured = 0.0;
  double ra_measured = 0.0;
  DriveRegime regime = DriveRegime::Intermediate;
  PowerLawFit fit;
  PowerLawWindow window;
  double bandwidth_decades = 0.0;
  std::int64_t ledger_checks = 0;     // audited timesteps
  std::int64_t ledger_violations = 0;
  std::string histogram_file = "histogram.csv";
};

struct RunResult {
  RunSummary summary;
  std::vector<AvalancheRecord> records;  // every post-transient drive event
  LogHistogram histogram;

  std::vector<std::int64_t> sizes() const {
    std::vector<std::int64_t> s;
    s.reserve(records.size());
    for (const auto& r : records)
      if (r.size > 0) s.push_back(r.size);
    return s;
  }
};

struct Progress {
  std::string phase;  // "transient" or "measure"
  std::int64_t timesteps = 0;
  std::int64_t avalanches = 0;
  std::int64_t target = 0;
};
using ProgressFn = std::function<void(const Progress&)>;

/// Drives the lattice until the stored-grain series passes the steady-state
/// test, then collects `target_avalanches` non-empty avalanches and fits them.
inline RunResult run_experiment(const ExperimentConfig& cfg, const ProgressFn& progress = {}) {
  cfg.validate();
  Lattice lattice(cfg.side, cfg.threshold, cfg.boundaries);
  Rng rng(cfg.seed);
  RunResult out;
  RunSummary& s = out.summary;
  s.config = cfg;
  s.transient_window = cfg.transient_window();
  constexpr std::int64_t kReport = 1 << 16;

  const auto advance = [&]() -> std::optional<AvalancheRecord> {
    auto rec = step(lattice, cfg.drive, rng);
    if (cfg.audit_ledger) {
      ++s.ledger_checks;
      const Ledger& l = lattice.ledger();
      if (!l.balanced() || l.stored != lattice.grain_count()) ++s.ledger_violations;
    }
    return rec;
  };

  // Transient: keep the stored and injected series plus every record until
  // the detector accepts a start time; records before it are discarded.
  const std::int64_t w = s.transient_window;
  std::vector<std::int64_t> stored;
  std::vector<std::int64_t> injected;
  std::vector<AvalancheRecord> pending;
  std::optional<std::int64_t> start;
  std::int64_t next_check = 2 * w;
  while (!start) {
    if (auto rec = advance()) pending.push_back(*rec);
    stored.push_back(lattice.ledger().stored);
    injected.push_back(lattice.ledger().grains_in);
    const auto t = static_cast<std::int64_t>(stored.size());
    if (progress && t % kReport == 0) progress({"transient", t, 0, cfg.target_avalanches});
    if (t == next_check || t == cfg.transient.max_timesteps) {
      try {
        start = detect_steady_state(stored, w, cfg.transient.slope_tol);
      } catch (const TransientError& e) {
        if (t >= cfg.transient.max_timesteps)
          throw TransientError(std::string(e.what()) + " after " + std::to_string(t) + " timesteps",
                               e.final_slope());
        // geometric spacing keeps the total scan cost linear in the transient
        // length; the earliest accepted t only depends on data up to t + 2w
        next_check = std::min(t + std::max(w, t / 4), cfg.transient.max_timesteps);
      }
    }
  }

  // stored[k] and injected[k] are the ledger after timestep k, so the
  // measurement starts from the ledger after timestep start - 1.
  const std::int64_t t0 = *start;
  const std::int64_t in0 = t0 > 0 ? injected[t0 - 1] : 0;
  const std::int64_t out0 = t0 > 0 ? injected[t0 - 1] - stored[t0 - 1] : 0;
  for (const auto& r : pending) {
    if (r.timestep < t0) continue;
    out.records.push_back(r);
    s.avalanches += r.size > 0;
  }
  pending = {};
  stored = {};
  injected = {};

  out.records.reserve(static_cast<std::size_t>(cfg.target_avalanches) + 1024);
  while (s.avalanches < cfg.target_avalanches) {
    if (auto rec = advance()) {
      s.avalanches += rec->size > 0;
      out.records.push_back(*rec);
    }
    if (progress && lattice.ledger().timesteps % kReport == 0)
      progress({"measure", lattice.ledger().timesteps, s.avalanches, cfg.target_avalanches});
  }

  const Ledger& l = lattice.ledger();
  s.ledger = l;
  s.steady_state_at = t0;
  s.measured_timesteps = l.timesteps - t0;
  const double T = double(s.measured_timesteps);
  s.eps_inj = double(l.grains_in - in0) / T;
  s.eps_diss = double(l.grains_out - out0) / T;
  s.flux_imbalance = s.eps_inj > 0 ? std::abs(s.eps_inj - s.eps_diss) / s.eps_inj : 0.0;

  const double nodes = double(cfg.side) * double(cfg.side);
  const double h_node = double(cfg.drive.grains_per_event) * cfg.drive.event_probability / nodes;
  // configured value: steady-state balance eps = h (L0/dl)^D
  s.ra_configured = avalanche_relations(h_node, h_node * nodes, cfg.side, 2, 2.0).control;
  s.ra_measured = s.eps_diss > 0 ? (s.eps_inj / nodes) / s.eps_diss : std::numeric_limits<double>::infinity();
  s.regime = classify_drive_regime(double(cfg.drive.grains_per_event), double(cfg.threshold), cfg.side, 2);

  const auto sizes = out.sizes();
  out.histogram = build_histogram(sizes, cfg.histogram_base());
  s.fit = fit_power_law(sizes, KSMinimize{}, std::nullopt, cfg.histogram_base());
  s.window = detect_power_law_window(out.histogram, s.fit.gamma, cfg.window_tolerance,
                                     static_cast<std::size_t>(cfg.slope_half_width));
  s.bandwidth_decades = s.window.bandwidth_decades();
  return out;
}

/// Integer bounds [s_min, s_max] covered by a window of histogram edges.
inline std::pair<std::int64_t, std::int64_t> window_bounds(const LogRange& r) {
  return {std::llround(std::pow(10.0, r.lo)), std::llround(std::pow(10.0, r.hi)) - 1};
}

/// Fixed-window fit; nullopt when the window is empty or too sparse.
inline std::optional<PowerLawFit> fit_window(const RunResult& run, const LogRange& r) {
  if (!r.valid()) return std::nullopt;
  const auto [lo, hi] = window_bounds(r);
  try {
    return fit_power_law(run.sizes(), FixedMin{lo}, hi, run.summary.config.histogram_base());
  } catch (const DataError&) {
    return std::nullopt;
  }
}

inline bool gammas_agree(const PowerLawFit& a, const PowerLawFit& b, double n_sigma = 2.0) {
  return std::abs(a.gamma - b.gamma) < n_sigma * std::hypot(a.sigma, b.sigma);
}

/// The reference window intersected with the test window carried to the
/// reference axis by S -> S/scale.
inline std::optional<LogRange> joint_window(const PowerLawWindow& ref, const PowerLawWindow& test, double scale) {
  if (!ref.bins || !test.bins) return std::nullopt;
  const double shift = std::log10(scale);
  return intersect(ref.range, {test.range.lo - shift, test.range.hi - shift});
}

inline nlohmann::ordered_json fit_json(const std::optional<PowerLawFit>& f) {
  if (!f) return nullptr;
  nlohmann::ordered_json j;
  j["gamma"] = f->gamma;
  j["sigma"] = f->sigma;
  j["standard_error"] = f->standard_error();
  j["s_min"] = f->s_min;
  j["s_max"] = f->s_max;
  j["n_tail"] = f->n_tail;
  j["ks_distance"] = f->ks_distance;
  return j;
}

inline nlohmann::ordered_json range_json(const std::optional<LogRange>& r) {
  if (!r) return nullptr;
  return {{"log10_lo", r->lo}, {"log10_hi", r->hi}, {"decades", r->decades()}};
}

inline nlohmann::ordered_json collapse_json(const std::optional<CollapseReport>& c) {
  if (!c) return nullptr;
  nlohmann::ordered_json j;
  j["scale_factor"] = c->scale_factor;
  j["overlap_log10_lo"] = c->overlap_lo;
  j["overlap_log10_hi"] = c->overlap_hi;
  j["decades_compared"] = c->decades_compared;
  j["distance"] = c->distance;
  j["worst_at_log10_S"] = c->worst_at;
  return j;
}

inline nlohmann::ordered_json summary_json(const RunSummary& s) {
  nlohmann::ordered_json j;
  j["version"] = kVersion;
  j["seed"] = s.config.seed;
  nlohmann::ordered_json cfg;
  const KeyValueConfig kv = s.config.to_kv();
  for (const auto& [k, v] : kv.values()) cfg[k] = v;
  j["config"] = cfg;
  j["ledger"] = {{"grains_in", s.ledger.grains_in},
                 {"grains_out", s.ledger.grains_out},
                 {"stored", s.ledger.stored},
                 {"timesteps", s.ledger.timesteps},
                 {"balanced", s.ledger.balanced()}};
  if (s.config.audit_ledger)
    j["ledger_audit"] = {{"checks", s.ledger_checks}, {"violations", s.ledger_violations}};
  j["steady_state_reached_at"] = s.steady_state_at;
  j["transient_window"] = s.transient_window;
  j["measured_timesteps"] = s.measured_timesteps;
  j["avalanches"] = s.avalanches;
  j["eps_inj"] = s.eps_inj;
  j["eps_diss"] = s.eps_diss;
  j["flux_imbalance"] = s.flux_imbalance;
  j["R_A_configured"] = s.ra_configured;
  j["R_A_measured"] = s.ra_measured;
  j["drive_regime"] = to_string(s.regime);
  j["fit"] = fit_json(s.fit);
  j["power_law_window"] = s.window.bins ? range_json(s.window.range) : nlohmann::ordered_json(nullptr);
  j["bandwidth_decades"] = s.bandwidth_decades;
  j["histogram"] = s.histogram_file;
  return j;
}

// ---------------------------------------------------------------------------
// Drive-rate comparison at fixed size

struct Figure1Result {
  RunResult low;   // h_dt = 4
  RunResult high;  // h_dt = 16
  double scale = 16.0;
  std::optional<LogRange> window;  // joint power-law window on the low-drive axis
  std::optional<PowerLawFit> low_fit;
  std::optional<PowerLawFit> high_fit;
  bool gamma_consistent = false;
  std::optional<CollapseReport> rescaled;  // A = 16
  std::optional<CollapseReport> raw;       // A = 1 over the same window
  /// High-drive density strictly below low-drive density in every bin with
  /// lower edge <= 10 that the low-drive run occupies.
  bool small_avalanches_suppressed = false;
};

inline bool small_avalanches_suppressed(const LogHistogram& low, const LogHistogram& high, double s_max = 10.0) {
  bool any = false;
  for (std::size_t i = 0; i < low.bins() && low.lo(i) <= s_max; ++i) {
    if (low.counts[i] == 0) continue;
    double other = 0.0;
    for (std::size_t k = 0; k < high.bins(); ++k)
      if (high.lo(k) == low.lo(i)) other = high.density[k];
    if (!(other < low.density[i])) return false;
    any = true;
  }
  return any;
}

inline Figure1Result compare_figure1(RunResult low, RunResult high, double scale = 16.0) {
  Figure1Result f;
  f.low = std::move(low);
  f.high = std::move(high);
  f.scale = scale;
  f.window = joint_window(f.low.summary.window, f.high.summary.window, scale);
  f.low_fit = fit_window(f.low, f.low.summary.window.range);
  f.high_fit = fit_window(f.high, f.high.summary.window.range);
  f.gamma_consistent = f.low_fit && f.high_fit && gammas_agree(*f.low_fit, *f.high_fit);
  if (f.window) {
    try {
      f.rescaled = rescale_and_compare(f.low.histogram, f.high.histogram, scale, f.window);
      f.raw = rescale_and_compare(f.low.histogram, f.high.histogram, 1.0, f.window);
    } catch (const DataError&) {
    }
  }
  f.small_avalanches_suppressed = small_avalanches_suppressed(f.low.histogram, f.high.histogram);
  return f;
}

inline Figure1Result figure1_experiment(std::uint64_t seed, std::int64_t avalanches = 1'000'000,
                                        const ProgressFn& progress = {}) {
  auto low = run_experiment(corner_pile_config(100, 4, seed, avalanches), progress);
  auto high = run_experiment(corner_pile_config(100, 16, seed + 1, avalanches), progress);
  return compare_figure1(std::move(low), std::move(high));
}

inline nlohmann::ordered_json figure1_json(const Figure1Result& f) {
  nlohmann::ordered_json j;
  j["scale_factor"] = f.scale;
  j["joint_window"] = range_json(f.window);
  j["fit_low_drive"] = fit_json(f.low_fit);
  j["fit_high_drive"] = fit_json(f.high_fit);
  j["gamma_consistent_2sigma"] = f.gamma_consistent;
  j["collapse_rescaled"] = collapse_json(f.rescaled);
  j["collapse_unscaled"] = collapse_json(f.raw);
  j["small_avalanches_suppressed"] = f.small_avalanches_suppressed;
  return j;
}

// ---------------------------------------------------------------------------
// Joint drive and size rescaling

struct Figure2Result {
  RunResult small;  // L = 100, h_dt = 4
  RunResult large;  // L = 400, h_dt = 16
  double scale = 16.0;
  std::optional<LogRange> window;           // joint window without the top decade
  std::optional<LogRange> window_with_top;  // same lower end, up to the top of the overlap
  std::optional<CollapseReport> excluded;
  std::optional<CollapseReport> included;
};

inline Figure2Result compare_figure2(RunResult small, RunResult large, double scale = 16.0) {
  Figure2Result f;
  f.small = std::move(small);
  f.large = std::move(large);
  f.scale = scale;
  const auto joint = joint_window(f.small.summary.window, f.large.summary.window, scale);
  if (!joint) return f;
  const auto a = log_density_curve(f.small.histogram);
  const auto b = log_density_curve(f.large.histogram);
  // top of the observed sizes on the reference axis, from both runs
  const double top = std::min(std::log10(f.small.histogram.edges.back()),
                              std::log10(f.large.histogram.edges.back()) - std::log10(scale));
  const double overlap_hi = std::min(a.x.back(), b.x.back() - std::log10(scale));
  LogRange cut{joint->lo, std::min(joint->hi, top - 1.0)};
  if (cut.valid()) f.window = cut;
  LogRange full{joint->lo, overlap_hi};
  if (full.valid()) f.window_with_top = full;
  try {
    if (f.window) f.excluded = rescale_and_compare(f.small.histogram, f.large.histogram, scale, f.window);
    if (f.window_with_top)
      f.included = rescale_and_compare(f.small.histogram, f.large.histogram, scale, f.window_with_top);
  } catch (const DataError&) {
  }
  return f;
}

inline Figure2Result figure2_experiment(std::uint64_t seed, std::int64_t avalanches = 1'000'000,
                                        const ProgressFn& progress = {}) {
  auto small = run_experiment(corner_pile_config(100, 4, seed, avalanches), progress);
  auto large = run_experiment(corner_pile_config(400, 16, seed + 1, avalanches), progress);
  return compare_figure2(std::move(small), std::move(large));
}

inline nlohmann::ordered_json figure2_json(const Figure2Result& f) {
  nlohmann::ordered_json j;
  j["scale_factor"] = f.scale;
  j["window_excluding_top_decade"] = range_json(f.window);
  j["window_including_top_decade"] = range_json(f.window_with_top);
  j["collapse_excluding_top_decade"] = collapse_json(f.excluded);
  j["collapse_including_top_decade"] = collapse_json(f.included);
  return j;
}

// ---------------------------------------------------------------------------
// Drive sweep

struct SweepRow {
  std::int64_t h_dt = 0;
  DriveRegime regime = DriveRegime::Intermediate;
  double ra_configured = 0.0;
  bool fitted = false;
  double bandwidth_decades = 0.0;
  double gamma = 0.0;
  double sigma = 0.0;
  std::optional<RunSummary> summary;
  std::string error;  // non-empty when the run failed
};

struct SweepResult {
  std::vector<SweepRow> rows;
  /// Absent for fewer than two fitted rows.
  std::optional<bool> bandwidth_non_increasing;
  std::optional<bool> gamma_consistent;
  double slack = 0.2;
};

/// bandwidth(h_i) + slack >= bandwidth(h_j) for every fitted pair i < j.
inline std::optional<bool> bandwidth_verdict(const std::vector<SweepRow>& rows, double slack) {
  std::vector<const SweepRow*> fitted;
  for (const auto& r : rows)
    if (r.fitted) fitted.push_back(&r);
  if (fitted.size() < 2) return std::nullopt;
  for (std::size_t i = 0; i < fitted.size(); ++i)
    for (std::size_t j = i + 1; j < fitted.size(); ++j)
      if (fitted[j]->bandwidth_decades > fitted[i]->bandwidth_decades + slack) return false;
  return true;
}

inline std::optional<bool> gamma_verdict(const std::vector<SweepRow>& rows) {
  std::vector<const SweepRow*> fitted;
  for (const auto& r : rows)
    if (r.fitted) fitted.push_back(&r);
  if (fitted.size() < 2) return std::nullopt;
  for (std::size_t i = 0; i < fitted.size(); ++i)
    for (std::size_t j = i + 1; j < fitted.size(); ++j)
      if (std::abs(fitted[i]->gamma - fitted[j]->gamma) >= 2.0 * std::hypot(fitted[i]->sigma, fitted[j]->sigma))
        return false;
  return true;
}

/// One run per drive value on `jobs` worker threads; run i uses seed
/// base.seed + i and the result is independent of completion order. Laminar
/// drives are flagged and skipped.
inline SweepResult bandwidth_sweep(const std::vector<std::int64_t>& h_values, const ExperimentConfig& base,
                                   unsigned jobs = 1, const std::function<void(const std::string&)>& log = {},
                                   double slack = 0.2) {
  if (h_values.empty()) throw ConfigError("sweep needs at least one drive value");
  for (std::size_t i = 1; i < h_values.size(); ++i)
    if (h_values[i] <= h_values[i - 1]) throw ConfigError("sweep drive values must be strictly increasing");

  SweepResult result;
  result.slack = slack;
  result.rows.resize(h_values.size());
  std::vector<ExperimentConfig> configs;
  for (std::size_t i = 0; i < h_values.size(); ++i) {
    ExperimentConfig c = base;
    c.drive.grains_per_event = h_values[i];
    c.seed = base.seed + i;
    c.validate();
    configs.push_back(c);
    auto& row = result.rows[i];
    row.h_dt = h_values[i];
    row.regime = classify_drive_regime(double(h_values[i]), double(c.threshold), c.side, 2);
    const double nodes = double(c.side) * double(c.side);
    const double h_node = double(h_values[i]) * c.drive.event_probability / nodes;
    row.ra_configured = avalanche_relations(h_node, h_node * nodes, c.side, 2, 2.0).control;
  }

  std::mutex log_mutex;
  const auto say = [&](const std::string& msg) {
    if (!log) return;
    std::lock_guard<std::mutex> lock(log_mutex);
    log(msg);
  };
  std::mutex queue_mutex;
  std::size_t next = 0;
  const auto worker = [&] {
    for (;;) {
      std::size_t i;
      {
        std::lock_guard<std::mutex> lock(queue_mutex);
        if (next == configs.size()) return;
        i = next++;
      }
      auto& row = result.rows[i];
      if (row.regime == DriveRegime::Laminar) {
        row.error = "laminar drive regime; not fitted";
        say("h_dt=" + std::to_string(row.h_dt) + ": laminar regime, skipped");
        continue;
      }
      say("h_dt=" + std::to_string(row.h_dt) + ": started");
      try {
        const auto run = run_experiment(configs[i]);
        row.summary = run.summary;
        row.fitted = true;
        row.bandwidth_decades = run.summary.bandwidth_decades;
        row.gamma = run.summary.fit.gamma;
        row.sigma = run.summary.fit.sigma;
        say("h_dt=" + std::to_string(row.h_dt) + ": done");
      } catch (const std::exception& e) {
        row.error = e.what();
        say("h_dt=" + std::to_string(row.h_dt) + ": failed: " + e.what());
      }
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(configs.size())));
  std::vector<std::thread> pool;
  for (unsigned k = 1; k < n; ++k) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  result.bandwidth_non_increasing = bandwidth_verdict(result.rows, slack);
  result.gamma_consistent = gamma_verdict(result.rows);
  return result;
}

inline nlohmann::ordered_json sweep_json(const SweepResult& r) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& row : r.rows) {
    nlohmann::ordered_json o;
    o["h_dt"] = row.h_dt;
    o["regime"] = to_string(row.regime);
    o["R_A_configured"] = row.ra_configured;
    o["fitted"] = row.fitted;
    if (row.fitted) {
      o["bandwidth_decades"] = row.bandwidth_decades;
      o["gamma"] = row.gamma;
      o["sigma"] = row.sigma;
      o["seed"] = row.summary->config.seed;
      o["steady_state_reached_at"] = row.summary->steady_state_at;
    } else {
      o["error"] = row.error;
    }
    rows.push_back(o);
  }
  j["rows"] = rows;
  j["slack_decades"] = r.slack;
  j["bandwidth_non_increasing"] = r.bandwidth_non_increasing ? nlohmann::ordered_json(*r.bandwidth_non_increasing)
                                                             : nlohmann::ordered_json(nullptr);
  j["gamma_consistent_2sigma"] =
      r.gamma_consistent ? nlohmann::ordered_json(*r.gamma_consistent) : nlohmann::ordered_json(nullptr);
  return j;
}

}  // namespace soclab
