// soclab: sandpile experiments, avalanche statistics and dimensional analysis.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "soclab/closure.hpp"
#include "soclab/collapse.hpp"
#include "soclab/config.hpp"
#include "soclab/experiment.hpp"
#include "soclab/histogram.hpp"
#include "soclab/pi_groups.hpp"
#include "soclab/plot.hpp"
#include "soclab/power_law.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

enum ExitCode : int {
  kOk = 0,
  kUsage = 2,
  kConfig = 3,
  kConflict = 4,
  kOutputExists = 5,
  kRuntime = 6,
  kData = 7,
  kTable = 8,
};

constexpr const char* kExitCodeHelp =
    "Exit codes:\n"
    "  0  success\n"
    "  2  usage error (unknown flag, missing argument)\n"
    "  3  malformed or invalid config\n"
    "  4  conflicting options\n"
    "  5  output directory exists (use --force)\n"
    "  6  runtime failure (transient not converged, I/O)\n"
    "  7  unusable data (fit or collapse input)\n"
    "  8  malformed variable table\n"
    "Errors print one line to stderr: error: code=N kind=K message=\"...\"";

struct Failure {
  int code;
  std::string kind;
  std::string message;
};

std::string escape(const std::string& s) {
  std::string out;
  for (const char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c == '\n' ? ' ' : c;
  }
  return out;
}

/// All console output goes through here so sweep workers never interleave.
class Console {
public:
  void out(const std::string& line) {
    std::lock_guard<std::mutex> lock(mutex_);
    std::cout << line << '\n' << std::flush;
  }
  void err(const std::string& line) {
    std::lock_guard<std::mutex> lock(mutex_);
    std::cerr << line << '\n' << std::flush;
  }

private:
  std::mutex mutex_;
};

Console console;

struct Common {
  std::string config;
  std::string out;
  std::int64_t seed = -1;
  unsigned jobs = 1;
  bool force = false;
  std::int64_t avalanches = 0;
  bool quiet = false;
};

fs::path output_dir(const Common& c, const std::string& default_name) {
  if (!c.out.empty()) return c.out;
  const char* root = std::getenv("SOCLAB_OUT_ROOT");
  return fs::path(root && *root ? root : "runs") / default_name;
}

void prepare_output(const fs::path& dir, bool force) {
  if (fs::exists(dir) && !fs::is_empty(dir) && !force)
    throw Failure{kOutputExists, "output_exists", "output directory " + dir.string() + " exists; pass --force"};
  fs::create_directories(dir);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  f << text;
  if (!f) throw Failure{kRuntime, "io", "cannot write " + path.string()};
}

void write_histogram(const fs::path& path, const soclab::LogHistogram& h) {
  std::ofstream f(path, std::ios::binary);
  soclab::write_histogram_csv(f, h);
  if (!f) throw Failure{kRuntime, "io", "cannot write " + path.string()};
}

void write_manifest(const fs::path& dir, const std::string& command, const std::string& config_echo,
                    std::uint64_t seed, double wall, const std::vector<std::string>& files) {
  json m;
  m["command"] = command;
  m["soclab_version"] = soclab::kVersion;
  m["compiler"] = __VERSION__;
  m["cxx_standard"] = static_cast<long>(__cplusplus);
  m["seed"] = seed;
  m["config"] = config_echo;
  m["wall_time_seconds"] = wall;
  m["files"] = files;
  write_text(dir / "manifest.json", m.dump(2) + "\n");
}

soclab::ExperimentConfig load_config(const Common& c) {
  soclab::KeyValueConfig kv;
  if (!c.config.empty()) kv = soclab::KeyValueConfig::read_file(c.config);
  if (c.seed >= 0) kv.set("run.seed", std::to_string(c.seed));
  if (c.avalanches > 0) kv.set("run.avalanches", std::to_string(c.avalanches));
  return soclab::ExperimentConfig::from(kv);
}

soclab::ProgressFn progress_printer(const Common& c, const std::string& tag) {
  if (c.quiet) return {};
  return [tag](const soclab::Progress& p) {
    if (p.timesteps % (1 << 20) != 0) return;
    console.err(tag + ": " + p.phase + " t=" + std::to_string(p.timesteps) + " avalanches=" +
                std::to_string(p.avalanches) + "/" + std::to_string(p.target));
  };
}

std::vector<std::string> save_run(const fs::path& dir, const std::string& stem, soclab::RunResult& run,
                                  bool records) {
  run.summary.histogram_file = stem + "histogram.csv";
  write_histogram(dir / run.summary.histogram_file, run.histogram);
  write_text(dir / (stem + "summary.json"), soclab::summary_json(run.summary).dump(2) + "\n");
  write_text(dir / (stem + "config.cfg"), run.summary.config.echo());
  std::vector<std::string> files{stem + "histogram.csv", stem + "summary.json", stem + "config.cfg"};
  if (records) {
    std::ofstream f(dir / (stem + "avalanches.csv"), std::ios::binary);
    f << soclab::kAvalancheCsvHeader << '\n';
    for (const auto& r : run.records) soclab::write_csv_row(f, r);
    files.push_back(stem + "avalanches.csv");
  }
  return files;
}

std::vector<std::string> names(const std::vector<fs::path>& paths, const fs::path& dir) {
  std::vector<std::string> out;
  for (const auto& p : paths) out.push_back(fs::relative(p, dir).string());
  return out;
}

void warn(const std::string& msg) { console.err("warning: " + msg); }

// ---------------------------------------------------------------------------

int cmd_simulate(const Common& c, bool records) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto cfg = load_config(c);
  const auto dir = output_dir(c, "simulate-seed" + std::to_string(cfg.seed));
  prepare_output(dir, c.force);
  auto run = soclab::run_experiment(cfg, progress_printer(c, "simulate"));
  auto files = save_run(dir, "", run, records);
  const auto plots = soclab::emit_plot_data(dir / "plot", "density", {{"P_S", run.histogram, 1.0}}, warn);
  for (const auto& p : names(plots, dir)) files.push_back(p);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_manifest(dir, "simulate", cfg.echo(), cfg.seed, wall, files);
  const auto& s = run.summary;
  console.out("steady state at t=" + std::to_string(s.steady_state_at) + ", " + std::to_string(s.avalanches) +
              " avalanches, gamma=" + soclab::format_double(s.fit.gamma) +
              ", bandwidth=" + soclab::format_double(s.bandwidth_decades) + " decades");
  console.out("wrote " + dir.string());
  return kOk;
}

std::vector<std::int64_t> parse_h_list(const std::string& text) {
  std::vector<std::int64_t> hs;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    try {
      std::size_t used = 0;
      hs.push_back(std::stoll(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw Failure{kConfig, "config", "bad drive value '" + item + "' in --h"};
    }
  }
  return hs;
}

int cmd_sweep(const Common& c, const std::string& h_list) {
  const auto t0 = std::chrono::steady_clock::now();
  auto base = load_config(c);
  const auto hs = parse_h_list(h_list);
  const auto dir = output_dir(c, "sweep-seed" + std::to_string(base.seed));
  prepare_output(dir, c.force);
  const auto result = soclab::bandwidth_sweep(hs, base, c.jobs, [&](const std::string& m) {
    if (!c.quiet) console.err("sweep: " + m);
  });
  std::vector<std::string> files{"sweep.json", "sweep.csv", "base_config.cfg"};
  write_text(dir / "sweep.json", soclab::sweep_json(result).dump(2) + "\n");
  std::ostringstream csv;
  csv.precision(17);
  csv << "h_dt,regime,R_A_configured,fitted,bandwidth_decades,gamma,sigma\n";
  for (const auto& r : result.rows)
    csv << r.h_dt << ',' << soclab::to_string(r.regime) << ',' << r.ra_configured << ',' << (r.fitted ? 1 : 0)
        << ',' << r.bandwidth_decades << ',' << r.gamma << ',' << r.sigma << '\n';
  write_text(dir / "sweep.csv", csv.str());
  write_text(dir / "base_config.cfg", base.echo());
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_manifest(dir, "sweep", base.echo(), base.seed, wall, files);
  for (const auto& r : result.rows)
    console.out("h_dt=" + std::to_string(r.h_dt) + " regime=" + soclab::to_string(r.regime) +
                (r.fitted ? " bandwidth=" + soclab::format_double(r.bandwidth_decades) +
                                " gamma=" + soclab::format_double(r.gamma)
                          : " not fitted: " + r.error));
  if (result.bandwidth_non_increasing)
    console.out(std::string("bandwidth non-increasing: ") + (*result.bandwidth_non_increasing ? "yes" : "no"));
  console.out("wrote " + dir.string());
  return kOk;
}

std::vector<std::int64_t> read_sizes(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Failure{kRuntime, "io", "cannot open " + path};
  std::vector<std::int64_t> sizes;
  std::string line;
  int column = -1;  // -1: one size per line
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (first && line.find_first_not_of("0123456789 \t\r") != std::string::npos) {
      std::stringstream header(line);
      int k = 0;
      for (std::string name; std::getline(header, name, ','); ++k)
        if (name == "size_S") column = k;
      if (column < 0) throw soclab::DataError("no size_S column in " + path);
      first = false;
      continue;
    }
    first = false;
    std::string field = line;
    if (column >= 0) {
      std::stringstream row(line);
      for (int k = 0; k <= column; ++k) std::getline(row, field, ',');
    }
    try {
      const auto s = std::stoll(field);
      if (s > 0) sizes.push_back(s);
    } catch (const std::exception&) {
      throw soclab::DataError("malformed size '" + field + "' in " + path);
    }
  }
  return sizes;
}

int cmd_fit(const std::string& input, std::int64_t s_min, bool ks, std::int64_t s_max, int bins_per_decade) {
  if (s_min > 0 && ks) throw Failure{kConflict, "conflict", "--s-min and --ks are mutually exclusive"};
  const auto sizes = read_sizes(input);
  soclab::SMinPolicy policy = soclab::KSMinimize{};
  if (s_min > 0) policy = soclab::FixedMin{s_min};
  const double base = std::pow(10.0, 1.0 / bins_per_decade);
  const auto fit = soclab::fit_power_law(sizes, policy,
                                         s_max > 0 ? std::optional<std::int64_t>(s_max) : std::nullopt, base);
  const auto hist = soclab::build_histogram(sizes, base);
  const auto window = soclab::detect_power_law_window(hist, fit.gamma);
  json j;
  j["input"] = input;
  j["samples"] = sizes.size();
  j["fit"] = soclab::fit_json(fit);
  j["power_law_window"] = window.bins ? soclab::range_json(window.range) : json(nullptr);
  j["bandwidth_decades"] = window.bandwidth_decades();
  console.out(j.dump(2));
  return kOk;
}

soclab::LogHistogram read_histogram_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Failure{kRuntime, "io", "cannot open " + path};
  return soclab::read_histogram_csv(in);
}

std::optional<soclab::LogRange> parse_window(const std::string& text) {
  if (text.empty()) return std::nullopt;
  const auto colon = text.find(':');
  try {
    if (colon == std::string::npos) throw std::invalid_argument(text);
    soclab::LogRange r{std::stod(text.substr(0, colon)), std::stod(text.substr(colon + 1))};
    if (!r.valid()) throw std::invalid_argument(text);
    return r;
  } catch (const std::exception&) {
    throw Failure{kConfig, "config", "--window expects LO:HI in log10 S with LO < HI, got '" + text + "'"};
  }
}

int cmd_collapse(const Common& c, const std::string& ref, const std::string& test, double scale,
                 const std::string& window_text) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto window = parse_window(window_text);
  if (!(scale > 0.0)) throw Failure{kConfig, "config", "--scale must be positive"};
  const auto a = read_histogram_file(ref);
  const auto b = read_histogram_file(test);
  const auto report = soclab::rescale_and_compare(a, b, scale, window);
  json j;
  j["reference"] = ref;
  j["test"] = test;
  j["window"] = soclab::range_json(window);
  j["collapse"] = soclab::collapse_json(report);
  console.out(j.dump(2));
  if (!c.out.empty()) {
    const fs::path dir = c.out;
    prepare_output(dir, c.force);
    std::vector<std::string> files{"collapse.json"};
    write_text(dir / "collapse.json", j.dump(2) + "\n");
    const auto plots = soclab::emit_plot_data(dir / "plot", "rescaled", {{"reference", a, 1.0}, {"test", b, scale}}, warn);
    for (const auto& p : names(plots, dir)) files.push_back(p);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_manifest(dir, "collapse", "", 0, wall, files);
  }
  return kOk;
}

int cmd_pi_groups(const std::string& table_path) {
  const auto table = soclab::VariableTable::read_file(table_path);
  const auto groups = soclab::compute_pi_groups(table);
  console.out(std::to_string(table.size()) + " variables, rank " + std::to_string(soclab::dimension_rank(table)) +
              ", " + std::to_string(groups.size()) + " groups");
  for (std::size_t i = 0; i < groups.size(); ++i)
    console.out("Pi_" + std::to_string(i + 1) + " = " + groups[i].to_string());
  return kOk;
}

std::vector<std::string> emit_panels(const fs::path& dir, const std::string& ref_label, const soclab::RunResult& ref,
                                     const std::string& test_label, const soclab::RunResult& test, double scale) {
  std::vector<fs::path> paths;
  for (const auto& p : soclab::emit_plot_data(dir / "plot" / "raw", "raw",
                                              {{ref_label, ref.histogram, 1.0}, {test_label, test.histogram, 1.0}},
                                              warn))
    paths.push_back(p);
  for (const auto& p : soclab::emit_plot_data(
           dir / "plot" / "rescaled", "rescaled",
           {{ref_label, ref.histogram, 1.0}, {test_label + "_rescaled", test.histogram, scale}}, warn))
    paths.push_back(p);
  return names(paths, dir);
}

std::uint64_t figure_seed(const Common& c) { return c.seed >= 0 ? static_cast<std::uint64_t>(c.seed) : 1; }
std::int64_t figure_avalanches(const Common& c) { return c.avalanches > 0 ? c.avalanches : 1'000'000; }

int cmd_figure1(const Common& c) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto seed = figure_seed(c);
  const auto dir = output_dir(c, "figure1-seed" + std::to_string(seed));
  prepare_output(dir, c.force);
  auto f = soclab::figure1_experiment(seed, figure_avalanches(c), progress_printer(c, "figure1"));
  auto files = save_run(dir, "h4_", f.low, false);
  for (const auto& p : save_run(dir, "h16_", f.high, false)) files.push_back(p);
  write_text(dir / "collapse.json", soclab::figure1_json(f).dump(2) + "\n");
  files.push_back("collapse.json");
  for (const auto& p : emit_panels(dir, "h4", f.low, "h16", f.high, f.scale)) files.push_back(p);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_manifest(dir, "figure1", f.low.summary.config.echo() + "\n" + f.high.summary.config.echo(), seed, wall, files);
  if (f.rescaled && f.raw)
    console.out("collapse distance S/16: " + soclab::format_double(f.rescaled->distance) +
                ", unscaled: " + soclab::format_double(f.raw->distance));
  console.out("wrote " + dir.string());
  return kOk;
}

int cmd_figure2(const Common& c) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto seed = figure_seed(c);
  const auto dir = output_dir(c, "figure2-seed" + std::to_string(seed));
  prepare_output(dir, c.force);
  auto f = soclab::figure2_experiment(seed, figure_avalanches(c), progress_printer(c, "figure2"));
  auto files = save_run(dir, "L100_h4_", f.small, false);
  for (const auto& p : save_run(dir, "L400_h16_", f.large, false)) files.push_back(p);
  write_text(dir / "collapse.json", soclab::figure2_json(f).dump(2) + "\n");
  files.push_back("collapse.json");
  for (const auto& p : emit_panels(dir, "L100_h4", f.small, "L400_h16", f.large, f.scale)) files.push_back(p);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_manifest(dir, "figure2", f.small.summary.config.echo() + "\n" + f.large.summary.config.echo(), seed, wall,
                 files);
  if (f.excluded && f.included)
    console.out("collapse distance without top decade: " + soclab::format_double(f.excluded->distance) +
                ", with top decade: " + soclab::format_double(f.included->distance));
  console.out("wrote " + dir.string());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sandpile avalanche laboratory"};
  app.footer(kExitCodeHelp);
  app.require_subcommand(1);
  app.set_version_flag("--version", soclab::kVersion);

  Common common;
  const auto add_run_flags = [&](CLI::App* sub, bool with_config) {
    if (with_config) sub->add_option("--config", common.config, "experiment config (key = value with sections)");
    sub->add_option("--out", common.out, "output directory (default: $SOCLAB_OUT_ROOT/<command>-seed<N>)");
    sub->add_option("--seed", common.seed, "RNG seed override")->check(CLI::NonNegativeNumber);
    sub->add_option("--avalanches", common.avalanches, "post-transient avalanche count override")
        ->check(CLI::PositiveNumber);
    sub->add_flag("--force", common.force, "write into an existing output directory");
    sub->add_flag("--quiet", common.quiet, "suppress progress messages");
  };

  auto* simulate = app.add_subcommand("simulate", "run one driven sandpile experiment");
  add_run_flags(simulate, true);
  bool records = false;
  simulate->add_flag("--records", records, "also write every avalanche record to avalanches.csv");

  auto* sweep = app.add_subcommand("sweep", "drive-rate sweep of the power-law bandwidth");
  add_run_flags(sweep, true);
  std::string h_list = "4,16,64,256";
  sweep->add_option("--drives", h_list, "comma-separated grains per drive event")->capture_default_str();
  sweep->add_option("--jobs", common.jobs, "parallel workers")->check(CLI::PositiveNumber);

  auto* fit = app.add_subcommand("fit", "maximum-likelihood power-law fit of avalanche sizes");
  std::string fit_input;
  std::int64_t s_min = 0, s_max = 0;
  bool ks = false;
  int bins_per_decade = 10;
  fit->add_option("--input", fit_input, "avalanches.csv or one size per line")->required();
  fit->add_option("--s-min", s_min, "fixed lower cutoff")->check(CLI::PositiveNumber);
  fit->add_flag("--ks", ks, "choose the lower cutoff by minimum KS distance (default)");
  fit->add_option("--s-max", s_max, "upper cutoff (default: largest size)")->check(CLI::PositiveNumber);
  fit->add_option("--bins-per-decade", bins_per_decade, "log-binning resolution")->capture_default_str()->check(CLI::PositiveNumber);

  auto* collapse = app.add_subcommand("collapse", "rescale one histogram and compare with another");
  std::string ref_path, test_path, window_text;
  double scale = 16.0;
  collapse->add_option("--ref", ref_path, "reference histogram CSV")->required();
  collapse->add_option("--test", test_path, "histogram CSV rescaled by S -> S/scale")->required();
  collapse->add_option("--scale", scale, "rescale factor A")->capture_default_str();
  collapse->add_option("--window", window_text, "comparison window LO:HI in log10 S");
  collapse->add_option("--out", common.out, "also write collapse.json and plot files here");
  collapse->add_flag("--force", common.force, "write into an existing output directory");

  auto* pi = app.add_subcommand("pi-groups", "dimensionless groups of a variable table");
  std::string table_path;
  pi->add_option("--table", table_path, "variable table (name | dimension | description)")->required();

  auto* fig1 = app.add_subcommand("figure1", "h_dt = 4 vs 16 at L = 100, collapse under S -> S/16");
  add_run_flags(fig1, false);
  auto* fig2 = app.add_subcommand("figure2", "(L = 100, h_dt = 4) vs (L = 400, h_dt = 16) under S -> S/16");
  add_run_flags(fig2, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    console.err("error: code=" + std::to_string(kUsage) + " kind=usage message=\"" + escape(e.what()) + "\"");
    return kUsage;
  }

  try {
    if (*simulate) return cmd_simulate(common, records);
    if (*sweep) return cmd_sweep(common, h_list);
    if (*fit) return cmd_fit(fit_input, s_min, ks, s_max, bins_per_decade);
    if (*collapse) return cmd_collapse(common, ref_path, test_path, scale, window_text);
    if (*pi) return cmd_pi_groups(table_path);
    if (*fig1) return cmd_figure1(common);
    if (*fig2) return cmd_figure2(common);
  } catch (const Failure& f) {
    console.err("error: code=" + std::to_string(f.code) + " kind=" + f.kind + " message=\"" + escape(f.message) +
                "\"");
    return f.code;
  } catch (const soclab::ConfigError& e) {
    console.err("error: code=3 kind=config message=\"" + escape(e.what()) + "\"");
    return kConfig;
  } catch (const soclab::TableError& e) {
    console.err("error: code=8 kind=table message=\"" + escape(e.what()) + "\"");
    return kTable;
  } catch (const soclab::DataError& e) {
    console.err("error: code=7 kind=data message=\"" + escape(e.what()) + "\"");
    return kData;
  } catch (const soclab::TransientError& e) {
    console.err("error: code=6 kind=transient message=\"" + escape(e.what()) + "\"");
    return kRuntime;
  } catch (const std::exception& e) {
    console.err("error: code=6 kind=runtime message=\"" + escape(e.what()) + "\"");
    return kRuntime;
  }
  return kUsage;
}
