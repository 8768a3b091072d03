// Copyright 2026 The mpe-bpsk Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Batch front end. Settings are layered: built-in defaults, then the preset,
// then the JSON config file, then command-line flags.

#include "mpe/selection.hpp"
#include "mpe/sim.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <Eigen/Core>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace mpe::cli {

using json = nlohmann::json;

inline constexpr const char* kVersion = "1.0.0";

enum class Verbosity { quiet = 0, info = 1, debug = 2 };

inline Verbosity verbosity_from_string(const std::string& s) {
  if (s == "quiet" || s == "0") return Verbosity::quiet;
  if (s == "info" || s == "1") return Verbosity::info;
  if (s == "debug" || s == "2") return Verbosity::debug;
  throw ConfigError("log: expected quiet|info|debug, got '" + s + "'");
}

// Selection-count sweep used by the fig4 preset.
struct SelectionSweep {
  std::vector<int> antennas{2, 4, 6};
  std::vector<int> pool_sizes{10, 20, 50, 100, 200, 500, 1000, 10000};
  int realizations = 1000;
  double epsilon_sus = 0.35;
  std::optional<double> alpha;
  std::uint64_t seed = 1;
};

struct CliConfig {
  std::string preset = "custom";
  CampaignSpec spec;
  SelectionSweep sweep;  // fig4 only
  std::string out_dir = "mpe_out";
  Verbosity verbosity = Verbosity::info;
};

// ---------------------------------------------------------------------------
// Presets ("bits" counts symbol rows per realization; each row carries K bits)
//
//   name    M  K   K_T  selection  SNR grid (dB)     realizations  bits  methods
//   fig2    3  3   -    none       -5:2.5:20         200           167   mslnr zf mmse mpe_ml mpe_joint
//   fig3    3  3   -    none       -5:2.5:20         100           167   mpe_ml mpe_joint
//   fig4    2,4,6  10..10^4 gus sus  -               1000          -     (selection only)
//   fig5    2  -   50   gus sus    0:2.5:30          100           500   mslnr zf mmse mpe_ml mpe_joint
//   fig6    as fig5; the data file holds expected throughput for l = 100, 500
//   custom  3  3   -    none       0                 1             500   mpe_joint
// ---------------------------------------------------------------------------

inline std::vector<double> snr_range(double start, double step, double stop) {
  if (!(step > 0.0)) throw ConfigError("snr: step must be > 0");
  if (stop < start) throw ConfigError("snr: stop must be >= start");
  std::vector<double> v;
  const auto n = static_cast<long>(std::floor((stop - start) / step + 1e-9));
  for (long i = 0; i <= n; ++i) v.push_back(start + static_cast<double>(i) * step);
  return v;
}

inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"fig2", "fig3", "fig4", "fig5", "fig6", "custom"};
  return names;
}

inline CliConfig preset(const std::string& name) {
  CliConfig c;
  c.preset = name;
  CampaignSpec& s = c.spec;
  const std::vector<Method> all{Method::mslnr, Method::zf, Method::mmse, Method::mpe_ml, Method::mpe_joint};
  if (name == "fig2" || name == "fig3") {
    s.M = 3;
    s.K = 3;
    s.snr_db = snr_range(-5.0, 2.5, 20.0);
    s.realizations = name == "fig2" ? 200 : 100;
    s.bits_per_realization = 167;  // 200 * 3 * 167 > 1e5 bits per cell
    s.methods = name == "fig2" ? all : std::vector<Method>{Method::mpe_ml, Method::mpe_joint};
  } else if (name == "fig4") {
    s.M = 2;
    s.K_T = 10;
    s.selections = {Selection::gus, Selection::sus};
  } else if (name == "fig5" || name == "fig6") {
    s.M = 2;
    s.K_T = 50;
    s.selections = {Selection::gus, Selection::sus};
    s.snr_db = snr_range(0.0, 2.5, 30.0);
    s.realizations = 100;
    s.methods = all;
  } else if (name != "custom") {
    throw ConfigError("preset: unknown preset '" + name + "'");
  }
  return c;
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

// "start:step:stop" or a comma-separated list.
inline std::vector<double> parse_snr(const std::string& text) {
  auto num = [](const std::string& t) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(t, &used);
    } catch (const std::exception&) {
      throw ConfigError("snr: malformed number '" + t + "'");
    }
    if (used != t.size() || !std::isfinite(v)) throw ConfigError("snr: malformed number '" + t + "'");
    return v;
  };
  if (text.find(':') != std::string::npos) {
    std::vector<std::string> p;
    std::stringstream ss(text);
    for (std::string t; std::getline(ss, t, ':');) p.push_back(t);
    if (p.size() != 3) throw ConfigError("snr: range must be start:step:stop");
    return snr_range(num(p[0]), num(p[1]), num(p[2]));
  }
  std::vector<double> v;
  std::stringstream ss(text);
  for (std::string t; std::getline(ss, t, ',');) v.push_back(num(t));
  if (v.empty()) throw ConfigError("snr: empty grid");
  return v;
}

namespace detail {

inline const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys{"preset", "seed",  "out",        "workers",     "snr",          "realizations",
                                          "m",      "k",     "kt",         "alpha",       "epsilon_sus",  "frame_len",
                                          "bits",   "methods", "selections", "pe_threshold", "max_outer", "log"};
  return keys;
}

// Keys that define the system and therefore clash with a fixed preset.
inline const std::set<std::string>& custom_only_keys() {
  static const std::set<std::string> keys{"m", "k", "kt", "methods", "selections"};
  return keys;
}

template <class T>
T get_as(const json& j, const std::string& key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(key + ": malformed value " + j.at(key).dump());
  }
}

inline int get_count(const json& j, const std::string& key, int min) {
  if (!j.at(key).is_number_integer()) throw ConfigError(key + ": expected an integer, got " + j.at(key).dump());
  const auto v = j.at(key).get<long long>();
  if (v < min || v > std::numeric_limits<int>::max()) throw ConfigError(key + ": must be >= " + std::to_string(min));
  return static_cast<int>(v);
}

}  // namespace detail

// `file` holds config-file settings, `flags` the command-line ones; a key in
// `flags` replaces the same key in `file`.
inline CliConfig parse_config(const json& file, const json& flags = json::object()) {
  if (!file.is_object()) throw ConfigError("config: top level must be a JSON object");
  json merged = file;
  for (auto it = flags.begin(); it != flags.end(); ++it) merged[it.key()] = it.value();
  for (auto it = merged.begin(); it != merged.end(); ++it)
    if (!detail::known_keys().contains(it.key())) throw ConfigError("config: unknown key '" + it.key() + "'");

  const std::string name = merged.contains("preset") ? detail::get_as<std::string>(merged, "preset") : "custom";
  CliConfig c = preset(name);
  if (name != "custom")
    for (const auto& k : detail::custom_only_keys())
      if (merged.contains(k)) throw ConfigError(k + ": conflicts with preset '" + name + "' (use preset custom)");

  CampaignSpec& s = c.spec;
  if (merged.contains("seed")) {
    if (!merged["seed"].is_number_unsigned() && !(merged["seed"].is_number_integer() && merged["seed"].get<long long>() >= 0))
      throw ConfigError("seed: expected a nonnegative integer, got " + merged["seed"].dump());
    s.seed = merged["seed"].get<std::uint64_t>();
  }
  if (merged.contains("out")) c.out_dir = detail::get_as<std::string>(merged, "out");
  if (merged.contains("workers")) s.workers = detail::get_count(merged, "workers", 1);
  if (merged.contains("snr")) {
    const json& v = merged["snr"];
    if (v.is_string()) {
      s.snr_db = parse_snr(v.get<std::string>());
    } else if (v.is_array()) {
      s.snr_db.clear();
      for (const auto& x : v) {
        if (!x.is_number()) throw ConfigError("snr: malformed value " + v.dump());
        s.snr_db.push_back(x.get<double>());
      }
      if (s.snr_db.empty()) throw ConfigError("snr: empty grid");
    } else {
      throw ConfigError("snr: malformed value " + v.dump());
    }
  }
  if (merged.contains("realizations")) s.realizations = detail::get_count(merged, "realizations", 1);
  if (merged.contains("m")) s.M = detail::get_count(merged, "m", 1);
  if (merged.contains("k")) s.K = detail::get_count(merged, "k", 1);
  if (merged.contains("kt")) s.K_T = detail::get_count(merged, "kt", 1);
  if (merged.contains("alpha")) {
    const double a = detail::get_as<double>(merged, "alpha");
    if (!(a > 0.0 && a <= 1.0)) throw ConfigError("alpha: must lie in (0, 1]");
    s.alpha = a;
  }
  if (merged.contains("epsilon_sus")) s.epsilon_sus = detail::get_as<double>(merged, "epsilon_sus");
  if (merged.contains("frame_len")) s.frame_len = detail::get_count(merged, "frame_len", 1);
  if (merged.contains("bits")) s.bits_per_realization = static_cast<std::uint64_t>(detail::get_count(merged, "bits", 1));
  if (merged.contains("methods")) {
    s.methods.clear();
    for (const auto& m : detail::get_as<std::vector<std::string>>(merged, "methods")) s.methods.push_back(method_from_string(m));
  }
  if (merged.contains("selections")) {
    s.selections.clear();
    for (const auto& m : detail::get_as<std::vector<std::string>>(merged, "selections"))
      s.selections.push_back(selection_from_string(m));
  } else if (name == "custom" && merged.contains("kt")) {
    s.selections = {Selection::gus, Selection::sus};
  }
  if (merged.contains("pe_threshold")) {
    s.mpe.pe_threshold = detail::get_as<double>(merged, "pe_threshold");
    if (!(s.mpe.pe_threshold > 0.0)) throw ConfigError("pe_threshold: must be > 0");
  }
  if (merged.contains("max_outer")) s.mpe.max_outer = detail::get_count(merged, "max_outer", 1);
  if (merged.contains("log")) c.verbosity = verbosity_from_string(detail::get_as<std::string>(merged, "log"));

  c.sweep.seed = s.seed;
  c.sweep.epsilon_sus = s.epsilon_sus;
  c.sweep.alpha = s.alpha;
  if (merged.contains("realizations")) c.sweep.realizations = s.realizations;

  if (name != "fig4") {
    try {
      s.validate();
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("config: ") + e.what());
    }
  }
  return c;
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config: '" + path + "' is not valid JSON: " + e.what());
  }
}

// Parses argv. Returns nullopt after --help/--version (text already printed).
inline std::optional<CliConfig> parse_command_line(int argc, const char* const* argv, std::ostream& out = std::cout) {
  CLI::App app{"Monte Carlo driver for minimum-error-probability BPSK precoding and user selection"};
  app.set_version_flag("--version", kVersion);
  std::string preset_name, config_path, out_dir, snr, alpha, epsilon_sus;
  std::uint64_t seed = 0;
  int workers = 0, realizations = 0, m = 0, k = 0, kt = 0, frame_len = 0;
  app.add_option("--preset", preset_name, "fig2 | fig3 | fig4 | fig5 | fig6 | custom (default custom)")
      ->check(CLI::IsMember(preset_names()));
  app.add_option("--config", config_path, "JSON file with the same keys as the flags (plus bits, methods, selections, "
                                         "pe_threshold, max_outer, log)");
  app.add_option("--seed", seed, "root seed (default 1)");
  app.add_option("--out", out_dir, "output directory (default mpe_out)");
  app.add_option("--workers", workers, "parallel realizations (default 1)")->check(CLI::PositiveNumber);
  app.add_option("--snr", snr, "SNR grid in dB: start:step:stop or a comma list; SNR = 10 log10(tau / sigma_z^2)");
  app.add_option("--realizations", realizations, "channel realizations")->check(CLI::PositiveNumber);
  app.add_option("--m", m, "transmit antennas (custom preset)")->check(CLI::PositiveNumber);
  app.add_option("--k", k, "users without selection (custom preset)")->check(CLI::PositiveNumber);
  app.add_option("--kt", kt, "user pool size for GUS/SUS (custom preset)")->check(CLI::PositiveNumber);
  app.add_option("--alpha", alpha, "fixed GUS alpha (default (K-1)/K)");
  app.add_option("--epsilon-sus", epsilon_sus, "SUS orthogonality threshold (default 0.35)");
  app.add_option("--frame-len", frame_len, "extra frame length for the throughput data file (default 100)")
      ->check(CLI::PositiveNumber);
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return std::nullopt;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << '\n';
    return std::nullopt;
  } catch (const CLI::ParseError& e) {
    throw ConfigError(e.what());
  }

  json flags = json::object();
  auto given = [&](const char* opt) { return app.count(opt) > 0; };
  auto as_double = [](const std::string& key, const std::string& v) {
    try {
      std::size_t used = 0;
      const double d = std::stod(v, &used);
      if (used == v.size()) return d;
    } catch (const std::exception&) {
    }
    throw ConfigError(key + ": malformed value '" + v + "'");
  };
  if (given("--preset")) flags["preset"] = preset_name;
  if (given("--seed")) flags["seed"] = seed;
  if (given("--out")) flags["out"] = out_dir;
  if (given("--workers")) flags["workers"] = workers;
  if (given("--snr")) flags["snr"] = snr;
  if (given("--realizations")) flags["realizations"] = realizations;
  if (given("--m")) flags["m"] = m;
  if (given("--k")) flags["k"] = k;
  if (given("--kt")) flags["kt"] = kt;
  if (given("--alpha")) flags["alpha"] = as_double("alpha", alpha);
  if (given("--epsilon-sus")) flags["epsilon_sus"] = as_double("epsilon_sus", epsilon_sus);
  if (given("--frame-len")) flags["frame_len"] = frame_len;
  if (const char* env = std::getenv("MPE_LOG"); env && *env) flags["log"] = std::string(env);

  const json file = config_path.empty() ? json::object() : read_json_file(config_path);
  return parse_config(file, flags);
}

// ---------------------------------------------------------------------------
// Running
// ---------------------------------------------------------------------------

struct SweepRow {
  int M = 0;
  int K_T = 0;
  double gus_mean = 0.0;
  double sus_mean = 0.0;
  int gus_mode = 0;
};

inline std::vector<SweepRow> run_selection_sweep(const SelectionSweep& sw) {
  std::vector<SweepRow> rows;
  for (int m : sw.antennas)
    for (int kt : sw.pool_sizes) {
      SweepRow row{m, kt};
      std::map<std::size_t, int> hist;
      GusOptions go;
      go.alpha = sw.alpha;
      for (int r = 0; r < sw.realizations; ++r) {
        const auto ch = generate_channels(
            derive_seed(sw.seed, {static_cast<std::uint64_t>(m), static_cast<std::uint64_t>(kt), static_cast<std::uint64_t>(r)}),
            kt, m);
        const auto g = gus(ch, go).selected.size();
        ++hist[g];
        row.gus_mean += static_cast<double>(g);
        row.sus_mean += static_cast<double>(sus(ch, sw.epsilon_sus).selected.size());
      }
      row.gus_mean /= sw.realizations;
      row.sus_mean /= sw.realizations;
      int best = -1;
      for (const auto& [n, cnt] : hist)
        if (cnt > best) {
          best = cnt;
          row.gus_mode = static_cast<int>(n);
        }
      rows.push_back(row);
    }
  return rows;
}

namespace detail {

inline json spec_to_json(const CliConfig& c) {
  const CampaignSpec& s = c.spec;
  json j;
  j["preset"] = c.preset;
  j["seed"] = s.seed;
  if (c.preset == "fig4") {
    j["antennas"] = c.sweep.antennas;
    j["pool_sizes"] = c.sweep.pool_sizes;
    j["realizations"] = c.sweep.realizations;
    j["epsilon_sus"] = c.sweep.epsilon_sus;
    j["alpha"] = c.sweep.alpha ? json(*c.sweep.alpha) : json("(K-1)/K");
    return j;
  }
  j["m"] = s.M;
  j["k"] = s.K;
  j["kt"] = s.K_T;
  j["snr_db"] = s.snr_db;
  j["realizations"] = s.realizations;
  j["bits"] = s.bits_per_realization;
  j["frame_len"] = s.frame_len;
  j["tau"] = s.tau;
  j["epsilon_sus"] = s.epsilon_sus;
  j["alpha"] = s.alpha ? json(*s.alpha) : json("(K-1)/K");
  j["pe_threshold"] = s.mpe.pe_threshold;
  j["max_outer"] = s.mpe.max_outer;
  std::vector<std::string> m, sel;
  for (Method x : s.methods) m.push_back(to_string(x));
  for (Selection x : s.selections) sel.push_back(to_string(x));
  j["methods"] = m;
  j["selections"] = sel;
  return j;
}

inline std::vector<std::string> series_labels(const CampaignResult& r) {
  std::vector<std::string> out;
  for (const auto& c : r.cells)
    if (std::find(out.begin(), out.end(), c.label) == out.end()) out.push_back(c.label);
  return out;
}

// Whitespace-separated table: one row per SNR, one column per series.
template <class F>
void write_series_table(std::ostream& os, const CampaignResult& r, const std::string& what, F value) {
  const auto labels = series_labels(r);
  os << "# " << what << "\n# snr_db";
  for (const auto& l : labels) os << ' ' << l;
  os << '\n' << std::setprecision(10);
  for (double snr : r.spec.snr_db) {
    os << snr;
    for (const auto& l : labels) {
      const CellResult* c = r.find(l, snr);
      if (c && c->ok > 0) os << ' ' << value(*c);
      else os << " nan";
    }
    os << '\n';
  }
}

inline void write_figure_data(const std::filesystem::path& dir, const CliConfig& c, const CampaignResult& r) {
  const std::string fig = c.preset == "custom" ? "custom" : c.preset;
  std::ofstream os(dir / (fig + ".dat"));
  if (c.preset == "fig3") {
    write_series_table(os, r, "mean outer iterations", [](const CellResult& x) { return x.mean_iters(); });
  } else if (c.preset == "fig5") {
    write_series_table(os, r, "evaluated error probability", [](const CellResult& x) { return x.pe_theory(); });
  } else if (c.preset == "fig6") {
    const int l = c.spec.frame_len;
    for (int len : std::set<int>{100, 500, l}) {
      write_series_table(os, r, "expected throughput, frame length " + std::to_string(len),
                         [len](const CellResult& x) { return x.throughput(len); });
      os << "\n\n";
    }
  } else {
    write_series_table(os, r, "measured BER", [](const CellResult& x) { return x.ber(); });
    os << "\n\n";
    write_series_table(os, r, "evaluated error probability", [](const CellResult& x) { return x.pe_theory(); });
  }
  if (!os) throw Error("cannot write figure data in '" + dir.string() + "'");
}

inline void print_summary(std::ostream& os, const CampaignResult& r) {
  os << std::left << std::setw(20) << "series" << std::setw(9) << "snr_db" << std::setw(14) << "ber" << std::setw(14)
     << "pe_theory" << std::setw(10) << "iters" << "users\n";
  for (const auto& c : r.cells) {
    if (c.ok == 0) continue;
    os << std::setw(20) << c.label << std::setw(9) << c.snr_db << std::setw(14) << c.ber() << std::setw(14)
       << c.pe_theory() << std::setw(10) << c.mean_iters() << c.mean_selected() << '\n';
  }
  os << std::right;
}

}  // namespace detail

// Runs the configured experiment and writes its artifacts into out_dir.
// Returns the process exit status.
inline int run(const CliConfig& c, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  namespace fs = std::filesystem;
  const fs::path dir(c.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    err << "error: cannot create output directory '" << c.out_dir << "'\n";
    return 2;
  }
  auto open = [&](const char* name) {
    std::ofstream f(dir / name);
    if (!f) throw Error("cannot write '" + (dir / name).string() + "'");
    return f;
  };

  json manifest;
  manifest["tool"] = "mpe_sim";
  manifest["version"] = kVersion;
  manifest["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                      std::to_string(EIGEN_MINOR_VERSION);
  manifest["spec"] = detail::spec_to_json(c);
  std::vector<std::string> outputs;

  try {
    if (c.preset == "fig4") {
      const auto rows = run_selection_sweep(c.sweep);
      auto f = open("fig4.dat");
      f << "# M K_T gus_mean sus_mean gus_mode\n" << std::setprecision(10);
      for (const auto& r : rows) f << r.M << ' ' << r.K_T << ' ' << r.gus_mean << ' ' << r.sus_mean << ' ' << r.gus_mode << '\n';
      outputs.push_back("fig4.dat");
      if (c.verbosity != Verbosity::quiet) {
        out << "M    K_T    gus_mean  sus_mean  gus_mode\n";
        for (const auto& r : rows)
          out << std::setw(2) << r.M << std::setw(8) << r.K_T << std::setw(10) << r.gus_mean << std::setw(10) << r.sus_mean
              << std::setw(10) << r.gus_mode << '\n';
      }
    } else {
      const CampaignResult res = run_campaign(c.spec);
      {
        auto f = open("results.csv");
        write_results_csv(f, res);
      }
      outputs.push_back("results.csv");
      if (!res.selections.empty()) {
        auto f = open("selections.csv");
        write_selections_csv(f, res);
        outputs.push_back("selections.csv");
      }
      detail::write_figure_data(dir, c, res);
      outputs.push_back((c.preset == "custom" ? std::string("custom") : c.preset) + ".dat");
      manifest["failures"] = res.failures.size();
      if (c.verbosity == Verbosity::debug)
        for (const auto& f : res.failures) err << "warning: " << f << '\n';
      else if (!res.failures.empty() && c.verbosity != Verbosity::quiet)
        err << "warning: " << res.failures.size() << " solver failures (MPE_LOG=debug lists them)\n";
      if (c.verbosity != Verbosity::quiet) detail::print_summary(out, res);
    }
    manifest["outputs"] = outputs;
    auto f = open("manifest.json");
    f << manifest.dump(2) << '\n';
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace mpe::cli
