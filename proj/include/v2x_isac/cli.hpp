#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "v2x_isac/analytic.hpp"
#include "v2x_isac/config.hpp"
#include "v2x_isac/engines.hpp"
#include "v2x_isac/fitting.hpp"
#include "v2x_isac/metrics.hpp"
#include "v2x_isac/sample_io.hpp"
#include "v2x_isac/scene.hpp"

namespace v2x_isac::cli {

enum ExitCode : int { kOk = 0, kUsage = 2, kConfig = 3, kIo = 4, kNumeric = 5 };

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// File helpers.

inline std::ofstream open_output(const fs::path& path) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write '" + path.string() + "'");
  return f;
}

inline void close_output(std::ofstream& f, const fs::path& path) {
  f.flush();
  if (!f) throw IoError("write failed for '" + path.string() + "'");
}

template <class Writer>
void write_file(const fs::path& path, Writer&& w) {
  auto f = open_output(path);
  w(f);
  close_output(f, path);
}

inline std::ifstream open_input(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read '" + path.string() + "'");
  return f;
}

/// Resolved configuration as JSON with a provenance block.
inline nlohmann::json config_document(const SimulationConfig& cfg, std::uint64_t seed,
                                      const nlohmann::json& extra = nlohmann::json::object()) {
  nlohmann::json doc = config_to_json(cfg);
  nlohmann::json m{{"digest", config_digest(cfg)}, {"seed", seed}, {"tool", std::string("v2x-isac/") + kToolVersion}};
  for (auto it = extra.begin(); it != extra.end(); ++it) m[it.key()] = it.value();
  doc["manifest"] = m;
  return doc;
}

inline void write_json(const fs::path& path, const nlohmann::json& j) {
  write_file(path, [&](std::ostream& os) { os << j.dump(2) << '\n'; });
}

inline SimulationConfig load_or_default(const std::string& path) {
  if (path.empty()) return default_config();
  try {
    return load_config(path);
  } catch (const std::ios_base::failure& e) {
    throw IoError(e.what());
  }
}

inline void write_manifest(const fs::path& dir, const RunManifest& m, const nlohmann::json& extra = {}) {
  nlohmann::json j = manifest_to_json(m);
  if (extra.is_object()) {
    for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
  }
  write_json(dir / "manifest.json", j);
}

// ---------------------------------------------------------------------------
// Shared batch options.

struct BatchOptions {
  std::string config;
  std::uint64_t seed = 1;
  std::size_t n = 0;
  std::string out;
  unsigned threads = 0;
};

inline void add_batch_options(CLI::App* cmd, BatchOptions& o, bool need_n) {
  cmd->add_option("--config", o.config, "Configuration JSON (defaults built in when omitted)");
  cmd->add_option("--seed", o.seed, "Master seed")->capture_default_str();
  auto* n = cmd->add_option("--n", o.n, "Number of realizations");
  if (need_n) n->required();
  cmd->add_option("--out", o.out, "Output directory")->required();
  cmd->add_option("--threads", o.threads, "Worker threads (default: V2X_ISAC_THREADS or hardware)");
}

inline unsigned resolve_threads(const BatchOptions& o) { return o.threads > 0 ? o.threads : default_thread_count(); }

inline void require_n(const BatchOptions& o) {
  if (o.n < 1) throw UsageError("--n must be at least 1");
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateOptions {
  BatchOptions batch;
  std::string engine;
  std::size_t dump_paths = 0;
};

inline std::string sample_file_stem(EngineKind e) { return std::string("samples_") + to_string(e); }

inline int cmd_simulate(const SimulateOptions& o, std::ostream& out) {
  require_n(o.batch);
  const EngineKind engine = parse_engine(o.engine);
  const SimulationConfig cfg = load_or_default(o.batch.config);
  const fs::path dir = o.batch.out;
  std::vector<RtRealization> details;
  const SampleSet set =
      run_batch(engine, cfg, o.batch.n, o.batch.seed, resolve_threads(o.batch), engine == EngineKind::kRt ? &details : nullptr);
  const std::string digest = set.config_digest;

  write_file(dir / (sample_file_stem(engine) + ".csv"), [&](std::ostream& os) { write_samples_csv(os, set); });
  write_file(dir / (sample_file_stem(engine) + ".bin"), [&](std::ostream& os) { write_samples_binary(os, set); });
  write_json(dir / "config.json", config_document(cfg, o.batch.seed));

  if (engine == EngineKind::kRt) {
    std::vector<LinkObservation> obs;
    std::vector<DensityRow> dens;
    for (std::size_t i = 0; i < details.size(); ++i) {
      obs.insert(obs.end(), details[i].observations.begin(), details[i].observations.end());
      dens.push_back({i, "same_lane", details[i].same_lane_vehicles});
      dens.push_back({i, "interferer", details[i].interferers});
      dens.push_back({i, "rsu", details[i].rsus});
    }
    write_file(dir / "observations.csv",
               [&](std::ostream& os) { write_observations_csv(os, digest, o.batch.seed, obs); });
    write_file(dir / "densities.csv", [&](std::ostream& os) { write_densities_csv(os, digest, o.batch.seed, dens); });
    if (o.dump_paths > 0) {
      std::vector<std::pair<std::uint64_t, std::vector<std::pair<std::string, PathSet>>>> traces;
      for (std::size_t i = 0; i < std::min(o.dump_paths, o.batch.n); ++i) {
        RtRealization r = run_rt_realization(cfg, Rng::substream(o.batch.seed, i), true);
        std::vector<std::pair<std::string, PathSet>> sets;
        for (std::size_t k = 0; k < r.traces.size(); ++k) sets.emplace_back(to_string(r.trace_kinds[k]), r.traces[k]);
        traces.emplace_back(i, std::move(sets));
      }
      write_file(dir / "paths.csv", [&](std::ostream& os) { write_paths_csv(os, digest, o.batch.seed, traces); });
    }
  }
  RunManifest m{o.batch.config.empty() ? "<default>" : o.batch.config, digest, o.batch.seed, {o.engine}, {o.batch.n},
                dir.string()};
  write_manifest(dir, m);
  out << "simulated " << o.batch.n << " " << o.engine << " realizations into " << dir.string() << " (digest "
      << digest << ")\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// fit

struct FitOptions {
  std::string in;
  std::string out;
  std::string config;
};

inline std::string fmt_row(const std::string& link, const std::string& model, const std::optional<FitResult>& f) {
  std::ostringstream os;
  os << std::left << std::setw(14) << link << std::setw(7) << model;
  if (!f) {
    os << "---";
  } else {
    os << std::right << std::fixed << std::setprecision(4) << std::setw(10) << f->alpha_hat << std::setw(12)
       << f->beta_hat_db << std::setw(10) << f->rms_db << std::setw(10) << f->n << std::setw(10)
       << f->n_zero_excluded;
  }
  return os.str();
}

inline void write_fit_report(std::ostream& os, const FitReport& rep, const std::string& digest) {
  os << manifest_header(digest, 0) << '\n';
  os << "path loss: 10 log10(P_ref / S) = beta_dB + alpha * 10 log10(r)\n";
  os << std::left << std::setw(14) << "link" << std::setw(7) << "model" << std::right << std::setw(10) << "alpha"
     << std::setw(12) << "beta_dB" << std::setw(10) << "rms_dB" << std::setw(10) << "n" << std::setw(10)
     << "zero_pwr" << '\n';
  for (const auto* l : {&rep.radar, &rep.comm, &rep.interference}) {
    const std::string name = to_string(l->kind);
    os << fmt_row(name, "mixed", l->fits.mixed) << '\n';
    os << fmt_row(name, "los", l->fits.los) << '\n';
    os << fmt_row(name, "nlos", l->fits.nlos) << '\n';
  }
  os << std::fixed << std::setprecision(4);
  for (const auto* l : {&rep.comm, &rep.interference}) {
    os << "los model " << to_string(l->kind) << ": d1_m=" << l->d1;
    if (l->d2) {
      os << " d2_m=" << l->d2->d2_hat << (l->d2->at_boundary ? " (at bracket edge)" : "");
    } else {
      os << " d2_m=---";
    }
    os << '\n';
  }
  for (const auto* l : {&rep.radar, &rep.comm, &rep.interference}) {
    os << "fading " << to_string(l->kind) << ": ";
    if (l->fading) {
      os << to_string(l->fading->spec.kind) << " K_hat=" << l->fading->k_hat << " var_ratio=" << l->fading->v
         << " n=" << l->fading->n;
    } else {
      os << "---";
    }
    os << '\n';
  }
  auto density = [&](const char* name, const DensityEstimate& d) {
    os << "density " << name << ": " << per_m_to_per_km(d.value) << " /km [" << per_m_to_per_km(d.ci_low) << ", "
       << per_m_to_per_km(d.ci_high) << "] count=" << d.total_count << " window_m=" << d.total_window << '\n';
  };
  density("same_lane", rep.vehicles);
  density("interferer", rep.interferers);
  density("rsu", rep.rsus);
  for (const auto& w : rep.warnings) os << "warning: " << w << '\n';
}

inline nlohmann::json fit_report_json(const FitReport& rep) {
  using nlohmann::json;
  auto fit = [](const std::optional<FitResult>& f) -> json {
    if (!f) return nullptr;
    return {{"alpha", f->alpha_hat}, {"beta_dB", f->beta_hat_db}, {"rms_dB", f->rms_db}, {"n", f->n},
            {"n_zero_excluded", f->n_zero_excluded}};
  };
  auto link = [&](const LinkFitReport& l) {
    json j{{"mixed", fit(l.fits.mixed)}, {"los", fit(l.fits.los)}, {"nlos", fit(l.fits.nlos)},
           {"n_observations", l.n_observations}};
    if (l.d2) j["los_model"] = {{"d1_m", l.d1}, {"d2_m", l.d2->d2_hat}, {"at_boundary", l.d2->at_boundary}};
    if (l.fading) {
      j["fading"] = {{"kind", to_string(l.fading->spec.kind)},
                     {"k_hat", std::isinf(l.fading->k_hat) ? json("inf") : json(l.fading->k_hat)},
                     {"var_ratio", l.fading->v},
                     {"n", l.fading->n},
                     {"low_confidence", l.fading->low_confidence}};
    }
    return j;
  };
  auto density = [](const DensityEstimate& d) {
    return json{{"per_km", per_m_to_per_km(d.value)},
                {"ci_low_per_km", per_m_to_per_km(d.ci_low)},
                {"ci_high_per_km", per_m_to_per_km(d.ci_high)},
                {"count", d.total_count},
                {"window_m", d.total_window}};
  };
  return {{"radar", link(rep.radar)},
          {"comm", link(rep.comm)},
          {"interference", link(rep.interference)},
          {"densities", {{"same_lane", density(rep.vehicles)}, {"interferer", density(rep.interferers)},
                         {"rsu", density(rep.rsus)}}},
          {"warnings", rep.warnings}};
}

inline int cmd_fit(const FitOptions& o, std::ostream& out, std::ostream& err) {
  const fs::path in = o.in;
  if (!fs::is_directory(in)) throw IoError("input directory '" + in.string() + "' does not exist");
  const SimulationConfig base = o.config.empty() ? load_or_default((in / "config.json").string()) : load_or_default(o.config);
  std::vector<LinkObservation> obs;
  std::vector<DensityRow> dens;
  std::string obs_manifest;
  {
    auto f = open_input(in / "observations.csv");
    obs = read_observations_csv(f);
  }
  {
    auto f = open_input(in / "densities.csv");
    dens = read_densities_csv(f);
  }
  if (obs.empty()) throw FitError("no observations in '" + (in / "observations.csv").string() + "'");
  std::vector<DensityCount> vehicles;
  std::vector<DensityCount> interferers;
  std::vector<DensityCount> rsus;
  for (const auto& d : dens) {
    (d.population == "same_lane" ? vehicles : d.population == "interferer" ? interferers : rsus).push_back(d.count);
  }
  const FitReport rep = fit_all(base.system, obs, vehicles, interferers, rsus);
  const SimulationConfig fitted = fitted_config(base, rep);
  const fs::path dir = o.out;
  const std::string digest = config_digest(fitted);
  write_json(dir / "fitted_config.json", config_document(fitted, 0, {{"source_digest", config_digest(base)}}));
  write_file(dir / "fit_report.txt", [&](std::ostream& os) { write_fit_report(os, rep, digest); });
  nlohmann::json rj = fit_report_json(rep);
  rj["manifest"] = {{"digest", digest}, {"source_digest", config_digest(base)}};
  write_json(dir / "fit_report.json", rj);
  write_file(dir / "los_bins.csv", [&](std::ostream& os) {
    os << manifest_header(digest, 0) << '\n' << "link,r_lo_m,r_hi_m,n,los_frequency\n";
    for (LinkKind k : {LinkKind::kComm, LinkKind::kInterference}) {
      std::vector<LinkObservation> rows;
      for (const auto& ob : obs) {
        if (ob.kind == k) rows.push_back(ob);
      }
      for (const auto& b : binned_los_frequencies(rows)) {
        os << to_string(k) << ',' << fmt_fixed(b.r_lo) << ',' << fmt_fixed(b.r_hi) << ',' << b.n << ','
           << fmt_fixed(b.frequency) << '\n';
      }
    }
  });
  write_fit_report(out, rep, digest);
  for (const auto& w : rep.warnings) err << "warning: " << w << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------
// compare

struct CompareOptions {
  BatchOptions batch;
  std::vector<std::string> samples;
  std::vector<std::string> curves;
  std::vector<std::string> engines;
  bool analytic = false;
};

using NamedCurves = std::vector<std::pair<std::string, CurveTables>>;

inline std::vector<GapSummary> all_gaps(const NamedCurves& curves) {
  std::vector<GapSummary> gaps;
  for (MetricKind m : {MetricKind::kCoverage, MetricKind::kSuccess, MetricKind::kDetection, MetricKind::kJrdccp,
                       MetricKind::kJrsccp}) {
    for (std::size_t a = 0; a < curves.size(); ++a) {
      for (std::size_t b = a + 1; b < curves.size(); ++b) {
        try {
          gaps.push_back(max_gap(m, curves[a].first, curves[a].second, curves[b].first, curves[b].second));
        } catch (const std::invalid_argument&) {
          throw ConfigError("thresholds", "threshold grids of '" + curves[a].first + "' and '" + curves[b].first +
                                              "' differ for " + to_string(m));
        }
      }
    }
  }
  return gaps;
}

inline void print_gaps(std::ostream& os, const std::vector<GapSummary>& gaps) {
  os << std::left << std::setw(10) << "metric" << std::setw(16) << "pair" << "max_abs_gap\n";
  for (const auto& g : gaps) {
    os << std::left << std::setw(10) << to_string(g.metric) << std::setw(16) << (g.engine_a + "-" + g.engine_b)
       << std::fixed << std::setprecision(6) << g.max_abs_gap << '\n';
  }
}

inline std::string unique_name(const NamedCurves& existing, std::string name) {
  const std::string base = name;
  for (int k = 2; std::any_of(existing.begin(), existing.end(), [&](const auto& e) { return e.first == name; }); ++k) {
    name = base + "_" + std::to_string(k);
  }
  return name;
}

/// Simulates each engine on `cfg` and evaluates the curves on its grid.
inline NamedCurves simulate_curves(const SimulationConfig& cfg, const std::vector<std::string>& engines, std::size_t n,
                                   std::uint64_t seed, unsigned threads) {
  NamedCurves curves;
  for (const auto& e : engines) {
    const SampleSet set = run_batch(parse_engine(e), cfg, n, seed, threads);
    curves.emplace_back(unique_name(curves, e), sweep(set.samples, cfg.thresholds));
  }
  return curves;
}

inline void write_analytic(const fs::path& path, const SimulationConfig& cfg, std::uint64_t seed) {
  write_file(path, [&](std::ostream& os) {
    os << manifest_header(config_digest(cfg), seed) << '\n' << "eta_c_dB,coverage\n";
    for (double eta : cfg.thresholds.eta_c) {
      os << fmt_db(eta) << ',' << fmt_fixed(sg_coverage_analytic(cfg, eta), 8) << '\n';
    }
  });
}

inline int cmd_compare(const CompareOptions& o, std::ostream& out) {
  const int modes = int(!o.samples.empty()) + int(!o.curves.empty()) + int(!o.engines.empty());
  if (modes != 1) throw UsageError("compare needs exactly one of --samples, --curves or --engines");
  const SimulationConfig cfg = load_or_default(o.batch.config);
  std::string digest = config_digest(cfg);
  NamedCurves curves;
  std::vector<std::string> engine_names;
  std::vector<std::size_t> counts;
  if (!o.samples.empty()) {
    for (const auto& path : o.samples) {
      auto f = open_input(path);
      const SampleSet set = fs::path(path).extension() == ".bin" ? read_samples_binary(f) : read_samples_csv(f);
      if (set.samples.empty()) throw FormatError("'" + path + "' holds no samples");
      curves.emplace_back(unique_name(curves, to_string(set.engine)), sweep(set.samples, cfg.thresholds));
      counts.push_back(set.samples.size());
    }
  } else if (!o.curves.empty()) {
    for (const auto& path : o.curves) {
      auto f = open_input(path);
      for (auto& [name, t] : read_curves_csv(f)) curves.emplace_back(unique_name(curves, name), std::move(t));
    }
  } else {
    require_n(o.batch);
    curves = simulate_curves(cfg, o.engines, o.batch.n, o.batch.seed, resolve_threads(o.batch));
    counts.assign(curves.size(), o.batch.n);
  }
  if (curves.size() < 2) throw UsageError("compare needs at least two sample sets");
  for (const auto& c : curves) engine_names.push_back(c.first);
  const auto gaps = all_gaps(curves);
  const fs::path dir = o.batch.out;
  write_file(dir / "curves.csv", [&](std::ostream& os) { write_curves_csv(os, digest, o.batch.seed, curves); });
  write_file(dir / "gaps.csv", [&](std::ostream& os) { write_gaps_csv(os, digest, o.batch.seed, gaps); });
  if (o.analytic) write_analytic(dir / "analytic_coverage.csv", cfg, o.batch.seed);
  write_manifest(dir, RunManifest{o.batch.config.empty() ? "<default>" : o.batch.config, digest, o.batch.seed,
                                  engine_names, counts, dir.string()});
  print_gaps(out, gaps);
  return kOk;
}

// ---------------------------------------------------------------------------
// sweep

struct SweepOptions {
  BatchOptions batch;
  std::string param;
  std::vector<std::string> values;
  std::vector<std::string> engines{"sg", "mc"};
};

inline nlohmann::json parse_value(const std::string& text) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error&) {
    return text;
  }
}

/// Prefixes every data row of a CSV block (after manifest and header).
inline void append_prefixed(std::ostream& os, const std::string& block, const std::string& prefix) {
  std::istringstream is(block);
  std::string line;
  std::getline(is, line);
  std::getline(is, line);
  while (std::getline(is, line)) os << prefix << line << '\n';
}

inline int cmd_sweep(SweepOptions o, std::ostream& out) {
  std::erase(o.values, std::string());
  if (o.values.empty()) throw UsageError("--values must list at least one value");
  if (o.engines.size() < 2) throw UsageError("--engines must name at least two engines");
  require_n(o.batch);
  const SimulationConfig base = load_or_default(o.batch.config);
  const std::string base_digest = config_digest(base);
  const fs::path dir = o.batch.out;
  std::ostringstream all_curves;
  std::ostringstream all_gaps_csv;
  all_curves << manifest_header(base_digest, o.batch.seed) << '\n'
             << "parameter,value,value_digest," << kCurveHeader << '\n';
  all_gaps_csv << manifest_header(base_digest, o.batch.seed) << '\n'
               << "parameter,value,value_digest," << kGapHeader << '\n';
  for (std::size_t k = 0; k < o.values.size(); ++k) {
    const SimulationConfig cfg = with_parameter(base, o.param, parse_value(o.values[k]));
    const std::string digest = config_digest(cfg);
    const NamedCurves curves = simulate_curves(cfg, o.engines, o.batch.n, o.batch.seed, resolve_threads(o.batch));
    const auto gaps = all_gaps(curves);
    const fs::path sub = dir / ("value_" + std::to_string(k));
    std::ostringstream cblock;
    std::ostringstream gblock;
    write_curves_csv(cblock, digest, o.batch.seed, curves);
    write_gaps_csv(gblock, digest, o.batch.seed, gaps);
    write_file(sub / "curves.csv", [&](std::ostream& os) { os << cblock.str(); });
    write_file(sub / "gaps.csv", [&](std::ostream& os) { os << gblock.str(); });
    write_json(sub / "config.json", config_document(cfg, o.batch.seed, {{"parent_digest", base_digest}}));
    write_manifest(sub,
                   RunManifest{o.batch.config.empty() ? "<default>" : o.batch.config, digest, o.batch.seed, o.engines,
                               std::vector<std::size_t>(o.engines.size(), o.batch.n), sub.string()},
                   {{"parent_digest", base_digest}, {"parameter", o.param}, {"value", parse_value(o.values[k])}});
    const std::string prefix = o.param + "," + o.values[k] + "," + digest + ",";
    append_prefixed(all_curves, cblock.str(), prefix);
    append_prefixed(all_gaps_csv, gblock.str(), prefix);
    out << o.param << " = " << o.values[k] << " (digest " << digest << ")\n";
    print_gaps(out, gaps);
  }
  write_file(dir / "sweep.csv", [&](std::ostream& os) { os << all_curves.str(); });
  write_file(dir / "sweep_gaps.csv", [&](std::ostream& os) { os << all_gaps_csv.str(); });
  write_manifest(dir, RunManifest{o.batch.config.empty() ? "<default>" : o.batch.config, base_digest, o.batch.seed,
                                  o.engines, std::vector<std::size_t>(o.engines.size(), o.batch.n), dir.string()},
                 {{"parameter", o.param}, {"values", o.values}});
  return kOk;
}

// ---------------------------------------------------------------------------
// scene-dump

struct SceneDumpOptions {
  std::string config;
  std::uint64_t seed = 1;
  std::size_t index = 0;
  std::string out;
};

/// Writes the street scene that realization `index` of an rt batch uses.
inline int cmd_scene_dump(const SceneDumpOptions& o, std::ostream& out) {
  const SimulationConfig cfg = load_or_default(o.config);
  Rng rng = Rng::substream(o.seed, o.index).child(StreamTag::kScene);
  const RtScene scene = build_rt_scene(cfg.system, rng);
  nlohmann::json j = scene_to_json(scene);
  j["manifest"] = {{"digest", config_digest(cfg)}, {"seed", o.seed}, {"index", o.index}};
  write_json(o.out, j);
  out << "scene with " << scene.buildings.size() << " buildings, " << scene.vehicles.size() << " vehicles, "
      << scene.rsu_nodes.size() << " RSUs written to " << o.out << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------
// Entry point.

/// Parses `args` (without the program name) and runs one subcommand.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Integrated sensing and communication link-level simulator for a vehicular street", "v2x-isac"};
  app.require_subcommand(1);
  const std::vector<std::string> engine_names{"sg", "mc", "rt"};

  SimulateOptions sim;
  auto* simulate = app.add_subcommand("simulate", "Run a batch of one engine and write its samples");
  add_batch_options(simulate, sim.batch, true);
  simulate->add_option("--engine", sim.engine, "sg, mc or rt")->required()->check(CLI::IsMember(engine_names));
  simulate->add_option("--dump-paths", sim.dump_paths, "rt: write ray paths of the first K realizations");

  FitOptions fit;
  auto* fitc = app.add_subcommand("fit", "Extract model parameters from an rt simulate directory");
  fitc->add_option("--in", fit.in, "Directory written by 'simulate --engine rt'")->required();
  fitc->add_option("--out", fit.out, "Output directory")->required();
  fitc->add_option("--config", fit.config, "Configuration overriding the one stored with the samples");

  CompareOptions cmp;
  auto* compare = app.add_subcommand("compare", "Metric curves per engine and their largest gaps");
  add_batch_options(compare, cmp.batch, false);
  compare->add_option("--samples", cmp.samples, "Sample files (.csv or .bin)");
  compare->add_option("--curves", cmp.curves, "Curve CSV files");
  compare->add_option("--engines", cmp.engines, "Engines to simulate")->delimiter(',')->check(CLI::IsMember(engine_names));
  compare->add_flag("--analytic", cmp.analytic, "Also evaluate the semi-analytic sg coverage");

  SweepOptions swp;
  auto* sweepc = app.add_subcommand("sweep", "Repeat compare over values of one configuration parameter");
  add_batch_options(sweepc, swp.batch, true);
  sweepc->add_option("--param", swp.param, "Dotted parameter path, e.g. scenario.p_I")->required();
  sweepc->add_option("--values", swp.values, "Comma-separated values")->delimiter(',')->required();
  sweepc->add_option("--engines", swp.engines, "Engines to compare")->delimiter(',')->check(CLI::IsMember(engine_names))
      ->capture_default_str();

  SceneDumpOptions sd;
  auto* scene = app.add_subcommand("scene-dump", "Write the street scene of one rt realization as JSON");
  scene->add_option("--config", sd.config, "Configuration JSON");
  scene->add_option("--seed", sd.seed, "Master seed")->capture_default_str();
  scene->add_option("--index", sd.index, "Realization index")->capture_default_str();
  scene->add_option("--out", sd.out, "Output JSON file")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(std::move(reversed));
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  }

  try {
    if (*simulate) return cmd_simulate(sim, out);
    if (*fitc) return cmd_fit(fit, out, err);
    if (*compare) return cmd_compare(cmp, out);
    if (*sweepc) return cmd_sweep(swp, out);
    if (*scene) return cmd_scene_dump(sd, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << '\n';
    return kConfig;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << '\n';
    return kIo;
  } catch (const FormatError& e) {
    err << "i/o error: " << e.what() << '\n';
    return kIo;
  } catch (const std::ios_base::failure& e) {
    err << "i/o error: " << e.what() << '\n';
    return kIo;
  } catch (const UnsupportedModelError& e) {
    err << "configuration error: " << e.what() << '\n';
    return kConfig;
  } catch (const std::invalid_argument& e) {
    err << "configuration error: " << e.what() << '\n';
    return kConfig;
  } catch (const std::exception& e) {
    err << "numeric error: " << e.what() << '\n';
    return kNumeric;
  }
  return kUsage;
}

}  // namespace v2x_isac::cli
