#pragma once

#include <algorithm>
#include <array>
#include <iterator>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "v2x_isac/metrics.hpp"
#include "v2x_isac/raytracer.hpp"
#include "v2x_isac/samples.hpp"
#include "v2x_isac/units.hpp"

namespace v2x_isac {

inline constexpr const char* kToolVersion = "0.1.0";

/// Malformed or unreadable data file.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunManifest {
  std::string config_path;
  std::string config_digest;
  std::uint64_t seed = 0;
  std::vector<std::string> engines;
  std::vector<std::size_t> counts;
  std::string output_dir;
  std::string tool_version = kToolVersion;
};

inline nlohmann::json manifest_to_json(const RunManifest& m) {
  return {{"config_path", m.config_path}, {"config_digest", m.config_digest}, {"seed", m.seed},
          {"engines", m.engines},         {"counts", m.counts},               {"output_dir", m.output_dir},
          {"tool_version", m.tool_version}};
}

inline RunManifest manifest_from_json(const nlohmann::json& j) {
  RunManifest m;
  m.config_path = j.at("config_path").get<std::string>();
  m.config_digest = j.at("config_digest").get<std::string>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.engines = j.at("engines").get<std::vector<std::string>>();
  m.counts = j.at("counts").get<std::vector<std::size_t>>();
  m.output_dir = j.at("output_dir").get<std::string>();
  m.tool_version = j.at("tool_version").get<std::string>();
  return m;
}

/// First line of every output file.
inline std::string manifest_header(const std::string& digest, std::uint64_t seed) {
  return "# manifest: digest=" + digest + " seed=" + std::to_string(seed) + " tool=v2x-isac/" + kToolVersion;
}

// ---------------------------------------------------------------------------
// Field formatting.

inline std::string fmt_fixed(double v, int decimals = 6) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

inline std::string fmt_dbm(double watts) { return fmt_fixed(watt_to_dbm(watts)); }
inline std::string fmt_db(double linear) { return fmt_fixed(linear_to_db(linear)); }
inline std::string fmt_opt(const std::optional<double>& v) { return v ? fmt_fixed(*v) : std::string(); }

inline double parse_double(const std::string& s, const std::string& what) {
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw FormatError("bad number '" + s + "' in " + what);
  }
  if (used != s.size()) throw FormatError("bad number '" + s + "' in " + what);
  return v;
}

inline std::uint64_t parse_uint(const std::string& s, const std::string& what) {
  if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
    throw FormatError("bad integer '" + s + "' in " + what);
  }
  return std::stoull(s);
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

/// Reads a data file: manifest line, exact column header, rows with the
/// same field count. Returns the rows; the manifest line goes to `manifest`.
inline std::vector<std::vector<std::string>> read_csv_table(std::istream& in, const std::string& header,
                                                            const std::string& what,
                                                            std::string* manifest = nullptr) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("# manifest:", 0) != 0) {
    throw FormatError(what + ": missing manifest header line");
  }
  if (manifest) *manifest = line;
  if (!std::getline(in, line) || line != header) throw FormatError(what + ": unexpected column header");
  const std::size_t columns = split_csv(header).size();
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = split_csv(line);
    if (f.size() != columns) throw FormatError(what + ": wrong field count in row " + std::to_string(rows.size() + 1));
    rows.push_back(std::move(f));
  }
  return rows;
}

/// Digest field of a manifest header line.
inline std::string digest_of_header(const std::string& manifest_line) {
  const auto p = manifest_line.find("digest=");
  if (p == std::string::npos) return {};
  const auto e = manifest_line.find(' ', p);
  return manifest_line.substr(p + 7, e == std::string::npos ? std::string::npos : e - p - 7);
}

// ---------------------------------------------------------------------------
// Sample sets.

namespace sample_flags {
inline constexpr std::uint8_t kTargetPresent = 1;
inline constexpr std::uint8_t kLosKnown = 2;
inline constexpr std::uint8_t kLos = 4;
}  // namespace sample_flags

inline std::uint8_t flags_of(const LinkSample& s) {
  std::uint8_t f = s.target_present ? sample_flags::kTargetPresent : 0;
  if (s.los_c) f |= static_cast<std::uint8_t>(sample_flags::kLosKnown | (*s.los_c ? sample_flags::kLos : 0));
  return f;
}

inline void apply_flags(LinkSample& s, std::uint8_t f) {
  s.target_present = (f & sample_flags::kTargetPresent) != 0;
  if (f & sample_flags::kLosKnown) s.los_c = (f & sample_flags::kLos) != 0;
}

inline constexpr const char* kSampleCsvHeader =
    "engine,index,s_r_dBm,s_c_dBm,i_total_dBm,r_r_m,r_c_m,flags,s_r_raw_dBm";

/// One row per realization; powers in dBm and distances in m, 6 decimals.
/// flags: bit 0 target present, bit 1 LoS state known, bit 2 LoS.
inline void write_samples_csv(std::ostream& os, const SampleSet& set) {
  os << manifest_header(set.config_digest, set.seed) << '\n' << kSampleCsvHeader << '\n';
  for (std::size_t i = 0; i < set.samples.size(); ++i) {
    const auto& s = set.samples[i];
    os << to_string(set.engine) << ',' << i << ',' << fmt_dbm(s.s_r) << ',' << fmt_dbm(s.s_c) << ','
       << fmt_dbm(s.i_total) << ',' << fmt_opt(s.r_r) << ',' << fmt_opt(s.r_c) << ',' << int(flags_of(s)) << ','
       << fmt_dbm(s.s_r_raw) << '\n';
  }
}

inline SampleSet read_samples_csv(std::istream& in) {
  std::string manifest;
  const auto rows = read_csv_table(in, kSampleCsvHeader, "sample csv", &manifest);
  SampleSet set;
  set.config_digest = digest_of_header(manifest);
  if (auto p = manifest.find("seed="); p != std::string::npos) {
    set.seed = std::stoull(manifest.substr(p + 5));
  }
  for (const auto& r : rows) {
    const std::string what = "sample csv row " + r[1];
    set.engine = parse_engine(r[0]);
    if (parse_uint(r[1], what) != set.samples.size()) throw FormatError(what + ": index out of sequence");
    LinkSample s;
    s.s_r = dbm_to_watt(parse_double(r[2], what));
    s.s_c = dbm_to_watt(parse_double(r[3], what));
    s.i_total = dbm_to_watt(parse_double(r[4], what));
    if (!r[5].empty()) s.r_r = parse_double(r[5], what);
    if (!r[6].empty()) s.r_c = parse_double(r[6], what);
    apply_flags(s, static_cast<std::uint8_t>(parse_uint(r[7], what)));
    s.s_r_raw = dbm_to_watt(parse_double(r[8], what));
    set.samples.push_back(s);
  }
  return set;
}

// Binary cache, all integers and IEEE-754 doubles little-endian:
//   magic "V2XISAC1" (8 bytes) | engine u8 | seed u64 | digest (16 ASCII
//   bytes, zero padded) | count u64 | count records of
//   s_r, s_c, i_total, r_r, r_c, s_r_raw (f64 W / m, NaN = absent) | flags u8

inline constexpr std::array<char, 8> kCacheMagic = {'V', '2', 'X', 'I', 'S', 'A', 'C', '1'};
inline constexpr std::size_t kCacheRecordBytes = 6 * 8 + 1;

namespace detail {

inline void put_u64(std::ostream& os, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 8);
}

inline void put_f64(std::ostream& os, double v) { put_u64(os, std::bit_cast<std::uint64_t>(v)); }

inline std::uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) throw FormatError("binary cache: truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

inline double get_f64(std::istream& is) { return std::bit_cast<double>(get_u64(is)); }

inline double opt_or_nan(const std::optional<double>& v) {
  return v ? *v : std::numeric_limits<double>::quiet_NaN();
}

inline std::optional<double> nan_to_opt(double v) { return std::isnan(v) ? std::nullopt : std::optional(v); }

}  // namespace detail

inline void write_samples_binary(std::ostream& os, const SampleSet& set) {
  os.write(kCacheMagic.data(), kCacheMagic.size());
  os.put(static_cast<char>(set.engine));
  detail::put_u64(os, set.seed);
  char digest[16] = {};
  std::memcpy(digest, set.config_digest.data(), std::min<std::size_t>(16, set.config_digest.size()));
  os.write(digest, 16);
  detail::put_u64(os, set.samples.size());
  for (const auto& s : set.samples) {
    detail::put_f64(os, s.s_r);
    detail::put_f64(os, s.s_c);
    detail::put_f64(os, s.i_total);
    detail::put_f64(os, detail::opt_or_nan(s.r_r));
    detail::put_f64(os, detail::opt_or_nan(s.r_c));
    detail::put_f64(os, s.s_r_raw);
    os.put(static_cast<char>(flags_of(s)));
  }
}

inline SampleSet read_samples_binary(std::istream& is) {
  std::array<char, 8> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kCacheMagic) throw FormatError("binary cache: bad magic");
  SampleSet set;
  const int engine = is.get();
  if (engine < 0 || engine > 2) throw FormatError("binary cache: bad engine tag");
  set.engine = static_cast<EngineKind>(engine);
  set.seed = detail::get_u64(is);
  char digest[16];
  if (!is.read(digest, 16)) throw FormatError("binary cache: truncated");
  set.config_digest.assign(digest, strnlen(digest, 16));
  const std::uint64_t n = detail::get_u64(is);
  set.samples.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(n, 1u << 24)));
  for (std::uint64_t i = 0; i < n; ++i) {
    LinkSample s;
    s.s_r = detail::get_f64(is);
    s.s_c = detail::get_f64(is);
    s.i_total = detail::get_f64(is);
    s.r_r = detail::nan_to_opt(detail::get_f64(is));
    s.r_c = detail::nan_to_opt(detail::get_f64(is));
    s.s_r_raw = detail::get_f64(is);
    const int f = is.get();
    if (f < 0) throw FormatError("binary cache: truncated");
    apply_flags(s, static_cast<std::uint8_t>(f));
    set.samples.push_back(s);
  }
  return set;
}

// ---------------------------------------------------------------------------
// Ray-tracer dumps.

inline constexpr const char* kObservationHeader = "realization,link,r_m,power_dBm,los";

inline void write_observations_csv(std::ostream& os, const std::string& digest, std::uint64_t seed,
                                   const std::vector<LinkObservation>& obs) {
  os << manifest_header(digest, seed) << '\n' << kObservationHeader << '\n';
  for (const auto& o : obs) {
    os << o.realization << ',' << to_string(o.kind) << ',' << fmt_fixed(o.r) << ',' << fmt_dbm(o.power) << ','
       << (o.los ? (*o.los ? "1" : "0") : "") << '\n';
  }
}

inline std::vector<LinkObservation> read_observations_csv(std::istream& in) {
  std::vector<LinkObservation> out;
  for (const auto& r : read_csv_table(in, kObservationHeader, "observation csv")) {
    const std::string what = "observation csv";
    LinkObservation o;
    o.realization = parse_uint(r[0], what);
    try {
      o.kind = parse_link_kind(r[1]);
    } catch (const std::invalid_argument& e) {
      throw FormatError(std::string("observation csv: ") + e.what());
    }
    o.r = parse_double(r[2], what);
    o.power = dbm_to_watt(parse_double(r[3], what));
    if (r[4] == "1") {
      o.los = true;
    } else if (r[4] == "0") {
      o.los = false;
    } else if (!r[4].empty()) {
      throw FormatError("observation csv: bad los flag '" + r[4] + "'");
    }
    out.push_back(o);
  }
  return out;
}

struct DensityRow {
  std::uint64_t realization = 0;
  std::string population;  // same_lane, interferer, rsu
  DensityCount count;
};

inline constexpr const char* kDensityHeader = "realization,population,count,window_m";

inline void write_densities_csv(std::ostream& os, const std::string& digest, std::uint64_t seed,
                                const std::vector<DensityRow>& rows) {
  os << manifest_header(digest, seed) << '\n' << kDensityHeader << '\n';
  for (const auto& r : rows) {
    os << r.realization << ',' << r.population << ',' << r.count.count << ',' << fmt_fixed(r.count.window) << '\n';
  }
}

inline std::vector<DensityRow> read_densities_csv(std::istream& in) {
  std::vector<DensityRow> out;
  for (const auto& r : read_csv_table(in, kDensityHeader, "density csv")) {
    DensityRow d;
    d.realization = parse_uint(r[0], "density csv");
    d.population = r[1];
    if (d.population != "same_lane" && d.population != "interferer" && d.population != "rsu") {
      throw FormatError("density csv: unknown population '" + d.population + "'");
    }
    d.count.count = static_cast<std::size_t>(parse_uint(r[2], "density csv"));
    d.count.window = parse_double(r[3], "density csv");
    out.push_back(d);
  }
  return out;
}

inline constexpr const char* kPathHeader = "realization,link,path_id,interactions,length_m,gain_dB,phase_rad";

/// One row per ray path. `link` names the traced link of each set.
inline void write_paths_csv(std::ostream& os, const std::string& digest, std::uint64_t seed,
                            const std::vector<std::pair<std::uint64_t, std::vector<std::pair<std::string, PathSet>>>>&
                                traces) {
  os << manifest_header(digest, seed) << '\n' << kPathHeader << '\n';
  for (const auto& [realization, sets] : traces) {
    for (const auto& [link, set] : sets) {
      for (std::size_t k = 0; k < set.paths.size(); ++k) {
        const auto& p = set.paths[k];
        os << realization << ',' << link << ',' << k << ',' << interaction_label(p) << ',' << fmt_fixed(p.length)
           << ',' << fmt_fixed(linear_to_db(std::norm(p.amplitude))) << ',' << fmt_fixed(std::arg(p.amplitude))
           << '\n';
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Metric curves.

inline constexpr const char* kCurveHeader =
    "engine,metric,eta_c_dB,eta_r_dB,gamma_r_dBm,estimate,ci_low,ci_high,n_effective";

/// Threshold columns not used by a metric are left empty.
inline void write_curve_rows(std::ostream& os, const std::string& engine, const CurveTables& t) {
  auto row = [&](const CurvePoint& p, const std::string& ec, const std::string& er, const std::string& gr) {
    os << engine << ',' << to_string(p.metric) << ',' << ec << ',' << er << ',' << gr << ','
       << fmt_fixed(p.estimate.value, 8) << ',' << fmt_fixed(p.estimate.ci_low, 8) << ','
       << fmt_fixed(p.estimate.ci_high, 8) << ',' << p.estimate.n_effective << '\n';
  };
  for (const auto& p : t.coverage) row(p, fmt_db(p.first), "", "");
  for (const auto& p : t.success) row(p, "", fmt_db(p.first), "");
  for (const auto& p : t.detection) row(p, "", "", fmt_dbm(p.first));
  for (const auto& p : t.jrdccp) row(p, fmt_db(p.first), "", fmt_dbm(p.second));
  for (const auto& p : t.jrsccp) row(p, fmt_db(p.first), fmt_db(p.second), "");
}

inline void write_curves_csv(std::ostream& os, const std::string& digest, std::uint64_t seed,
                             const std::vector<std::pair<std::string, CurveTables>>& curves) {
  os << manifest_header(digest, seed) << '\n' << kCurveHeader << '\n';
  for (const auto& [engine, t] : curves) write_curve_rows(os, engine, t);
}

/// Curve tables per engine, in file order. Thresholds come back linear.
inline std::vector<std::pair<std::string, CurveTables>> read_curves_csv(std::istream& in) {
  std::vector<std::pair<std::string, CurveTables>> out;
  for (const auto& r : read_csv_table(in, kCurveHeader, "curve csv")) {
    const std::string what = "curve csv";
    auto it = std::find_if(out.begin(), out.end(), [&](const auto& e) { return e.first == r[0]; });
    if (it == out.end()) {
      out.emplace_back(r[0], CurveTables{});
      it = std::prev(out.end());
    }
    auto db = [&](const std::string& f) { return db_to_linear(parse_double(f, what)); };
    auto dbm = [&](const std::string& f) { return dbm_to_watt(parse_double(f, what)); };
    CurvePoint p;
    p.estimate.value = parse_double(r[5], what);
    p.estimate.ci_low = parse_double(r[6], what);
    p.estimate.ci_high = parse_double(r[7], what);
    p.estimate.n_effective = static_cast<std::size_t>(parse_uint(r[8], what));
    CurveTables& t = it->second;
    if (r[1] == "coverage") {
      p.metric = MetricKind::kCoverage;
      p.first = db(r[2]);
      t.coverage.push_back(p);
    } else if (r[1] == "success") {
      p.metric = MetricKind::kSuccess;
      p.first = db(r[3]);
      t.success.push_back(p);
    } else if (r[1] == "detection") {
      p.metric = MetricKind::kDetection;
      p.first = dbm(r[4]);
      t.detection.push_back(p);
    } else if (r[1] == "jrdccp") {
      p.metric = MetricKind::kJrdccp;
      p.first = db(r[2]);
      p.second = dbm(r[4]);
      t.jrdccp.push_back(p);
    } else if (r[1] == "jrsccp") {
      p.metric = MetricKind::kJrsccp;
      p.first = db(r[2]);
      p.second = db(r[3]);
      t.jrsccp.push_back(p);
    } else {
      throw FormatError("curve csv: unknown metric '" + r[1] + "'");
    }
  }
  return out;
}

/// Largest |a - b| over the points of one metric; both tables share a grid.
struct GapSummary {
  MetricKind metric = MetricKind::kCoverage;
  std::string engine_a;
  std::string engine_b;
  double max_abs_gap = 0.0;
  double at_first = 0.0;
  double at_second = 0.0;
};

inline GapSummary max_gap(MetricKind m, const std::string& name_a, const CurveTables& a, const std::string& name_b,
                          const CurveTables& b) {
  const auto& pa = a.of(m);
  const auto& pb = b.of(m);
  if (pa.size() != pb.size()) throw std::invalid_argument("max_gap: threshold grids differ");
  GapSummary g{m, name_a, name_b, 0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < pa.size(); ++i) {
    if (pa[i].first != pb[i].first || pa[i].second != pb[i].second) {
      throw std::invalid_argument("max_gap: threshold grids differ");
    }
    const double d = std::abs(pa[i].estimate.value - pb[i].estimate.value);
    if (d > g.max_abs_gap || i == 0) {
      g.max_abs_gap = d;
      g.at_first = pa[i].first;
      g.at_second = pa[i].second;
    }
  }
  return g;
}

inline constexpr const char* kGapHeader = "metric,engine_a,engine_b,max_abs_gap,at_first_threshold,at_second_threshold";

/// Thresholds at the worst point, in dB (dBm for gamma_r).
inline void write_gaps_csv(std::ostream& os, const std::string& digest, std::uint64_t seed,
                           const std::vector<GapSummary>& gaps) {
  os << manifest_header(digest, seed) << '\n' << kGapHeader << '\n';
  for (const auto& g : gaps) {
    std::string first;
    std::string second;
    switch (g.metric) {
      case MetricKind::kCoverage:
      case MetricKind::kSuccess: first = fmt_db(g.at_first); break;
      case MetricKind::kDetection: first = fmt_dbm(g.at_first); break;
      case MetricKind::kJrdccp:
        first = fmt_db(g.at_first);
        second = fmt_dbm(g.at_second);
        break;
      case MetricKind::kJrsccp:
        first = fmt_db(g.at_first);
        second = fmt_db(g.at_second);
        break;
    }
    os << to_string(g.metric) << ',' << g.engine_a << ',' << g.engine_b << ',' << fmt_fixed(g.max_abs_gap, 8) << ','
       << first << ',' << second << '\n';
  }
}

}  // namespace v2x_isac
