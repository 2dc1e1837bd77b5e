#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace v2x_isac {

enum class EngineKind : std::uint8_t { kSg = 0, kMc = 1, kRt = 2 };

inline const char* to_string(EngineKind e) {
  switch (e) {
    case EngineKind::kSg: return "sg";
    case EngineKind::kMc: return "mc";
    case EngineKind::kRt: return "rt";
  }
  return "sg";
}

inline EngineKind parse_engine(const std::string& s) {
  if (s == "sg") return EngineKind::kSg;
  if (s == "mc") return EngineKind::kMc;
  if (s == "rt") return EngineKind::kRt;
  throw std::invalid_argument("unknown engine '" + s + "' (expected sg, mc or rt)");
}

/// Received powers of one network realization, in watts.
struct LinkSample {
  double s_r = 0.0;      // useful radar echo
  double s_c = 0.0;      // communication signal
  double i_total = 0.0;  // aggregate interference
  std::optional<double> r_r;
  std::optional<double> r_c;
  bool target_present = false;
  std::optional<bool> los_c;
  /// Radar echo including environment clutter (ray tracer only; equals s_r
  /// for the line models).
  double s_r_raw = 0.0;
};

struct SampleSet {
  EngineKind engine = EngineKind::kSg;
  std::vector<LinkSample> samples;
  std::uint64_t seed = 0;
  std::string config_digest;
};

enum class LinkKind : std::uint8_t { kRadar = 0, kComm = 1, kInterference = 2 };

inline const char* to_string(LinkKind k) {
  switch (k) {
    case LinkKind::kRadar: return "radar";
    case LinkKind::kComm: return "comm";
    case LinkKind::kInterference: return "interference";
  }
  return "radar";
}

inline LinkKind parse_link_kind(const std::string& s) {
  if (s == "radar") return LinkKind::kRadar;
  if (s == "comm") return LinkKind::kComm;
  if (s == "interference") return LinkKind::kInterference;
  throw std::invalid_argument("unknown link kind '" + s + "'");
}

/// One traced link: the distance its power law takes as argument and the
/// received power. Interference rows are per interfering vehicle.
struct LinkObservation {
  LinkKind kind = LinkKind::kRadar;
  double r = 0.0;
  double power = 0.0;
  std::optional<bool> los;
  std::uint64_t realization = 0;
};

/// Node counts of one realization over their sampling windows.
struct DensityCount {
  std::size_t count = 0;
  double window = 0.0;  // m
};

}  // namespace v2x_isac
