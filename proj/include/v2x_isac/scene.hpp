#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "v2x_isac/geometry.hpp"
#include "v2x_isac/rng.hpp"
#include "v2x_isac/units.hpp"

namespace v2x_isac {

/// First distance parallel to the road at which a node at perpendicular
/// `offset` enters a beam of full width `beamwidth`. Omnidirectional beams
/// (beamwidth >= pi) see every node.
inline double min_parallel_distance(double offset, double beamwidth) {
  if (beamwidth >= kPi) return 0.0;
  if (!(beamwidth > 0.0)) throw std::invalid_argument("min_parallel_distance: beamwidth must be > 0");
  if (!(offset > 0.0)) throw std::invalid_argument("min_parallel_distance: offset must be > 0");
  return offset / std::tan(beamwidth / 2.0);
}

/// Scenario parameters, SI units throughout (m, W, Hz, rad, 1/m). Default
/// construction reproduces the reference street scenario.
struct SystemConfig {
  // Node densities and interferer thinning.
  double lambda_R = 20e-3;
  double lambda_C = 10e-3;
  double lambda_I = 2e-3;
  double p_I = 0.1;

  double P_V = 0.1;
  double P_L = 0.1;
  double G_R = 1.0;
  double G_C = 1.0;
  double G_I = 1.0;
  double f_c = 26e9;

  double phi_Vt = deg_to_rad(22.5);
  double phi_Vr = deg_to_rad(45.0);
  double phi_Lt = deg_to_rad(45.0);

  double d_C = 1.8;
  double d_I = 3.2;
  double r_Rmin = 5.0;
  double r_Rmax = 200.0;
  // Derived from the offsets and beamwidths unless set explicitly.
  std::optional<double> r_Cmin_override;
  std::optional<double> r_Imin_override;

  double street_length = 2000.0;
  double street_width = 9.0;
  double lambda_cross = 10e-3;

  double vehicle_length = 4.5;
  double vehicle_width = 1.8;
  double vehicle_height = 1.5;
  double building_height = 20.0;
  double building_depth = 10.0;

  // Plan-view layout. The street spans y in [street_y_min, street_y_min +
  // street_width]; the typical vehicle's antennas sit at x = radar_tx.x.
  double street_y_min = 10.5;
  double same_lane_y = 16.1;
  double opposite_lane_y = 13.0;
  Vec3 radar_tx{6.1, 16.0, 0.5};
  Vec3 radar_rx{6.1, 16.2, 0.5};
  double rsu_y = 18.0;
  double rsu_height = 2.5;
  double interferer_height = 0.5;

  /// Both the transmit and the receive beam must see the node.
  double r_Cmin() const {
    if (r_Cmin_override) return *r_Cmin_override;
    return std::max(min_parallel_distance(d_C, phi_Lt), min_parallel_distance(d_C, phi_Vr));
  }
  double r_Imin() const {
    if (r_Imin_override) return *r_Imin_override;
    return std::max(min_parallel_distance(d_I, phi_Vt), min_parallel_distance(d_I, phi_Vr));
  }

  /// Throws std::invalid_argument naming the offending field.
  void validate() const {
    auto require = [](bool ok, const char* field, const char* what) {
      if (!ok) throw std::invalid_argument(std::string(field) + ": " + what);
    };
    require(lambda_R >= 0.0, "lambda_R", "must be >= 0");
    require(lambda_C >= 0.0, "lambda_C", "must be >= 0");
    require(lambda_I >= 0.0, "lambda_I", "must be >= 0");
    require(lambda_cross >= 0.0, "lambda_cross", "must be >= 0");
    require(p_I >= 0.0 && p_I <= 1.0, "p_I", "must lie in [0, 1]");
    require(P_V > 0.0, "P_V", "must be > 0");
    require(P_L > 0.0, "P_L", "must be > 0");
    require(G_R > 0.0 && G_C > 0.0 && G_I > 0.0, "G", "gains must be > 0");
    require(f_c > 0.0, "f_c", "must be > 0");
    require(phi_Vt > 0.0 && phi_Vr > 0.0 && phi_Lt > 0.0, "phi", "beamwidths must be > 0");
    require(d_C > 0.0, "d_C", "must be > 0");
    require(d_I > 0.0, "d_I", "must be > 0");
    require(r_Rmin > 0.0 && r_Rmin < r_Rmax, "r_Rmin", "need 0 < r_Rmin < r_Rmax");
    require(r_Cmin() >= 0.0, "r_Cmin", "must be >= 0");
    require(r_Imin() >= 0.0, "r_Imin", "must be >= 0");
    require(street_length > 0.0, "street_length", "must be > 0");
    require(street_width > 0.0, "street_width", "must be > 0");
    require(vehicle_length > 0.0 && vehicle_width > 0.0 && vehicle_height > 0.0, "vehicle", "dimensions must be > 0");
    require(building_height > 0.0 && building_depth > 0.0, "building", "dimensions must be > 0");
  }
};

/// Homogeneous PPP of intensity `rate` on the closed window [lo, hi],
/// returned sorted. Built from exponential spacings.
inline std::vector<double> sample_ppp(double rate, double lo, double hi, Rng& rng) {
  if (!(hi >= lo)) throw std::invalid_argument("sample_ppp: inverted window");
  if (rate < 0.0) throw std::invalid_argument("sample_ppp: negative rate");
  std::vector<double> out;
  if (rate == 0.0 || hi == lo) return out;
  double x = lo + rng.exponential(rate);
  while (x <= hi) {
    out.push_back(x);
    x += rng.exponential(rate);
  }
  return out;
}

/// Smallest sorted position inside the closed window [lo, hi].
inline std::optional<double> nearest_in_window(const std::vector<double>& sorted, double lo, double hi) {
  auto it = std::lower_bound(sorted.begin(), sorted.end(), lo);
  if (it == sorted.end() || *it > hi) return std::nullopt;
  return *it;
}

/// Greedy left-to-right sweep: keep a vehicle iff its block [p, p + length]
/// does not intersect the last kept block. Returns the kept indices.
inline std::vector<std::size_t> remove_overlaps_indices(const std::vector<double>& sorted, double length) {
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (kept.empty() || sorted[i] - sorted[kept.back()] >= length) kept.push_back(i);
  }
  return kept;
}

inline std::vector<double> remove_overlaps(const std::vector<double>& sorted, double length) {
  std::vector<double> out;
  for (auto i : remove_overlaps_indices(sorted, length)) out.push_back(sorted[i]);
  return out;
}

/// Node positions (parallel distance from the typical vehicle's antennas)
/// for the line models.
struct LineScene {
  std::vector<double> radar_targets;
  std::vector<double> rsus;
  std::vector<double> interferers;
};

inline LineScene build_line_scene(const SystemConfig& cfg, Rng& rng) {
  LineScene s;
  s.radar_targets = sample_ppp(cfg.lambda_R, cfg.r_Rmin, cfg.r_Rmax, rng);
  s.rsus = sample_ppp(cfg.lambda_C, std::min(cfg.r_Cmin(), cfg.street_length), cfg.street_length, rng);
  s.interferers = sample_ppp(cfg.lambda_I, std::min(cfg.r_Imin(), cfg.street_length), cfg.street_length, rng);
  return s;
}

enum class Lane { kSame = 0, kOpposite = 1 };

struct Vehicle {
  Rect rect;
  double height = 0.0;
  Lane lane = Lane::kSame;
  bool interferer = false;
  /// Parallel distance from the typical antennas to the block face nearest
  /// to them (rear face for the same lane, front face for the opposite).
  double position = 0.0;
};

struct Building {
  Rect rect;
  double height = 0.0;
};

/// Plan-view street scene for the ray tracer; immutable once built.
struct RtScene {
  std::vector<Building> buildings;
  std::vector<Vehicle> vehicles;
  std::vector<double> perpendicular_streets;  // street centre x coordinates
  std::vector<Vec3> rsu_nodes;
  std::vector<Vec3> vehicle_antennas;  // transmit antennas of interferers
  Vec3 typical_tx;
  Vec3 typical_rx;
  /// Counts before overlap removal, kept for density diagnostics.
  std::size_t sampled_same_lane = 0;
  std::size_t sampled_opposite_lane = 0;
  std::size_t sampled_interferers = 0;
  double vehicle_window = 0.0;

  /// Index into `vehicles` of the first same-lane vehicle ahead.
  std::optional<std::size_t> next_vehicle_ahead() const {
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < vehicles.size(); ++i) {
      if (vehicles[i].lane != Lane::kSame) continue;
      if (!best || vehicles[i].position < vehicles[*best].position) best = i;
    }
    return best;
  }
};

/// Rows of buildings on both street sides, interrupted by perpendicular
/// streets, plus the vehicles of both lanes (overlap-removed, interferers
/// marked by independent thinning before removal) and the RSUs.
inline RtScene build_rt_scene(const SystemConfig& cfg, Rng& rng) {
  RtScene scene;
  scene.typical_tx = cfg.radar_tx;
  scene.typical_rx = cfg.radar_rx;
  const double x0 = cfg.radar_rx.x;

  scene.perpendicular_streets = sample_ppp(cfg.lambda_cross, 0.0, cfg.street_length, rng);
  {
    std::vector<std::pair<double, double>> spans;
    double start = 0.0;
    for (double c : scene.perpendicular_streets) {
      const double gap_lo = c - cfg.street_width / 2.0;
      const double gap_hi = c + cfg.street_width / 2.0;
      if (gap_lo > start) spans.emplace_back(start, gap_lo);
      start = std::max(start, gap_hi);
    }
    if (start < cfg.street_length) spans.emplace_back(start, cfg.street_length);
    const double y_lo = cfg.street_y_min;
    const double y_hi = cfg.street_y_min + cfg.street_width;
    for (auto [a, b] : spans) {
      scene.buildings.push_back({{a, y_lo - cfg.building_depth, b, y_lo}, cfg.building_height});
      scene.buildings.push_back({{a, y_hi, b, y_hi + cfg.building_depth}, cfg.building_height});
    }
  }

  const double window = std::max(0.0, cfg.street_length - x0);
  scene.vehicle_window = window;
  auto add_lane = [&](Lane lane, double lane_y) {
    auto positions = sample_ppp(cfg.lambda_R, 0.0, window, rng);
    std::vector<bool> marks(positions.size(), false);
    if (lane == Lane::kOpposite) {
      for (std::size_t i = 0; i < positions.size(); ++i) marks[i] = rng.bernoulli(cfg.p_I);
      scene.sampled_opposite_lane = positions.size();
      scene.sampled_interferers = static_cast<std::size_t>(std::count(marks.begin(), marks.end(), true));
    } else {
      scene.sampled_same_lane = positions.size();
    }
    for (auto i : remove_overlaps_indices(positions, cfg.vehicle_length)) {
      Vehicle v;
      v.position = positions[i];
      v.rect = {x0 + positions[i], lane_y - cfg.vehicle_width / 2.0, x0 + positions[i] + cfg.vehicle_length,
                lane_y + cfg.vehicle_width / 2.0};
      v.height = cfg.vehicle_height;
      v.lane = lane;
      v.interferer = marks[i];
      scene.vehicles.push_back(v);
      if (v.interferer) scene.vehicle_antennas.push_back({x0 + positions[i], cfg.opposite_lane_y, cfg.interferer_height});
    }
  };
  add_lane(Lane::kSame, cfg.same_lane_y);
  add_lane(Lane::kOpposite, cfg.opposite_lane_y);

  for (double r : sample_ppp(cfg.lambda_C, std::min(cfg.r_Cmin(), window), window, rng)) {
    scene.rsu_nodes.push_back({x0 + r, cfg.rsu_y, cfg.rsu_height});
  }
  return scene;
}

// JSON layout: rectangles as [xmin, ymin, xmax, ymax], points as [x, y, z].
inline nlohmann::json scene_to_json(const RtScene& s) {
  using nlohmann::json;
  auto rect = [](const Rect& r) { return json::array({r.xmin, r.ymin, r.xmax, r.ymax}); };
  auto point = [](const Vec3& p) { return json::array({p.x, p.y, p.z}); };
  json j;
  j["buildings"] = json::array();
  for (const auto& b : s.buildings) j["buildings"].push_back({{"rect", rect(b.rect)}, {"height_m", b.height}});
  j["vehicles"] = json::array();
  for (const auto& v : s.vehicles) {
    j["vehicles"].push_back({{"rect", rect(v.rect)},
                             {"height_m", v.height},
                             {"lane", v.lane == Lane::kSame ? "same" : "opposite"},
                             {"interferer", v.interferer},
                             {"position_m", v.position}});
  }
  j["perpendicular_streets_m"] = s.perpendicular_streets;
  j["rsu_nodes"] = json::array();
  for (const auto& p : s.rsu_nodes) j["rsu_nodes"].push_back(point(p));
  j["vehicle_antennas"] = json::array();
  for (const auto& p : s.vehicle_antennas) j["vehicle_antennas"].push_back(point(p));
  j["typical_tx"] = point(s.typical_tx);
  j["typical_rx"] = point(s.typical_rx);
  return j;
}

inline RtScene scene_from_json(const nlohmann::json& j) {
  auto rect = [](const nlohmann::json& a) {
    return Rect{a.at(0).get<double>(), a.at(1).get<double>(), a.at(2).get<double>(), a.at(3).get<double>()};
  };
  auto point = [](const nlohmann::json& a) {
    return Vec3{a.at(0).get<double>(), a.at(1).get<double>(), a.at(2).get<double>()};
  };
  RtScene s;
  for (const auto& b : j.at("buildings")) s.buildings.push_back({rect(b.at("rect")), b.at("height_m").get<double>()});
  for (const auto& v : j.at("vehicles")) {
    Vehicle veh;
    veh.rect = rect(v.at("rect"));
    veh.height = v.at("height_m").get<double>();
    veh.lane = v.at("lane").get<std::string>() == "same" ? Lane::kSame : Lane::kOpposite;
    veh.interferer = v.at("interferer").get<bool>();
    veh.position = v.at("position_m").get<double>();
    s.vehicles.push_back(veh);
  }
  s.perpendicular_streets = j.at("perpendicular_streets_m").get<std::vector<double>>();
  for (const auto& p : j.at("rsu_nodes")) s.rsu_nodes.push_back(point(p));
  for (const auto& p : j.at("vehicle_antennas")) s.vehicle_antennas.push_back(point(p));
  s.typical_tx = point(j.at("typical_tx"));
  s.typical_rx = point(j.at("typical_rx"));
  return s;
}

}  // namespace v2x_isac
