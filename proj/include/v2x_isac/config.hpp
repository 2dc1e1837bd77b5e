#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "v2x_isac/metrics.hpp"
#include "v2x_isac/propagation.hpp"
#include "v2x_isac/raytracer.hpp"
#include "v2x_isac/scene.hpp"
#include "v2x_isac/units.hpp"

namespace v2x_isac {

/// Invalid or incomplete configuration; `path` is the dotted key.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string path, const std::string& what)
      : std::runtime_error(path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

struct PropagationModel {
  LinkPropagation radar;
  LinkPropagation comm;
  LinkPropagation interference;
  /// Interferer fading of the stochastic-geometry model; its radar and
  /// communication links carry no fading.
  FadingSpec sg_interferer_fading = FadingSpec::rayleigh();
};

struct SimulationConfig {
  SystemConfig system;
  PropagationModel propagation;
  RayTracerConfig raytracer;
  ThresholdGrid thresholds;
};

inline std::vector<double> linspace_step(double lo, double hi, double step) {
  std::vector<double> v;
  const auto n = static_cast<int>(std::floor((hi - lo) / step + 1e-9));
  for (int i = 0; i <= n; ++i) v.push_back(lo + step * i);
  return v;
}

/// Reference scenario with the fitted propagation parameters used by the
/// line models (Mixed / LoS / NLoS per link).
inline SimulationConfig default_config() {
  SimulationConfig c;
  c.propagation.radar.mixed = {1.74, 3.72};
  c.propagation.radar.fading = FadingSpec::rayleigh();

  c.propagation.comm.mixed = {2.20, 0.42};
  c.propagation.comm.los = PathLossParams{1.53, 3.37};
  c.propagation.comm.nlos = PathLossParams{2.32, 0.40};
  c.propagation.comm.d1 = c.system.r_Cmin();
  c.propagation.comm.d2 = 110.44;
  c.propagation.comm.fading = FadingSpec::rayleigh();

  c.propagation.interference.mixed = {4.64, 0.0};
  c.propagation.interference.los = PathLossParams{1.12, 14.41};
  c.propagation.interference.nlos = PathLossParams{4.35, 0.0};
  c.propagation.interference.d1 = c.system.r_Imin();
  c.propagation.interference.d2 = 43.95;
  c.propagation.interference.fading = FadingSpec::rayleigh();

  for (double db : linspace_step(-20.0, 20.0, 2.0)) {
    c.thresholds.eta_c.push_back(db_to_linear(db));
    c.thresholds.eta_r.push_back(db_to_linear(db));
  }
  for (double dbm : linspace_step(-100.0, -40.0, 2.0)) c.thresholds.gamma_r.push_back(dbm_to_watt(dbm));
  return c;
}

// ---------------------------------------------------------------------------
// JSON schema. Keys carry their units; values in the document are in the
// units named by the key and converted once here.

namespace detail {

/// Reads keys from one JSON object, tracking which were consumed so that
/// unknown keys can be reported with their full path.
class ObjectReader {
 public:
  ObjectReader(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  std::string key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }

  const nlohmann::json& at(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  double number(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_number()) throw ConfigError(key_path(key), "expected a number");
    return v.get<double>();
  }

  std::optional<double> optional_number(const std::string& key) {
    if (!has(key)) return std::nullopt;
    return number(key, 0.0);
  }

  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_boolean()) throw ConfigError(key_path(key), "expected true or false");
    return v.get<bool>();
  }

  std::vector<double> numbers(const std::string& key, const std::vector<double>& fallback) {
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_array()) throw ConfigError(key_path(key), "expected an array of numbers");
    std::vector<double> out;
    for (const auto& x : v) {
      if (!x.is_number()) throw ConfigError(key_path(key), "expected an array of numbers");
      out.push_back(x.get<double>());
    }
    return out;
  }

  Vec3 point(const std::string& key, Vec3 fallback) {
    if (!has(key)) return fallback;
    auto v = numbers(key, {});
    if (v.size() != 3) throw ConfigError(key_path(key), "expected [x, y, z]");
    return {v[0], v[1], v[2]};
  }

  void reject_unknown() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(key_path(it.key()), "unknown key");
    }
  }

 private:
  const nlohmann::json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline PathLossParams read_path_loss(const nlohmann::json& j, const std::string& path, PathLossParams fallback) {
  ObjectReader r(j, path);
  PathLossParams p;
  p.alpha = r.number("alpha", fallback.alpha);
  p.beta_db = r.number("beta_dB", fallback.beta_db);
  r.reject_unknown();
  if (p.alpha < 0.0) throw ConfigError(path + ".alpha", "must be >= 0");
  return p;
}

inline FadingSpec read_fading(const nlohmann::json& j, const std::string& path) {
  ObjectReader r(j, path);
  FadingSpec f;
  const std::string kind = r.has("kind") ? r.at("kind").get<std::string>() : "none";
  if (kind == "none") {
    f = FadingSpec::none();
  } else if (kind == "rayleigh") {
    f = FadingSpec::rayleigh();
  } else if (kind == "rician") {
    f = FadingSpec::rician(r.number("k_factor", 0.0));
    if (f.k_factor < 0.0) throw ConfigError(path + ".k_factor", "must be >= 0");
  } else {
    throw ConfigError(path + ".kind", "expected none, rayleigh or rician");
  }
  r.has("k_factor");
  r.reject_unknown();
  return f;
}

/// Inside a given link block, LoS/NLoS parameters exist only if written.
inline LinkPropagation read_link(const nlohmann::json& j, const std::string& path, const LinkPropagation& fallback,
                                 double default_d1) {
  ObjectReader r(j, path);
  LinkPropagation l;
  l.mixed = r.has("mixed") ? read_path_loss(r.at("mixed"), r.key_path("mixed"), fallback.mixed) : fallback.mixed;
  if (r.has("los")) l.los = read_path_loss(r.at("los"), r.key_path("los"), {});
  if (r.has("nlos")) l.nlos = read_path_loss(r.at("nlos"), r.key_path("nlos"), {});
  l.d1 = r.optional_number("d1_m");
  l.d2 = r.optional_number("d2_m");
  if (l.los && !l.d1) l.d1 = default_d1;
  l.fading = r.has("fading") ? read_fading(r.at("fading"), r.key_path("fading")) : fallback.fading;
  r.reject_unknown();
  if (l.d1 && !(*l.d1 > 0.0)) throw ConfigError(path + ".d1_m", "must be > 0");
  if (l.d2 && !(*l.d2 > 0.0)) throw ConfigError(path + ".d2_m", "must be > 0");
  return l;
}

inline nlohmann::json path_loss_json(const PathLossParams& p) { return {{"alpha", p.alpha}, {"beta_dB", p.beta_db}}; }

inline nlohmann::json fading_json(const FadingSpec& f) {
  nlohmann::json j{{"kind", to_string(f.kind)}};
  if (f.kind == FadingKind::kRician) j["k_factor"] = f.k_factor;
  return j;
}

inline nlohmann::json link_json(const LinkPropagation& l) {
  nlohmann::json j{{"mixed", path_loss_json(l.mixed)}, {"fading", fading_json(l.fading)}};
  if (l.los) j["los"] = path_loss_json(*l.los);
  if (l.nlos) j["nlos"] = path_loss_json(*l.nlos);
  if (l.d1) j["d1_m"] = *l.d1;
  if (l.d2) j["d2_m"] = *l.d2;
  return j;
}

inline std::vector<double> to_db_list(const std::vector<double>& v, double offset = 0.0) {
  std::vector<double> out;
  for (double x : v) out.push_back(linear_to_db(x) + offset);
  return out;
}

inline std::vector<double> from_db_list(const std::vector<double>& v, double offset = 0.0) {
  std::vector<double> out;
  for (double x : v) out.push_back(db_to_linear(x - offset));
  return out;
}

}  // namespace detail

inline SimulationConfig config_from_json(const nlohmann::json& doc) {
  SimulationConfig c = default_config();
  detail::ObjectReader root(doc, "");

  if (root.has("scenario")) {
    detail::ObjectReader r(root.at("scenario"), "scenario");
    SystemConfig& s = c.system;
    s.lambda_R = per_km_to_per_m(r.number("lambda_R_per_km", per_m_to_per_km(s.lambda_R)));
    s.lambda_C = per_km_to_per_m(r.number("lambda_C_per_km", per_m_to_per_km(s.lambda_C)));
    s.p_I = r.number("p_I", s.p_I);
    // lambda_I defaults to the thinned vehicle density.
    s.lambda_I = r.has("lambda_I_per_km") ? per_km_to_per_m(r.number("lambda_I_per_km", 0.0)) : s.p_I * s.lambda_R;
    s.P_V = dbm_to_watt(r.number("P_V_dBm", watt_to_dbm(s.P_V)));
    s.P_L = dbm_to_watt(r.number("P_L_dBm", watt_to_dbm(s.P_L)));
    s.G_R = r.number("G_R", s.G_R);
    s.G_C = r.number("G_C", s.G_C);
    s.G_I = r.number("G_I", s.G_I);
    s.f_c = r.number("f_c_GHz", s.f_c / 1e9) * 1e9;
    s.phi_Vt = deg_to_rad(r.number("phi_Vt_deg", rad_to_deg(s.phi_Vt)));
    s.phi_Vr = deg_to_rad(r.number("phi_Vr_deg", rad_to_deg(s.phi_Vr)));
    s.phi_Lt = deg_to_rad(r.number("phi_Lt_deg", rad_to_deg(s.phi_Lt)));
    s.d_C = r.number("d_C_m", s.d_C);
    s.d_I = r.number("d_I_m", s.d_I);
    s.r_Rmin = r.number("r_Rmin_m", s.r_Rmin);
    s.r_Rmax = r.number("r_Rmax_m", s.r_Rmax);
    s.r_Cmin_override = r.optional_number("r_Cmin_m");
    s.r_Imin_override = r.optional_number("r_Imin_m");
    s.street_length = r.number("street_length_m", s.street_length);
    s.street_width = r.number("street_width_m", s.street_width);
    s.lambda_cross = per_km_to_per_m(r.number("lambda_cross_per_km", per_m_to_per_km(s.lambda_cross)));
    s.vehicle_length = r.number("vehicle_length_m", s.vehicle_length);
    s.vehicle_width = r.number("vehicle_width_m", s.vehicle_width);
    s.vehicle_height = r.number("vehicle_height_m", s.vehicle_height);
    s.building_height = r.number("building_height_m", s.building_height);
    s.building_depth = r.number("building_depth_m", s.building_depth);
    s.street_y_min = r.number("street_y_min_m", s.street_y_min);
    s.same_lane_y = r.number("same_lane_y_m", s.same_lane_y);
    s.opposite_lane_y = r.number("opposite_lane_y_m", s.opposite_lane_y);
    s.radar_tx = r.point("radar_tx_m", s.radar_tx);
    s.radar_rx = r.point("radar_rx_m", s.radar_rx);
    s.rsu_y = r.number("rsu_y_m", s.rsu_y);
    s.rsu_height = r.number("rsu_height_m", s.rsu_height);
    s.interferer_height = r.number("interferer_height_m", s.interferer_height);
    r.reject_unknown();
    try {
      s.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError("scenario", e.what());
    }
    // d1 follows the minimum distances unless given explicitly.
    c.propagation.comm.d1 = s.r_Cmin();
    c.propagation.interference.d1 = s.r_Imin();
  }

  if (root.has("propagation")) {
    detail::ObjectReader r(root.at("propagation"), "propagation");
    auto& p = c.propagation;
    if (r.has("radar")) p.radar = detail::read_link(r.at("radar"), "propagation.radar", p.radar, c.system.r_Rmin);
    if (r.has("comm")) p.comm = detail::read_link(r.at("comm"), "propagation.comm", p.comm, c.system.r_Cmin());
    if (r.has("interference")) {
      p.interference = detail::read_link(r.at("interference"), "propagation.interference", p.interference,
                                         c.system.r_Imin());
    }
    if (r.has("sg_interferer_fading")) {
      p.sg_interferer_fading = detail::read_fading(r.at("sg_interferer_fading"), "propagation.sg_interferer_fading");
    }
    r.reject_unknown();
  }

  if (root.has("raytracer")) {
    detail::ObjectReader r(root.at("raytracer"), "raytracer");
    auto& t = c.raytracer;
    t.max_order = static_cast<int>(r.number("max_order", t.max_order));
    if (t.max_order < 0 || t.max_order > 2) throw ConfigError("raytracer.max_order", "must be 0, 1 or 2");
    t.diffraction = r.boolean("diffraction", t.diffraction);
    t.diffraction_after_reflection = r.boolean("diffraction_after_reflection", t.diffraction_after_reflection);
    t.diffraction_floor_db = r.number("diffraction_floor_dB", t.diffraction_floor_db);
    const double mag = r.number("reflection_coeff_magnitude", std::abs(t.reflection_coeff));
    const double phase = r.number("reflection_coeff_phase_deg", rad_to_deg(std::arg(t.reflection_coeff)));
    t.reflection_coeff = std::polar(mag, deg_to_rad(phase));
    t.coherent = r.boolean("coherent", t.coherent);
    t.region_margin = r.number("region_margin_m", t.region_margin);
    t.filter_clutter = r.boolean("filter_clutter", t.filter_clutter);
    r.reject_unknown();
  }

  if (root.has("thresholds")) {
    detail::ObjectReader r(root.at("thresholds"), "thresholds");
    auto& g = c.thresholds;
    g.eta_c = detail::from_db_list(r.numbers("eta_c_dB", detail::to_db_list(g.eta_c)));
    g.eta_r = detail::from_db_list(r.numbers("eta_r_dB", detail::to_db_list(g.eta_r)));
    g.gamma_r = detail::from_db_list(r.numbers("gamma_r_dBm", detail::to_db_list(g.gamma_r, 30.0)), 30.0);
    r.reject_unknown();
    try {
      g.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError("thresholds", e.what());
    }
  }
  // Provenance block written by the tool; not part of the model.
  root.has("manifest");
  root.reject_unknown();
  return c;
}

inline nlohmann::json config_to_json(const SimulationConfig& c) {
  using nlohmann::json;
  const SystemConfig& s = c.system;
  json sc{{"lambda_R_per_km", per_m_to_per_km(s.lambda_R)},
          {"lambda_C_per_km", per_m_to_per_km(s.lambda_C)},
          {"lambda_I_per_km", per_m_to_per_km(s.lambda_I)},
          {"p_I", s.p_I},
          {"P_V_dBm", watt_to_dbm(s.P_V)},
          {"P_L_dBm", watt_to_dbm(s.P_L)},
          {"G_R", s.G_R},
          {"G_C", s.G_C},
          {"G_I", s.G_I},
          {"f_c_GHz", s.f_c / 1e9},
          {"phi_Vt_deg", rad_to_deg(s.phi_Vt)},
          {"phi_Vr_deg", rad_to_deg(s.phi_Vr)},
          {"phi_Lt_deg", rad_to_deg(s.phi_Lt)},
          {"d_C_m", s.d_C},
          {"d_I_m", s.d_I},
          {"r_Rmin_m", s.r_Rmin},
          {"r_Rmax_m", s.r_Rmax},
          {"street_length_m", s.street_length},
          {"street_width_m", s.street_width},
          {"lambda_cross_per_km", per_m_to_per_km(s.lambda_cross)},
          {"vehicle_length_m", s.vehicle_length},
          {"vehicle_width_m", s.vehicle_width},
          {"vehicle_height_m", s.vehicle_height},
          {"building_height_m", s.building_height},
          {"building_depth_m", s.building_depth},
          {"street_y_min_m", s.street_y_min},
          {"same_lane_y_m", s.same_lane_y},
          {"opposite_lane_y_m", s.opposite_lane_y},
          {"radar_tx_m", {s.radar_tx.x, s.radar_tx.y, s.radar_tx.z}},
          {"radar_rx_m", {s.radar_rx.x, s.radar_rx.y, s.radar_rx.z}},
          {"rsu_y_m", s.rsu_y},
          {"rsu_height_m", s.rsu_height},
          {"interferer_height_m", s.interferer_height}};
  if (s.r_Cmin_override) sc["r_Cmin_m"] = *s.r_Cmin_override;
  if (s.r_Imin_override) sc["r_Imin_m"] = *s.r_Imin_override;

  const auto& p = c.propagation;
  json prop{{"radar", detail::link_json(p.radar)},
            {"comm", detail::link_json(p.comm)},
            {"interference", detail::link_json(p.interference)},
            {"sg_interferer_fading", detail::fading_json(p.sg_interferer_fading)}};

  const auto& t = c.raytracer;
  json rt{{"max_order", t.max_order},
          {"diffraction", t.diffraction},
          {"diffraction_after_reflection", t.diffraction_after_reflection},
          {"diffraction_floor_dB", t.diffraction_floor_db},
          {"reflection_coeff_magnitude", std::abs(t.reflection_coeff)},
          {"reflection_coeff_phase_deg", rad_to_deg(std::arg(t.reflection_coeff))},
          {"coherent", t.coherent},
          {"region_margin_m", t.region_margin},
          {"filter_clutter", t.filter_clutter}};

  json th{{"eta_c_dB", detail::to_db_list(c.thresholds.eta_c)},
          {"eta_r_dB", detail::to_db_list(c.thresholds.eta_r)},
          {"gamma_r_dBm", detail::to_db_list(c.thresholds.gamma_r, 30.0)}};

  return {{"scenario", sc}, {"propagation", prop}, {"raytracer", rt}, {"thresholds", th}};
}

inline SimulationConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::ios_base::failure("cannot open config file '" + path + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("<document>", e.what());
  }
  return config_from_json(doc);
}

/// FNV-1a over the canonical dump of the parsed configuration.
inline std::string config_digest(const SimulationConfig& c) {
  const std::string text = config_to_json(c).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// Dotted paths of every leaf in the schema, e.g. "scenario.p_I".
inline std::vector<std::string> config_leaf_paths(const SimulationConfig& c) {
  std::vector<std::string> out;
  auto walk = [&](auto&& self, const nlohmann::json& j, const std::string& prefix) -> void {
    if (j.is_object()) {
      for (auto it = j.begin(); it != j.end(); ++it) self(self, it.value(), prefix.empty() ? it.key() : prefix + "." + it.key());
    } else {
      out.push_back(prefix);
    }
  };
  walk(walk, config_to_json(c), "");
  return out;
}

/// Copy of `c` with the leaf at `dotted_path` replaced by `value`.
inline SimulationConfig with_parameter(const SimulationConfig& c, const std::string& dotted_path,
                                       const nlohmann::json& value) {
  const auto leaves = config_leaf_paths(c);
  if (std::find(leaves.begin(), leaves.end(), dotted_path) == leaves.end()) {
    std::string valid;
    for (const auto& l : leaves) valid += (valid.empty() ? "" : ", ") + l;
    throw ConfigError(dotted_path, "unknown parameter path; valid keys: " + valid);
  }
  nlohmann::json doc = config_to_json(c);
  nlohmann::json* node = &doc;
  std::stringstream ss(dotted_path);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) node = &(*node)[parts[i]];
  (*node)[parts.back()] = value;
  // A changed density or thinning must not be overridden by the stored
  // derived interferer density.
  if (dotted_path == "scenario.lambda_R_per_km" || dotted_path == "scenario.p_I") {
    doc["scenario"].erase("lambda_I_per_km");
  }
  return config_from_json(doc);
}

}  // namespace v2x_isac
