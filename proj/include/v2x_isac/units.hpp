#pragma once

#include <cmath>
#include <limits>
#include <numbers>

namespace v2x_isac {

inline constexpr double kSpeedOfLight = 299792458.0;  // m/s
inline constexpr double kPi = std::numbers::pi;

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

// 0 W maps to -inf dB.
inline double linear_to_db(double x) {
  if (x <= 0.0) return -std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(x);
}

inline double dbm_to_watt(double dbm) { return db_to_linear(dbm - 30.0); }
inline double watt_to_dbm(double w) { return linear_to_db(w) + 30.0; }

inline double deg_to_rad(double deg) { return deg * kPi / 180.0; }
inline double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

inline double per_km_to_per_m(double v) { return v / 1000.0; }
inline double per_m_to_per_km(double v) { return v * 1000.0; }

inline double wavelength(double f_c) { return kSpeedOfLight / f_c; }

}  // namespace v2x_isac
