#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>

#include "v2x_isac/rng.hpp"
#include "v2x_isac/units.hpp"

namespace v2x_isac {

/// Log-distance law [L(r)]_dB = beta_db + 10 alpha log10(r).
struct PathLossParams {
  double alpha = 2.0;
  double beta_db = 0.0;

  friend bool operator==(const PathLossParams&, const PathLossParams&) = default;
};

enum class FadingKind { kNone, kRayleigh, kRician };

/// Small-scale power fading |h|^2, always normalized to unit mean.
struct FadingSpec {
  FadingKind kind = FadingKind::kNone;
  double k_factor = 0.0;  // rician only

  static FadingSpec none() { return {}; }
  static FadingSpec rayleigh() { return {FadingKind::kRayleigh, 0.0}; }
  static FadingSpec rician(double k) { return {FadingKind::kRician, k}; }

  friend bool operator==(const FadingSpec&, const FadingSpec&) = default;
};

inline const char* to_string(FadingKind k) {
  switch (k) {
    case FadingKind::kNone: return "none";
    case FadingKind::kRayleigh: return "rayleigh";
    case FadingKind::kRician: return "rician";
  }
  return "none";
}

/// Propagation description of one link type. `los`, `nlos`, `d1` and `d2`
/// are only used by the Monte-Carlo model and come as a group.
struct LinkPropagation {
  PathLossParams mixed;
  std::optional<PathLossParams> los;
  std::optional<PathLossParams> nlos;
  FadingSpec fading;
  std::optional<double> d1;
  std::optional<double> d2;

  bool has_los_model() const { return los && nlos && d1 && d2; }
};

/// P G c^2 / ((4 pi f_c)^2 beta): received power at 1 m under the
/// log-distance law. The (4 pi)^2 form matches free-space Friis at beta = 1.
inline double rho_factor(double power_w, double gain, double f_c, double beta_db) {
  if (!(power_w > 0.0) || !(gain > 0.0) || !(f_c > 0.0)) {
    throw std::invalid_argument("rho_factor: power, gain and frequency must be > 0");
  }
  const double k = 4.0 * kPi * f_c;
  return power_w * gain * kSpeedOfLight * kSpeedOfLight / (k * k * db_to_linear(beta_db));
}

inline double comm_power(double rho, double alpha, double r_parallel, double offset) {
  return rho * std::pow(r_parallel * r_parallel + offset * offset, -alpha / 2.0);
}

inline double radar_power(double rho, double alpha, double r) {
  if (!(r > 0.0)) throw std::invalid_argument("radar_power: range must be > 0");
  return rho * std::pow(r, -alpha);
}

/// Sum of rho (x_i^2 + d^2)^(-alpha/2) |h_i|^2, accumulated in input order.
inline double interference_power(std::span<const double> positions, std::span<const double> fadings, double rho,
                                 double alpha, double offset) {
  if (positions.size() != fadings.size()) {
    throw std::invalid_argument("interference_power: positions and fadings differ in length");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < positions.size(); ++i) total += comm_power(rho, alpha, positions[i], offset) * fadings[i];
  return total;
}

/// d1/d2 line-of-sight probability; 1 at r = 0.
inline double los_probability(double r, double d1, double d2) {
  if (r <= 0.0) return 1.0;
  const double e = std::exp(-r / d2);
  return std::min(d1 / r, 1.0) * (1.0 - e) + e;
}

inline double sample_fading(const FadingSpec& spec, Rng& rng) {
  switch (spec.kind) {
    case FadingKind::kNone:
      return 1.0;
    case FadingKind::kRayleigh:
      return rng.exponential(1.0);
    case FadingKind::kRician: {
      if (spec.k_factor < 0.0) throw std::invalid_argument("sample_fading: negative K factor");
      if (std::isinf(spec.k_factor)) return 1.0;
      const double k = spec.k_factor;
      const double los = std::sqrt(k / (k + 1.0));
      const double s = std::sqrt(1.0 / (2.0 * (k + 1.0)));  // per-component std of the scattered part
      const double re = los + s * rng.normal();
      const double im = s * rng.normal();
      return re * re + im * im;
    }
  }
  return 1.0;
}

inline double path_loss_db(const PathLossParams& p, double r) {
  if (!(r > 0.0)) throw std::invalid_argument("path_loss_db: distance must be > 0");
  return p.beta_db + 10.0 * p.alpha * std::log10(r);
}

}  // namespace v2x_isac
