#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "v2x_isac/samples.hpp"

namespace v2x_isac {

struct MetricEstimate {
  double value = 0.0;
  double ci_low = 0.0;
  double ci_high = 1.0;
  std::size_t n_effective = 0;
};

/// Wilson score interval; an empty population gives value 0 and [0, 1].
inline MetricEstimate wilson_estimate(std::size_t successes, std::size_t n, double z = 1.959963984540054) {
  MetricEstimate e;
  e.n_effective = n;
  if (n == 0) return e;
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(successes) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double centre = (p + z2 / (2.0 * nn)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / denom;
  e.value = p;
  e.ci_low = std::clamp(std::min(centre - half, p), 0.0, 1.0);
  e.ci_high = std::clamp(std::max(centre + half, p), 0.0, 1.0);
  return e;
}

/// Linear-scale threshold grid. SINR thresholds are dimensionless, gamma_r
/// in watts. All lists ascending.
struct ThresholdGrid {
  std::vector<double> eta_c;
  std::vector<double> eta_r;
  std::vector<double> gamma_r;

  void validate() const {
    auto check = [](const std::vector<double>& v, const char* name) {
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (!(v[i] >= 0.0)) throw std::invalid_argument(std::string("threshold grid ") + name + ": negative value");
        if (i > 0 && !(v[i] > v[i - 1])) {
          throw std::invalid_argument(std::string("threshold grid ") + name + ": not strictly ascending");
        }
      }
    };
    check(eta_c, "eta_c");
    check(eta_r, "eta_r");
    check(gamma_r, "gamma_r");
  }
};

/// Interference-limited SINR; a zero denominator gives +inf so the event
/// holds for every finite threshold.
inline double sinr(double signal, double disturbance) {
  if (disturbance > 0.0) return signal / disturbance;
  return std::numeric_limits<double>::infinity();
}

inline double comm_sinr(const LinkSample& s) { return sinr(s.s_c, s.s_r + s.i_total); }
inline double radar_sinr(const LinkSample& s) { return sinr(s.s_r, s.s_c + s.i_total); }
inline double radar_total_power(const LinkSample& s) { return s.s_r + s.s_c + s.i_total; }

namespace detail {

inline void require_samples(std::span<const LinkSample> samples, const char* who) {
  if (samples.empty()) throw std::invalid_argument(std::string(who) + ": empty sample set");
}

template <class Event>
MetricEstimate fraction(std::span<const LinkSample> samples, bool need_target, Event ev) {
  std::size_t n = 0;
  std::size_t hits = 0;
  for (const auto& s : samples) {
    if (need_target && !s.target_present) continue;
    ++n;
    if (ev(s)) ++hits;
  }
  return wilson_estimate(hits, n);
}

}  // namespace detail

/// P(S_C / (S_R + I) >= eta_c) over all realizations.
inline MetricEstimate coverage(std::span<const LinkSample> samples, double eta_c) {
  detail::require_samples(samples, "coverage");
  return detail::fraction(samples, false, [&](const LinkSample& s) { return comm_sinr(s) >= eta_c; });
}

/// P(S_R / (S_C + I) >= eta_r), conditioned on a target being present.
inline MetricEstimate success(std::span<const LinkSample> samples, double eta_r) {
  detail::require_samples(samples, "success");
  return detail::fraction(samples, true, [&](const LinkSample& s) { return radar_sinr(s) >= eta_r; });
}

/// P(S_R + S_C + I >= gamma_r), conditioned on a target being present.
inline MetricEstimate detection(std::span<const LinkSample> samples, double gamma_r) {
  detail::require_samples(samples, "detection");
  return detail::fraction(samples, true, [&](const LinkSample& s) { return radar_total_power(s) >= gamma_r; });
}

/// Joint detection and coverage.
inline MetricEstimate jrdccp(std::span<const LinkSample> samples, double eta_c, double gamma_r) {
  detail::require_samples(samples, "jrdccp");
  return detail::fraction(samples, true, [&](const LinkSample& s) {
    return radar_total_power(s) >= gamma_r && comm_sinr(s) >= eta_c;
  });
}

/// Joint radar success and communication coverage.
inline MetricEstimate jrsccp(std::span<const LinkSample> samples, double eta_c, double eta_r) {
  detail::require_samples(samples, "jrsccp");
  return detail::fraction(samples, true, [&](const LinkSample& s) {
    return radar_sinr(s) >= eta_r && comm_sinr(s) >= eta_c;
  });
}

enum class MetricKind { kCoverage, kSuccess, kDetection, kJrdccp, kJrsccp };

inline const char* to_string(MetricKind m) {
  switch (m) {
    case MetricKind::kCoverage: return "coverage";
    case MetricKind::kSuccess: return "success";
    case MetricKind::kDetection: return "detection";
    case MetricKind::kJrdccp: return "jrdccp";
    case MetricKind::kJrsccp: return "jrsccp";
  }
  return "coverage";
}

/// One point of a metric curve. Univariate curves leave `second` unused;
/// jrdccp uses (eta_c, gamma_r), jrsccp (eta_c, eta_r), linear units.
struct CurvePoint {
  MetricKind metric = MetricKind::kCoverage;
  double first = 0.0;
  double second = 0.0;
  MetricEstimate estimate;
};

struct CurveTables {
  std::vector<CurvePoint> coverage;
  std::vector<CurvePoint> success;
  std::vector<CurvePoint> detection;
  std::vector<CurvePoint> jrdccp;  // row-major over (eta_c, gamma_r)
  std::vector<CurvePoint> jrsccp;  // row-major over (eta_c, eta_r)

  const std::vector<CurvePoint>& of(MetricKind m) const {
    switch (m) {
      case MetricKind::kCoverage: return coverage;
      case MetricKind::kSuccess: return success;
      case MetricKind::kDetection: return detection;
      case MetricKind::kJrdccp: return jrdccp;
      case MetricKind::kJrsccp: return jrsccp;
    }
    return coverage;
  }
};

namespace detail {

/// Number of thresholds <= value, i.e. how many events `value >= t` hold.
inline std::size_t rank_of(const std::vector<double>& thresholds, double value) {
  return static_cast<std::size_t>(std::upper_bound(thresholds.begin(), thresholds.end(), value) - thresholds.begin());
}

inline std::vector<CurvePoint> univariate_curve(MetricKind kind, const std::vector<double>& grid,
                                                const std::vector<double>& values) {
  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  std::vector<CurvePoint> out;
  for (double t : grid) {
    const auto below = static_cast<std::size_t>(std::lower_bound(sorted.begin(), sorted.end(), t) - sorted.begin());
    out.push_back({kind, t, 0.0, wilson_estimate(sorted.size() - below, sorted.size())});
  }
  return out;
}

/// Joint curve via a rank histogram and 2D suffix sums.
inline std::vector<CurvePoint> joint_curve(MetricKind kind, const std::vector<double>& grid_a,
                                           const std::vector<double>& grid_b, const std::vector<double>& a,
                                           const std::vector<double>& b) {
  const std::size_t na = grid_a.size() + 1;
  const std::size_t nb = grid_b.size() + 1;
  std::vector<std::size_t> h(na * nb, 0);
  for (std::size_t k = 0; k < a.size(); ++k) ++h[rank_of(grid_a, a[k]) * nb + rank_of(grid_b, b[k])];
  // suffix[i][j] = sum of h over rows >= i and columns >= j
  std::vector<std::size_t> suffix((na + 1) * (nb + 1), 0);
  for (std::size_t i = na; i-- > 0;) {
    for (std::size_t j = nb; j-- > 0;) {
      suffix[i * (nb + 1) + j] = h[i * nb + j] + suffix[(i + 1) * (nb + 1) + j] + suffix[i * (nb + 1) + j + 1] -
                                 suffix[(i + 1) * (nb + 1) + j + 1];
    }
  }
  std::vector<CurvePoint> out;
  for (std::size_t ia = 0; ia < grid_a.size(); ++ia) {
    for (std::size_t ib = 0; ib < grid_b.size(); ++ib) {
      const std::size_t hits = suffix[(ia + 1) * (nb + 1) + (ib + 1)];
      out.push_back({kind, grid_a[ia], grid_b[ib], wilson_estimate(hits, a.size())});
    }
  }
  return out;
}

}  // namespace detail

/// All five metrics on the grid, by sorted-threshold counting.
inline CurveTables sweep(std::span<const LinkSample> samples, const ThresholdGrid& grid) {
  grid.validate();
  std::vector<double> c_all;
  std::vector<double> c_t;
  std::vector<double> r_t;
  std::vector<double> tot_t;
  c_all.reserve(samples.size());
  for (const auto& s : samples) {
    c_all.push_back(comm_sinr(s));
    if (!s.target_present) continue;
    c_t.push_back(comm_sinr(s));
    r_t.push_back(radar_sinr(s));
    tot_t.push_back(radar_total_power(s));
  }
  CurveTables t;
  t.coverage = detail::univariate_curve(MetricKind::kCoverage, grid.eta_c, c_all);
  t.success = detail::univariate_curve(MetricKind::kSuccess, grid.eta_r, r_t);
  t.detection = detail::univariate_curve(MetricKind::kDetection, grid.gamma_r, tot_t);
  t.jrdccp = detail::joint_curve(MetricKind::kJrdccp, grid.eta_c, grid.gamma_r, c_t, tot_t);
  t.jrsccp = detail::joint_curve(MetricKind::kJrsccp, grid.eta_c, grid.eta_r, c_t, r_t);
  return t;
}

}  // namespace v2x_isac
