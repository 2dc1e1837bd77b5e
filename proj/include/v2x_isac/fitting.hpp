#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/tools/minima.hpp>

#include "v2x_isac/config.hpp"
#include "v2x_isac/propagation.hpp"
#include "v2x_isac/samples.hpp"
#include "v2x_isac/units.hpp"

namespace v2x_isac {

/// Degenerate regression design (fewer than two distinct distances).
class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct FitResult {
  double alpha_hat = 0.0;
  double beta_hat_db = 0.0;
  double rms_db = 0.0;
  std::size_t n = 0;
  std::size_t n_zero_excluded = 0;

  PathLossParams params() const { return {alpha_hat, beta_hat_db}; }
};

/// Least squares in the log-log domain on the path loss
///   10 log10(reference_w / power) = beta_db + alpha 10 log10(r).
/// `reference_w` is the received power at 1 m with beta = 1, so the fitted
/// beta plugs straight into rho_factor. Zero-power rows are skipped.
inline FitResult fit_path_loss(std::span<const LinkObservation> obs, double reference_w = 1.0) {
  FitResult fit;
  std::vector<double> xs;
  std::vector<double> ys;
  for (const auto& o : obs) {
    if (!(o.power > 0.0)) {
      ++fit.n_zero_excluded;
      continue;
    }
    if (!(o.r > 0.0)) throw std::invalid_argument("fit_path_loss: distance must be > 0");
    xs.push_back(10.0 * std::log10(o.r));
    ys.push_back(10.0 * std::log10(reference_w / o.power));
  }
  const std::size_t n = xs.size();
  if (n < 2) throw FitError("fit_path_loss: need at least two positive-power observations");
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  if (!(sxx > 1e-12 * static_cast<double>(n))) throw FitError("fit_path_loss: all distances equal (rank deficient)");
  fit.alpha_hat = sxy / sxx;
  fit.beta_hat_db = my - fit.alpha_hat * mx;
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = ys[i] - fit.beta_hat_db - fit.alpha_hat * xs[i];
    ss += e * e;
  }
  fit.rms_db = std::sqrt(ss / static_cast<double>(n));
  fit.n = n;
  return fit;
}

struct SplitFit {
  std::optional<FitResult> mixed;
  std::optional<FitResult> los;
  std::optional<FitResult> nlos;
};

inline std::optional<FitResult> try_fit(std::span<const LinkObservation> obs, double reference_w) {
  try {
    return fit_path_loss(obs, reference_w);
  } catch (const FitError&) {
    return std::nullopt;
  }
}

/// Mixed fit on every row; LoS and NLoS fits on the flagged subsets.
inline SplitFit split_and_fit(std::span<const LinkObservation> obs, double reference_w = 1.0) {
  std::vector<LinkObservation> los;
  std::vector<LinkObservation> nlos;
  for (const auto& o : obs) {
    if (!o.los) continue;
    (*o.los ? los : nlos).push_back(o);
  }
  return {try_fit(obs, reference_w), try_fit(los, reference_w), try_fit(nlos, reference_w)};
}

struct D2Fit {
  double d2_hat = 0.0;
  double objective = 0.0;
  bool at_boundary = false;  // optimum sits on the bracket edge
  std::size_t n = 0;
};

/// Sum of squared differences between LoS indicators and the d1/d2 model.
inline double los_objective(std::span<const LinkObservation> obs, double d1, double d2) {
  double ss = 0.0;
  for (const auto& o : obs) {
    if (!o.los) continue;
    const double e = (*o.los ? 1.0 : 0.0) - los_probability(o.r, d1, d2);
    ss += e * e;
  }
  return ss;
}

/// Least-squares d2 with d1 held fixed: log-spaced scan of the bracket,
/// then Brent refinement around the best grid point.
inline D2Fit fit_los_d2(std::span<const LinkObservation> obs, double d1, double lo = 1.0, double hi = 1e4) {
  if (!(d1 > 0.0) || !(lo > 0.0) || !(hi > lo)) throw std::invalid_argument("fit_los_d2: invalid d1 or bracket");
  D2Fit out;
  for (const auto& o : obs) out.n += o.los ? 1 : 0;
  if (out.n == 0) throw FitError("fit_los_d2: no observations with LoS flags");

  constexpr int kGrid = 200;
  const double llo = std::log(lo);
  const double lhi = std::log(hi);
  auto at = [&](int i) { return llo + (lhi - llo) * i / (kGrid - 1); };
  int best = 0;
  double best_val = std::numeric_limits<double>::infinity();
  for (int i = 0; i < kGrid; ++i) {
    const double v = los_objective(obs, d1, std::exp(at(i)));
    if (v < best_val) {
      best_val = v;
      best = i;
    }
  }
  if (best == 0 || best == kGrid - 1) {
    out.at_boundary = true;
    out.d2_hat = best == 0 ? lo : hi;
    out.objective = los_objective(obs, d1, out.d2_hat);
    return out;
  }
  auto f = [&](double log_d2) { return los_objective(obs, d1, std::exp(log_d2)); };
  // 2^-22 relative bracket precision in log d2 is below 1e-6 relative in d2.
  auto [log_d2, val] = boost::math::tools::brent_find_minima(f, at(best - 1), at(best + 1), 24);
  out.d2_hat = std::exp(log_d2);
  out.objective = val;
  return out;
}

/// Empirical LoS frequency in log-spaced distance bins (for plotting).
struct LosBin {
  double r_lo = 0.0;
  double r_hi = 0.0;
  std::size_t n = 0;
  double frequency = 0.0;
};

inline std::vector<LosBin> binned_los_frequencies(std::span<const LinkObservation> obs, int bins = 20) {
  double rmin = std::numeric_limits<double>::infinity();
  double rmax = 0.0;
  for (const auto& o : obs) {
    if (!o.los || !(o.r > 0.0)) continue;
    rmin = std::min(rmin, o.r);
    rmax = std::max(rmax, o.r);
  }
  std::vector<LosBin> out;
  if (!(rmax > rmin) || bins < 1) return out;
  const double l0 = std::log(rmin);
  const double step = (std::log(rmax) - l0) / bins;
  out.resize(static_cast<std::size_t>(bins));
  std::vector<std::size_t> hits(out.size(), 0);
  for (int b = 0; b < bins; ++b) {
    out[static_cast<std::size_t>(b)].r_lo = std::exp(l0 + step * b);
    out[static_cast<std::size_t>(b)].r_hi = std::exp(l0 + step * (b + 1));
  }
  for (const auto& o : obs) {
    if (!o.los || !(o.r > 0.0)) continue;
    auto b = static_cast<std::size_t>(std::clamp(static_cast<int>((std::log(o.r) - l0) / step), 0, bins - 1));
    ++out[b].n;
    if (*o.los) ++hits[b];
  }
  for (std::size_t b = 0; b < out.size(); ++b) {
    out[b].frequency = out[b].n ? static_cast<double>(hits[b]) / static_cast<double>(out[b].n) : 0.0;
  }
  return out;
}

struct FadingEstimate {
  FadingSpec spec;
  double k_hat = 0.0;  // +inf when the ratios are deterministic
  double v = 0.0;      // Var(g) / E(g)^2
  std::size_t n = 0;
  bool low_confidence = false;  // fewer than 100 ratios
};

/// Moment-based K factor from the ratios g = S / (fitted mean power).
/// For unit-mean Rician power, Var/E^2 = (2K + 1)/(K + 1)^2, inverted as
/// K = sqrt(1 - v) / (1 - sqrt(1 - v)).
inline FadingEstimate estimate_fading(std::span<const LinkObservation> obs, const FitResult& fitted,
                                      double reference_w = 1.0) {
  FadingEstimate est;
  std::vector<double> g;
  for (const auto& o : obs) {
    if (!(o.power > 0.0) || !(o.r > 0.0)) continue;
    const double model = reference_w / db_to_linear(path_loss_db(fitted.params(), o.r));
    g.push_back(o.power / model);
  }
  est.n = g.size();
  est.low_confidence = est.n < 100;
  if (g.empty()) {
    est.spec = FadingSpec::rayleigh();
    return est;
  }
  double mean = 0.0;
  for (double x : g) mean += x;
  mean /= static_cast<double>(g.size());
  double var = 0.0;
  for (double x : g) var += (x - mean) * (x - mean);
  var /= static_cast<double>(g.size());
  est.v = var / (mean * mean);
  // v below 1e-6 means K above about 2e6: treated as deterministic.
  if (est.v < 1e-6) {
    est.k_hat = std::numeric_limits<double>::infinity();
    est.spec = FadingSpec::none();
  } else if (est.v < 1.0) {
    const double s = std::sqrt(1.0 - est.v);
    est.k_hat = s / (1.0 - s);
    est.spec = est.k_hat < 0.2 ? FadingSpec::rayleigh() : FadingSpec::rician(est.k_hat);
  } else {
    est.k_hat = 0.0;
    est.spec = FadingSpec::rayleigh();
  }
  return est;
}

struct DensityEstimate {
  double value = 0.0;  // 1/m
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t total_count = 0;
  double total_window = 0.0;
};

/// Pooled count over pooled window length, with a score interval for the
/// Poisson count.
inline DensityEstimate estimate_density(std::span<const DensityCount> realizations, double z = 1.959963984540054) {
  DensityEstimate d;
  if (realizations.empty()) return d;
  for (const auto& r : realizations) {
    d.total_count += r.count;
    d.total_window += r.window;
  }
  if (!(d.total_window > 0.0)) throw std::invalid_argument("estimate_density: zero total window length");
  const double n = static_cast<double>(d.total_count);
  d.value = n / d.total_window;
  const double centre = n + z * z / 2.0;
  const double half = z * std::sqrt(n + z * z / 4.0);
  d.ci_low = std::max(0.0, centre - half) / d.total_window;
  d.ci_high = (centre + half) / d.total_window;
  return d;
}

// ---------------------------------------------------------------------------
// Whole-dataset parameter extraction.

struct LinkFitReport {
  LinkKind kind = LinkKind::kRadar;
  SplitFit fits;
  std::optional<D2Fit> d2;
  double d1 = 0.0;
  std::optional<FadingEstimate> fading;
  std::size_t n_observations = 0;
};

struct FitReport {
  LinkFitReport radar;
  LinkFitReport comm;
  LinkFitReport interference;
  DensityEstimate vehicles;
  DensityEstimate interferers;
  DensityEstimate rsus;
  std::vector<std::string> warnings;
};

/// Received power at 1 m with beta = 1 for each link kind.
inline double reference_power(const SystemConfig& sys, LinkKind kind) {
  switch (kind) {
    case LinkKind::kRadar: return rho_factor(sys.P_V, sys.G_R, sys.f_c, 0.0);
    case LinkKind::kComm: return rho_factor(sys.P_L, sys.G_C, sys.f_c, 0.0);
    case LinkKind::kInterference: return rho_factor(sys.P_V, sys.G_I, sys.f_c, 0.0);
  }
  return 1.0;
}

inline FitReport fit_all(const SystemConfig& sys, std::span<const LinkObservation> observations,
                         std::span<const DensityCount> vehicles, std::span<const DensityCount> interferers,
                         std::span<const DensityCount> rsus) {
  FitReport rep;
  rep.vehicles = estimate_density(vehicles);
  rep.interferers = estimate_density(interferers);
  rep.rsus = estimate_density(rsus);

  auto fit_link = [&](LinkKind kind, LinkFitReport& out, std::optional<double> d1) {
    out.kind = kind;
    std::vector<LinkObservation> rows;
    for (const auto& o : observations) {
      if (o.kind == kind) rows.push_back(o);
    }
    out.n_observations = rows.size();
    const double ref = reference_power(sys, kind);
    if (kind == LinkKind::kRadar) {
      out.fits.mixed = try_fit(rows, ref);
    } else {
      out.fits = split_and_fit(rows, ref);
    }
    const char* name = to_string(kind);
    if (!out.fits.mixed) rep.warnings.push_back(std::string(name) + ": not enough data for the mixed fit");
    if (kind != LinkKind::kRadar) {
      if (!out.fits.los) rep.warnings.push_back(std::string(name) + ": not enough LoS data");
      if (!out.fits.nlos) rep.warnings.push_back(std::string(name) + ": not enough NLoS data");
    }
    if (d1) {
      out.d1 = *d1;
      try {
        out.d2 = fit_los_d2(rows, *d1);
        if (out.d2->at_boundary) rep.warnings.push_back(std::string(name) + ": d2 estimate at bracket edge");
      } catch (const FitError& e) {
        rep.warnings.push_back(std::string(name) + ": " + e.what());
      }
    }
    if (out.fits.mixed) {
      out.fading = estimate_fading(rows, *out.fits.mixed, ref);
      if (out.fading->low_confidence) rep.warnings.push_back(std::string(name) + ": fewer than 100 fading ratios");
    }
  };
  fit_link(LinkKind::kRadar, rep.radar, std::nullopt);
  fit_link(LinkKind::kComm, rep.comm, sys.r_Cmin());
  fit_link(LinkKind::kInterference, rep.interference, sys.r_Imin());
  return rep;
}

/// Configuration for the line models with every fitted quantity applied;
/// absent estimates keep the values of `base`.
inline SimulationConfig fitted_config(const SimulationConfig& base, const FitReport& rep) {
  SimulationConfig c = base;
  if (rep.vehicles.total_window > 0.0) c.system.lambda_R = rep.vehicles.value;
  if (rep.interferers.total_window > 0.0) c.system.lambda_I = rep.interferers.value;
  if (rep.rsus.total_window > 0.0) c.system.lambda_C = rep.rsus.value;
  auto apply = [](LinkPropagation& l, const LinkFitReport& r) {
    if (r.fits.mixed) l.mixed = r.fits.mixed->params();
    if (r.fits.los) l.los = r.fits.los->params();
    if (r.fits.nlos) l.nlos = r.fits.nlos->params();
    if (r.d2) {
      l.d1 = r.d1;
      l.d2 = r.d2->d2_hat;
    }
    if (r.fading) l.fading = r.fading->spec;
  };
  apply(c.propagation.radar, rep.radar);
  apply(c.propagation.comm, rep.comm);
  apply(c.propagation.interference, rep.interference);
  if (rep.interference.fading) c.propagation.sg_interferer_fading = rep.interference.fading->spec;
  return c;
}

}  // namespace v2x_isac
