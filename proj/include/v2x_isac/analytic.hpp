#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "v2x_isac/config.hpp"
#include "v2x_isac/propagation.hpp"
#include "v2x_isac/units.hpp"

namespace v2x_isac {

class UnsupportedModelError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct QuadratureSpec {
  /// Log-spaced panels for the interference exponent integral.
  int interference_panels = 48;
  /// Euler inversion: discretization parameter and series lengths.
  double euler_a = 18.4;
  int euler_n = 15;
  int euler_m = 11;
  /// Adaptive Gauss-Kronrod over the distance densities.
  double tolerance = 1e-9;
  unsigned max_depth = 12;
  /// Points of the log-spaced interference CDF table; 0 inverts on every call.
  int table_points = 4096;
};

/// CDF of the aggregate interference of a PPP of Rayleigh-faded interferers
/// on [lo, hi] with per-node mean power g(x) = rho (x^2 + d^2)^(-alpha/2).
/// Inverts the Laplace transform of the CDF, L(s)/s, with Euler summation.
class InterferenceCdf {
 public:
  InterferenceCdf(double lambda, double rho, double alpha, double offset, double lo, double hi,
                  const QuadratureSpec& q = {})
      : lambda_(lambda), q_(q) {
    mass_ = lambda * std::max(hi - lo, 0.0);
    if (!(mass_ > 0.0)) return;
    const double llo = std::log(std::max(lo, 1e-9));
    const double lhi = std::log(hi);
    const double lo_eff = std::max(lo, 1e-9);
    using Gauss = boost::math::quadrature::gauss<double, 10>;
    const auto& abscissa = Gauss::abscissa();
    const auto& weights = Gauss::weights();
    auto add_node = [&](double x, double w) {
      nodes_g_.push_back(rho * std::pow(x * x + offset * offset, -alpha / 2.0));
      nodes_w_.push_back(w);
    };
    const double width = (lhi - llo) / q.interference_panels;
    for (int p = 0; p < q.interference_panels; ++p) {
      const double mid = llo + width * (p + 0.5);
      for (std::size_t k = 0; k < abscissa.size(); ++k) {
        for (int sign : {-1, 1}) {
          if (abscissa[k] == 0.0 && sign < 0) continue;
          const double u = mid + sign * abscissa[k] * width / 2.0;
          const double x = std::exp(u);
          add_node(x, weights[k] * width / 2.0 * x);
        }
      }
    }
    // Window starting at 0: one midpoint node for [lo, 1e-9].
    if (lo < lo_eff) add_node(lo_eff / 2.0, lo_eff - lo);
    if (q.table_points >= 4) build_table(*std::max_element(nodes_g_.begin(), nodes_g_.end()));
  }

  /// P(I = 0): no interferer in the window.
  double atom() const { return std::exp(-mass_); }

  std::complex<double> laplace(std::complex<double> s) const {
    std::complex<double> acc = 0.0;
    for (std::size_t i = 0; i < nodes_g_.size(); ++i) {
      const std::complex<double> sg = s * nodes_g_[i];
      acc += nodes_w_[i] * sg / (1.0 + sg);
    }
    return std::exp(-lambda_ * acc);
  }

  /// P(I <= t), interpolated from the table when one was built.
  double operator()(double t) const {
    if (t < 0.0) return 0.0;
    if (!(mass_ > 0.0)) return 1.0;
    if (t == 0.0) return atom();
    if (std::isinf(t)) return 1.0;
    if (table_.empty()) return exact(t);
    const double u = (std::log(t) - u0_) / du_;
    const auto last = static_cast<double>(table_.size() - 1);
    if (u <= 0.0) return atom() + (table_.front() - atom()) * t / std::exp(u0_);
    if (u >= last) return table_.back();
    // Cubic Hermite in log t with central-difference slopes.
    const auto i = static_cast<std::size_t>(u);
    const double h = u - static_cast<double>(i);
    auto at = [&](std::ptrdiff_t k) {
      return table_[static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(k, 0, std::ssize(table_) - 1))];
    };
    const auto k = static_cast<std::ptrdiff_t>(i);
    const double y0 = at(k);
    const double y1 = at(k + 1);
    const double m0 = (at(k + 1) - at(k - 1)) / 2.0;
    const double m1 = (at(k + 2) - at(k)) / 2.0;
    const double h2 = h * h;
    const double h3 = h2 * h;
    const double y = (2 * h3 - 3 * h2 + 1) * y0 + (h3 - 2 * h2 + h) * m0 + (-2 * h3 + 3 * h2) * y1 + (h3 - h2) * m1;
    return std::clamp(y, atom(), 1.0);
  }

  /// P(I <= t) by direct Euler inversion.
  double exact(double t) const {
    if (t < 0.0) return 0.0;
    if (!(mass_ > 0.0)) return 1.0;
    if (t == 0.0) return atom();
    if (std::isinf(t)) return 1.0;
    const double a = q_.euler_a;
    const int n = q_.euler_n;
    const int m = q_.euler_m;
    auto term = [&](int k) {
      const std::complex<double> s((a / (2.0 * t)), k * kPi / t);
      return (laplace(s) / s).real();
    };
    const double scale = std::exp(a / 2.0) / t;
    std::vector<double> partial(static_cast<std::size_t>(n + m + 1));
    double sum = term(0) / 2.0;
    for (int k = 0; k <= n + m; ++k) {
      if (k > 0) sum += (k % 2 ? -1.0 : 1.0) * term(k);
      partial[static_cast<std::size_t>(k)] = sum;
    }
    // Binomial averaging of the partial sums n..n+m.
    double result = 0.0;
    double binom = 1.0;
    for (int j = 0; j <= m; ++j) {
      result += binom * partial[static_cast<std::size_t>(n + j)];
      binom = binom * (m - j) / (j + 1);
    }
    result *= scale * std::ldexp(1.0, -m);
    return std::clamp(result, atom(), 1.0);
  }

 private:
  // Grid from 1e-12 to 1e4 times the strongest single-node mean power.
  void build_table(double g_max) {
    u0_ = std::log(g_max * 1e-12);
    du_ = (std::log(g_max * 1e4) - u0_) / (q_.table_points - 1);
    table_.resize(static_cast<std::size_t>(q_.table_points));
    for (std::size_t i = 0; i < table_.size(); ++i) table_[i] = exact(std::exp(u0_ + du_ * static_cast<double>(i)));
  }

  double lambda_ = 0.0;
  double mass_ = 0.0;
  QuadratureSpec q_;
  std::vector<double> nodes_g_;
  std::vector<double> nodes_w_;
  std::vector<double> table_;
  double u0_ = 0.0;
  double du_ = 1.0;
};

/// Coverage P(S_C >= eta_c (S_R + I)) of the line model used by the sg
/// engine, with the nearest-target and nearest-RSU distances integrated
/// against their densities. `eta_c` is linear.
inline double sg_coverage_analytic(const SimulationConfig& cfg, double eta_c, const QuadratureSpec& q = {}) {
  const SystemConfig& sys = cfg.system;
  const PropagationModel& prop = cfg.propagation;
  if (prop.sg_interferer_fading.kind != FadingKind::kRayleigh) {
    throw UnsupportedModelError("sg_coverage_analytic: only Rayleigh interferer fading is supported");
  }
  if (!(eta_c >= 0.0)) throw std::invalid_argument("sg_coverage_analytic: threshold must be >= 0");
  if (eta_c == 0.0) return 1.0;

  const double L = sys.street_length;
  const double i_lo = std::min(sys.r_Imin(), L);
  const double c_lo = std::min(sys.r_Cmin(), L);
  const InterferenceCdf cdf(sys.lambda_I, rho_factor(sys.P_V, sys.G_I, sys.f_c, prop.interference.mixed.beta_db),
                            prop.interference.mixed.alpha, sys.d_I, i_lo, L, q);
  const double rho_r = rho_factor(sys.P_V, sys.G_R, sys.f_c, prop.radar.mixed.beta_db);
  const double alpha_r = prop.radar.mixed.alpha;
  const double rho_c = rho_factor(sys.P_L, sys.G_C, sys.f_c, prop.comm.mixed.beta_db);
  const double alpha_c = prop.comm.mixed.alpha;
  const double lam_r = sys.lambda_R;
  const double lam_c = sys.lambda_C;
  const double r_lo = sys.r_Rmin;
  const double r_hi = sys.r_Rmax;
  const double no_target = std::exp(-lam_r * std::max(r_hi - r_lo, 0.0));
  const double no_rsu = std::exp(-lam_c * std::max(L - c_lo, 0.0));

  using GK = boost::math::quadrature::gauss_kronrod<double, 31>;

  // Coverage given the serving signal power S_C.
  auto given_signal = [&](double s_c) {
    const double budget = s_c / eta_c;
    double p = no_target * cdf(budget);
    if (lam_r > 0.0 && r_hi > r_lo) {
      // S_R <= budget iff r >= root; below the root coverage is impossible.
      const double root = std::pow(rho_r / budget, 1.0 / alpha_r);
      const double a = std::max(r_lo, root);
      if (a < r_hi) {
        auto f = [&](double r) {
          return lam_r * std::exp(-lam_r * (r - r_lo)) * cdf(budget - radar_power(rho_r, alpha_r, r));
        };
        p += GK::integrate(f, a, r_hi, q.max_depth, q.tolerance);
      }
    }
    return p;
  };

  double total = 0.0;
  if (lam_c > 0.0 && L > c_lo) {
    auto f = [&](double r) {
      return lam_c * std::exp(-lam_c * (r - c_lo)) * given_signal(comm_power(rho_c, alpha_c, r, sys.d_C));
    };
    total += GK::integrate(f, c_lo, L, q.max_depth, q.tolerance);
  }
  // Without an RSU the SINR is 0/0 (counted as covered) only when the
  // disturbance is zero as well.
  total += no_rsu * no_target * cdf.atom();
  return std::clamp(total, 0.0, 1.0);
}

}  // namespace v2x_isac
