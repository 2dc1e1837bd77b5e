// Acceptance checks. One PASS/FAIL line per criterion; exit status is the
// number of failed criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "v2x_isac/analytic.hpp"
#include "v2x_isac/engines.hpp"
#include "v2x_isac/fitting.hpp"
#include "v2x_isac/metrics.hpp"
#include "v2x_isac/sample_io.hpp"

using namespace v2x_isac;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void report(int id, const std::string& name, bool ok, const std::string& detail) {
  std::printf("%s %d %s: %s\n", ok ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

unsigned threads() { return default_thread_count(); }

// ---------------------------------------------------------------------------
// 1. Metric identities.

bool identities_hold(const std::vector<LinkSample>& samples, const ThresholdGrid& g, std::string& why) {
  const CurveTables t = sweep(samples, g);
  std::vector<LinkSample> with_target;
  bool positive_interference = true;
  for (const auto& s : samples) {
    if (s.target_present) with_target.push_back(s);
    positive_interference = positive_interference && s.i_total > 0.0;
  }
  // Joint metrics share the target-present population with S and D, so C
  // is evaluated on it too.
  const CurveTables ct = sweep(with_target, g);
  auto nonincreasing = [](const std::vector<CurvePoint>& v, std::size_t stride, std::size_t outer) {
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t i = 1; i < stride; ++i) {
        if (v[o * stride + i].estimate.value > v[o * stride + i - 1].estimate.value) return false;
      }
    }
    return true;
  };
  auto nonincreasing_outer = [](const std::vector<CurvePoint>& v, std::size_t stride, std::size_t outer) {
    for (std::size_t o = 1; o < outer; ++o) {
      for (std::size_t i = 0; i < stride; ++i) {
        if (v[o * stride + i].estimate.value > v[(o - 1) * stride + i].estimate.value) return false;
      }
    }
    return true;
  };
  const std::size_t nc = g.eta_c.size();
  const std::size_t nr = g.eta_r.size();
  const std::size_t ng = g.gamma_r.size();
  if (!nonincreasing(t.coverage, nc, 1) || !nonincreasing(t.success, nr, 1) || !nonincreasing(t.detection, ng, 1) ||
      !nonincreasing(t.jrdccp, ng, nc) || !nonincreasing_outer(t.jrdccp, ng, nc) || !nonincreasing(t.jrsccp, nr, nc) ||
      !nonincreasing_outer(t.jrsccp, nr, nc)) {
    why = "curve not nonincreasing";
    return false;
  }
  for (std::size_t i = 0; i < nc; ++i) {
    const double c = ct.coverage[i].estimate.value;
    for (std::size_t j = 0; j < ng; ++j) {
      if (t.jrdccp[i * ng + j].estimate.value > std::min(c, t.detection[j].estimate.value)) {
        why = "J_D > min(C, D)";
        return false;
      }
    }
    for (std::size_t j = 0; j < nr; ++j) {
      const double js = t.jrsccp[i * nr + j].estimate.value;
      if (js > std::min(c, t.success[j].estimate.value)) {
        why = "J_S > min(C, S)";
        return false;
      }
      if (positive_interference && g.eta_c[i] * g.eta_r[j] >= 1.0 && js != 0.0) {
        why = "J_S > 0 with eta_c * eta_r >= 1";
        return false;
      }
    }
  }
  return true;
}

void criterion_1() {
  const SimulationConfig c = default_config();
  const auto t0 = Clock::now();
  std::string why;
  bool ok = true;
  for (EngineKind e : {EngineKind::kSg, EngineKind::kMc}) {
    const SampleSet set = run_batch(e, c, 100000, 101, threads());
    if (!identities_hold(set.samples, c.thresholds, why)) {
      ok = false;
      why = std::string(to_string(e)) + ": " + why;
      break;
    }
  }
  const double dt = seconds_since(t0);
  report(1, "metric identities", ok && dt < 60.0,
         fmt("sg and mc at n=1e5, %.1f s (limit 60 s)%s%s", dt, why.empty() ? "" : ", ", why.c_str()));
}

// ---------------------------------------------------------------------------
// 2. Analytic coverage against SG simulation.

void criterion_2() {
  const SimulationConfig c = default_config();
  const auto t0 = Clock::now();
  const SampleSet set = run_batch(EngineKind::kSg, c, 1000000, 2024, threads());
  int inside = 0;
  int total = 0;
  double worst = 0.0;
  for (double db = -20.0; db <= 20.0 + 1e-9; db += 2.0) {
    const double eta = db_to_linear(db);
    const MetricEstimate mc = coverage(set.samples, eta);
    const double a = sg_coverage_analytic(c, eta);
    ++total;
    if (a >= mc.ci_low && a <= mc.ci_high) ++inside;
    worst = std::max(worst, std::abs(a - mc.value));
    std::printf("    eta_c %+5.1f dB: analytic %.5f, simulated %.5f [%.5f, %.5f]\n", db, a, mc.value, mc.ci_low,
                mc.ci_high);
  }
  const double dt = seconds_since(t0);
  report(2, "analytic coverage vs sg simulation", inside == total && total >= 10 && dt < 600.0,
         fmt("%d/%d thresholds inside the 95%% Wilson CI at n=1e6, max |diff| %.2e, %.1f s (limit 600 s)", inside, total,
             worst, dt));
}

// ---------------------------------------------------------------------------
// 3. MC degenerates to SG.

SimulationConfig degenerate(const SimulationConfig& base) {
  SimulationConfig c = base;
  for (LinkPropagation* l : {&c.propagation.comm, &c.propagation.interference}) {
    l->los = l->mixed;
    l->nlos = l->mixed;
    l->d1 = 1e9;
    l->fading = FadingSpec::none();
  }
  c.propagation.interference.fading = c.propagation.sg_interferer_fading;
  c.propagation.radar.fading = FadingSpec::none();
  return c;
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

void criterion_3() {
  const SimulationConfig c = degenerate(default_config());
  const std::size_t n = 100000;
  const SampleSet sg = run_batch(EngineKind::kSg, c, n, 303, threads());
  const SampleSet mc = run_batch(EngineKind::kMc, c, n, 303, threads());
  std::size_t mismatches = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& a = sg.samples[i];
    const auto& b = mc.samples[i];
    if (!same_bits(a.s_r, b.s_r) || !same_bits(a.s_c, b.s_c) || !same_bits(a.i_total, b.i_total) ||
        a.target_present != b.target_present) {
      ++mismatches;
    }
  }
  report(3, "mc/sg degeneracy", mismatches == 0, fmt("%zu of %zu samples differ in any bit", mismatches, n));
}

// ---------------------------------------------------------------------------
// 4. Ray-tracer physics.

double specular_residual(const RayPath& p, std::span<const Obstacle> obstacles) {
  double worst = 0.0;
  for (std::size_t k = 0; k < p.interactions.size(); ++k) {
    const auto& in = p.interactions[k];
    if (in.kind != InteractionKind::kReflection) continue;
    const Vec2 nrm = face_of(obstacles[static_cast<std::size_t>(in.block)].rect, in.index).normal;
    const Vec2 v = p.vertices[k + 1].plan();
    const Vec2 a = p.vertices[k].plan() - v;
    const Vec2 b = p.vertices[k + 2].plan() - v;
    const double ta = std::atan2(std::abs(cross(a, nrm)), dot(a, nrm));
    const double tb = std::atan2(std::abs(cross(b, nrm)), dot(b, nrm));
    worst = std::max(worst, std::abs(ta - tb));
  }
  return worst;
}

std::vector<std::pair<double, double>> multiset(const PathSet& s) {
  std::vector<std::pair<double, double>> v;
  for (const auto& p : s.paths) v.emplace_back(p.length, std::abs(p.amplitude));
  std::sort(v.begin(), v.end());
  return v;
}

bool same_multiset(const PathSet& a, const PathSet& b) {
  const auto x = multiset(a);
  const auto y = multiset(b);
  if (x.size() != y.size()) return false;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (std::abs(x[i].first - y[i].first) > 1e-9 * x[i].first) return false;
    if (std::abs(x[i].second - y[i].second) > 1e-9 * x[i].second + 1e-30) return false;
  }
  return true;
}

void criterion_4() {
  const SimulationConfig cfg = default_config();
  const SystemConfig& sys = cfg.system;
  const double lambda = kSpeedOfLight / sys.f_c;

  double worst_friis = 0.0;
  for (int i = 0; i < 20; ++i) {
    const double d = std::pow(10.0, 3.0 * i / 19.0);
    const PathSet s = trace_link({0, 0, 1.5}, {d, 0, 1.5}, {}, cfg.raytracer, sys.f_c);
    const double friis = sys.P_V * std::pow(lambda / (4.0 * kPi * d), 2);
    worst_friis = std::max(worst_friis, std::abs(linear_to_db(received_power(s, sys.P_V, 1.0) / friis)));
  }

  // Reflection-then-diffraction chains and antenna patterns are not
  // symmetric under TX/RX swap by construction; reciprocity is checked on
  // the symmetric part of the tracer.
  RayTracerConfig rc = cfg.raytracer;
  rc.diffraction_after_reflection = false;
  int reciprocal = 0;
  int links = 0;
  std::size_t paths = 0;
  double worst_spec = 0.0;
  for (std::uint64_t i = 0; i < 100; ++i) {
    Rng rng = Rng::substream(404, i);
    const RtScene scene = build_rt_scene(sys, rng);
    const auto obs = obstacles_of(scene);
    std::vector<std::pair<Vec3, Vec3>> pairs;
    const Vec3 rsu = scene.rsu_nodes.empty() ? Vec3{sys.radar_rx.x + 60.0, sys.rsu_y, sys.rsu_height}
                                              : scene.rsu_nodes.front();
    pairs.emplace_back(rsu, sys.radar_rx);
    for (const auto& v : scene.vehicles) {
      if (v.interferer) {
        pairs.emplace_back(Vec3{v.rect.xmin, sys.opposite_lane_y, sys.interferer_height}, sys.radar_rx);
        break;
      }
    }
    for (const auto& [a, b] : pairs) {
      const PathSet ab = trace_link(a, b, obs, rc, sys.f_c);
      const PathSet ba = trace_link(b, a, obs, rc, sys.f_c);
      ++links;
      if (same_multiset(ab, ba)) ++reciprocal;
      for (const auto* set : {&ab, &ba}) {
        for (const auto& p : set->paths) {
          worst_spec = std::max(worst_spec, specular_residual(p, obs));
          ++paths;
        }
      }
    }
    // Traces of the engine links, full tracer configuration.
    const Rng stream = Rng::substream(405, i);
    Rng scene_rng = stream.child(StreamTag::kScene);
    const auto full_obs = obstacles_of(build_rt_scene(sys, scene_rng));
    for (const auto& set : run_rt_realization(cfg, stream, true).traces) {
      for (const auto& p : set.paths) {
        worst_spec = std::max(worst_spec, specular_residual(p, full_obs));
        ++paths;
      }
    }
  }
  const bool ok = worst_friis <= 0.01 && reciprocal == links && worst_spec < 1e-9;
  report(4, "ray-tracer physics", ok,
         fmt("Friis max dev %.2e dB over 20 ranges; %d/%d links reciprocal on 100 scenes; max specular residual "
             "%.2e rad over %zu paths",
             worst_friis, reciprocal, links, worst_spec, paths));
}

// ---------------------------------------------------------------------------
// 5. Fitting round trips.

std::vector<LinkObservation> synthetic_power_law(PathLossParams p, std::size_t n, double noise_db, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> logr(std::log(5.0), std::log(1000.0));
  std::normal_distribution<double> noise(0.0, noise_db);
  std::vector<LinkObservation> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double r = std::exp(logr(gen));
    const double loss = p.beta_db + 10.0 * p.alpha * std::log10(r) + (noise_db > 0.0 ? noise(gen) : 0.0);
    out.push_back({LinkKind::kComm, r, db_to_linear(-loss), std::nullopt, 0});
  }
  return out;
}

void criterion_5() {
  std::vector<std::string> notes;
  bool ok = true;

  const FitResult exact = fit_path_loss(synthetic_power_law({2.2, 0.42}, 1000, 0.0, 1));
  const bool a0 = std::abs(exact.alpha_hat - 2.2) < 1e-9 && std::abs(exact.beta_hat_db - 0.42) < 1e-8;
  const FitResult noisy = fit_path_loss(synthetic_power_law({2.2, 0.42}, 10000, 8.0, 2));
  const bool a1 = std::abs(noisy.alpha_hat - 2.2) <= 0.05 && std::abs(noisy.beta_hat_db - 0.42) <= 1.0;
  ok = ok && a0 && a1;
  notes.push_back(fmt("(a) noiseless alpha err %.1e; noisy alpha %.4f beta %.3f dB", std::abs(exact.alpha_hat - 2.2),
                      noisy.alpha_hat, noisy.beta_hat_db));

  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> ur(1.0, 1000.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::string b;
  for (auto [d1, d2] : {std::pair{16.0875, 43.95}, std::pair{4.3456, 110.44}}) {
    std::vector<LinkObservation> obs;
    for (int i = 0; i < 100000; ++i) {
      const double r = ur(gen);
      obs.push_back({LinkKind::kComm, r, 1.0, u(gen) < los_probability(r, d1, d2), 0});
    }
    const D2Fit f = fit_los_d2(obs, d1);
    const bool hit = std::abs(f.d2_hat / d2 - 1.0) <= 0.05;
    ok = ok && hit;
    b += fmt(" %.2f->%.2f", d2, f.d2_hat);
  }
  notes.push_back("(b) d2" + b);

  const FitResult model{2.0, 10.0, 0.0, 0, 0};
  auto faded = [&](FadingSpec spec, std::uint64_t seed) {
    auto obs = synthetic_power_law({2.0, 10.0}, 100000, 0.0, seed);
    Rng rng(seed);
    for (auto& o : obs) o.power *= sample_fading(spec, rng);
    return estimate_fading(obs, model);
  };
  const FadingEstimate ray = faded(FadingSpec::rayleigh(), 6);
  bool c_ok = ray.spec.kind == FadingKind::kRayleigh;
  std::string c = fmt("(c) Exp(1) -> %s", to_string(ray.spec.kind));
  for (double k : {1.0, 5.0, 10.0}) {
    const FadingEstimate e = faded(FadingSpec::rician(k), 7 + static_cast<std::uint64_t>(k));
    c_ok = c_ok && e.spec.kind == FadingKind::kRician && std::abs(e.k_hat / k - 1.0) <= 0.2;
    c += fmt(", K %.0f -> %.3f", k, e.k_hat);
  }
  ok = ok && c_ok;
  notes.push_back(c);

  std::string detail;
  for (const auto& n : notes) detail += (detail.empty() ? "" : "; ") + n;
  report(5, "fitting round trips", ok, detail);
}

// ---------------------------------------------------------------------------
// 6. Ray-traced dataset, fitted models, framework gaps.

double max_gap_over_pairs(MetricKind m, const std::vector<std::pair<std::string, CurveTables>>& curves) {
  double worst = 0.0;
  for (std::size_t i = 0; i < curves.size(); ++i) {
    for (std::size_t j = i + 1; j < curves.size(); ++j) {
      worst = std::max(worst,
                       max_gap(m, curves[i].first, curves[i].second, curves[j].first, curves[j].second).max_abs_gap);
    }
  }
  return worst;
}

void criterion_6() {
  const SimulationConfig base = default_config();
  const std::size_t n = 10000;
  const auto t0 = Clock::now();
  std::vector<RtRealization> details;
  const SampleSet rt = run_batch(EngineKind::kRt, base, n, 606, threads(), &details);
  const double t_rt = seconds_since(t0);

  std::vector<LinkObservation> obs;
  std::vector<DensityCount> veh;
  std::vector<DensityCount> intf;
  std::vector<DensityCount> rsu;
  for (const auto& d : details) {
    obs.insert(obs.end(), d.observations.begin(), d.observations.end());
    veh.push_back(d.same_lane_vehicles);
    intf.push_back(d.interferers);
    rsu.push_back(d.rsus);
  }
  details.clear();
  const FitReport rep = fit_all(base.system, obs, veh, intf, rsu);
  const SimulationConfig fitted = fitted_config(base, rep);

  const double a_c = rep.comm.fits.mixed ? rep.comm.fits.mixed->alpha_hat : std::nan("");
  const double a_i = rep.interference.fits.mixed ? rep.interference.fits.mixed->alpha_hat : std::nan("");
  const double d2_c = rep.comm.d2 ? rep.comm.d2->d2_hat : std::nan("");
  const double d2_i = rep.interference.d2 ? rep.interference.d2->d2_hat : std::nan("");
  const double dens = rep.vehicles.value;
  std::printf("    rt n=%zu in %.1f s; alpha_C %.3f, alpha_I %.3f, alpha_R %.3f; d2_C %.2f m, d2_I %.2f m; "
              "vehicle density %.2f /km, interferers %.2f /km, rsus %.2f /km\n",
              n, t_rt, a_c, a_i, rep.radar.fits.mixed ? rep.radar.fits.mixed->alpha_hat : std::nan(""), d2_c, d2_i,
              dens * 1e3, rep.interferers.value * 1e3, rep.rsus.value * 1e3);
  for (const auto& w : rep.warnings) std::printf("    fit warning: %s\n", w.c_str());

  std::vector<std::pair<std::string, CurveTables>> curves;
  curves.emplace_back("rt", sweep(rt.samples, base.thresholds));
  curves.emplace_back("sg", sweep(run_batch(EngineKind::kSg, fitted, 100000, 607, threads()).samples, base.thresholds));
  bool mc_ok = true;
  try {
    curves.emplace_back("mc",
                        sweep(run_batch(EngineKind::kMc, fitted, 100000, 608, threads()).samples, base.thresholds));
  } catch (const ConfigError& e) {
    mc_ok = false;
    std::printf("    mc skipped: %s\n", e.what());
  }
  const double g_c = max_gap_over_pairs(MetricKind::kCoverage, curves);
  const double g_s = max_gap_over_pairs(MetricKind::kSuccess, curves);
  const double g_d = max_gap_over_pairs(MetricKind::kDetection, curves);
  const double g_jd = max_gap_over_pairs(MetricKind::kJrdccp, curves);
  const double g_js = max_gap_over_pairs(MetricKind::kJrsccp, curves);
  const double dt = seconds_since(t0);

  const bool o1 = a_i > a_c;
  const bool o2 = d2_i < d2_c;
  const bool o3 = dens < base.system.lambda_R;
  const bool o4 = std::max(g_jd, g_js) > std::max(g_c, g_s);
  report(6, "directional reproduction", o1 && o2 && o3 && o4 && mc_ok && dt < 1800.0,
         fmt("alpha_I %.2f > alpha_C %.2f [%s]; d2_I %.1f < d2_C %.1f [%s]; density %.2f < %.0f /km [%s]; "
             "max gap J_D %.3f, J_S %.3f vs C %.3f, S %.3f (D %.3f) [%s]; %.0f s (limit 1800 s)",
             a_i, a_c, o1 ? "ok" : "no", d2_i, d2_c, o2 ? "ok" : "no", dens * 1e3, base.system.lambda_R * 1e3,
             o3 ? "ok" : "no", g_jd, g_js, g_c, g_s, g_d, o4 ? "ok" : "no", dt));
}

// ---------------------------------------------------------------------------
// 7. Thread-count invariance of written output.

std::string serialized(const SampleSet& s) {
  std::ostringstream os;
  write_samples_csv(os, s);
  write_samples_binary(os, s);
  write_curves_csv(os, s.config_digest, s.seed, {{to_string(s.engine), sweep(s.samples, default_config().thresholds)}});
  return os.str();
}

void criterion_7() {
  const SimulationConfig c = default_config();
  std::string detail;
  bool ok = true;
  for (auto [e, n] : {std::pair{EngineKind::kSg, std::size_t{20000}}, std::pair{EngineKind::kMc, std::size_t{20000}},
                      std::pair{EngineKind::kRt, std::size_t{200}}}) {
    const std::string one = serialized(run_batch(e, c, n, 707, 1));
    bool same = true;
    for (unsigned t : {2u, 3u, 8u}) same = same && serialized(run_batch(e, c, n, 707, t)) == one;
    ok = ok && same;
    detail += fmt("%s%s n=%zu %s", detail.empty() ? "" : ", ", to_string(e), n, same ? "identical" : "DIFFERS");
  }
  report(7, "determinism across thread counts", ok, detail + " (threads 1, 2, 3, 8)");
}

}  // namespace

int main() {
  const std::vector<std::function<void()>> criteria{criterion_1, criterion_2, criterion_3, criterion_4,
                                                    criterion_5, criterion_6, criterion_7};
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    try {
      criteria[i]();
    } catch (const std::exception& e) {
      report(static_cast<int>(i + 1), "exception", false, e.what());
    }
  }
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
