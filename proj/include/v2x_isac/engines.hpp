#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

#include "v2x_isac/config.hpp"
#include "v2x_isac/propagation.hpp"
#include "v2x_isac/raytracer.hpp"
#include "v2x_isac/rng.hpp"
#include "v2x_isac/samples.hpp"
#include "v2x_isac/scene.hpp"

namespace v2x_isac {

/// Stochastic-geometry realization: deterministic radar and communication
/// links, faded interferers.
inline LinkSample run_sg_realization(const SimulationConfig& cfg, const Rng& stream) {
  const SystemConfig& sys = cfg.system;
  const PropagationModel& prop = cfg.propagation;
  Rng scene_rng = stream.child(StreamTag::kScene);
  const LineScene scene = build_line_scene(sys, scene_rng);

  LinkSample s;
  if (auto r = nearest_in_window(scene.radar_targets, sys.r_Rmin, sys.r_Rmax)) {
    s.target_present = true;
    s.r_r = *r;
    s.s_r = radar_power(rho_factor(sys.P_V, sys.G_R, sys.f_c, prop.radar.mixed.beta_db), prop.radar.mixed.alpha, *r);
  }
  if (!scene.rsus.empty()) {
    s.r_c = scene.rsus.front();
    s.s_c = comm_power(rho_factor(sys.P_L, sys.G_C, sys.f_c, prop.comm.mixed.beta_db), prop.comm.mixed.alpha,
                       *s.r_c, sys.d_C);
  }
  Rng fading_rng = stream.child(StreamTag::kFadingInterference);
  std::vector<double> fadings(scene.interferers.size());
  for (auto& h : fadings) h = sample_fading(prop.sg_interferer_fading, fading_rng);
  s.i_total = interference_power(scene.interferers, fadings,
                                 rho_factor(sys.P_V, sys.G_I, sys.f_c, prop.interference.mixed.beta_db),
                                 prop.interference.mixed.alpha, sys.d_I);
  s.s_r_raw = s.s_r;
  return s;
}

inline void require_los_model(const LinkPropagation& l, const char* path) {
  if (!l.los) throw ConfigError(std::string(path) + ".los", "LoS path-loss parameters required by the mc engine");
  if (!l.nlos) throw ConfigError(std::string(path) + ".nlos", "NLoS path-loss parameters required by the mc engine");
  if (!l.d1) throw ConfigError(std::string(path) + ".d1_m", "LoS model d1 required by the mc engine");
  if (!l.d2) throw ConfigError(std::string(path) + ".d2_m", "LoS model d2 required by the mc engine");
}

/// Monte-Carlo realization: line scene as in the SG model, plus LoS/NLoS
/// marking of the serving RSU and every interferer by independent thinning
/// with the d1/d2 probability, and fading on every link.
inline LinkSample run_mc_realization(const SimulationConfig& cfg, const Rng& stream) {
  const SystemConfig& sys = cfg.system;
  const PropagationModel& prop = cfg.propagation;
  require_los_model(prop.comm, "propagation.comm");
  require_los_model(prop.interference, "propagation.interference");
  Rng scene_rng = stream.child(StreamTag::kScene);
  const LineScene scene = build_line_scene(sys, scene_rng);
  Rng los_rng = stream.child(StreamTag::kLos);

  LinkSample s;
  if (auto r = nearest_in_window(scene.radar_targets, sys.r_Rmin, sys.r_Rmax)) {
    Rng fr = stream.child(StreamTag::kFadingRadar);
    s.target_present = true;
    s.r_r = *r;
    s.s_r = radar_power(rho_factor(sys.P_V, sys.G_R, sys.f_c, prop.radar.mixed.beta_db), prop.radar.mixed.alpha, *r) *
            sample_fading(prop.radar.fading, fr);
  }
  if (!scene.rsus.empty()) {
    const auto& c = prop.comm;
    const double x = scene.rsus.front();
    const bool los = los_rng.bernoulli(los_probability(std::hypot(x, sys.d_C), *c.d1, *c.d2));
    const PathLossParams& pl = los ? *c.los : *c.nlos;
    Rng fc = stream.child(StreamTag::kFadingComm);
    s.r_c = x;
    s.los_c = los;
    s.s_c = comm_power(rho_factor(sys.P_L, sys.G_C, sys.f_c, pl.beta_db), pl.alpha, x, sys.d_C) *
            sample_fading(c.fading, fc);
  }
  {
    const auto& in = prop.interference;
    Rng fi = stream.child(StreamTag::kFadingInterference);
    const double rho_los = rho_factor(sys.P_V, sys.G_I, sys.f_c, in.los->beta_db);
    const double rho_nlos = rho_factor(sys.P_V, sys.G_I, sys.f_c, in.nlos->beta_db);
    double total = 0.0;
    for (double x : scene.interferers) {
      const bool los = los_rng.bernoulli(los_probability(std::hypot(x, sys.d_I), *in.d1, *in.d2));
      const double h = sample_fading(in.fading, fi);
      total += comm_power(los ? rho_los : rho_nlos, los ? in.los->alpha : in.nlos->alpha, x, sys.d_I) * h;
    }
    s.i_total = total;
  }
  s.s_r_raw = s.s_r;
  return s;
}

/// Ray-traced realization with the per-link observations used for fitting.
struct RtRealization {
  LinkSample sample;
  std::vector<LinkObservation> observations;
  DensityCount same_lane_vehicles;
  DensityCount interferers;
  DensityCount rsus;
  std::vector<PathSet> traces;  // radar, comm, interferers; kept on request
  std::vector<LinkKind> trace_kinds;
};

inline RtRealization run_rt_realization(const SimulationConfig& cfg, const Rng& stream, bool keep_traces = false) {
  const SystemConfig& sys = cfg.system;
  const RayTracerConfig& rt = cfg.raytracer;
  Rng scene_rng = stream.child(StreamTag::kScene);
  const RtScene scene = build_rt_scene(sys, scene_rng);
  const auto obstacles = obstacles_of(scene);
  const double x0 = sys.radar_rx.x;
  const Beam forward_rx{0.0, sys.phi_Vr};

  RtRealization out;
  LinkSample& s = out.sample;

  std::size_t same_lane = 0;
  std::size_t interferer_count = 0;
  for (const auto& v : scene.vehicles) {
    if (v.lane == Lane::kSame) ++same_lane;
    if (v.interferer) ++interferer_count;
  }
  out.same_lane_vehicles = {same_lane, scene.vehicle_window};
  out.interferers = {interferer_count, scene.vehicle_window};
  out.rsus = {scene.rsu_nodes.size(), std::max(0.0, scene.vehicle_window - sys.r_Cmin())};

  if (auto ahead = scene.next_vehicle_ahead()) {
    const Vehicle& target = scene.vehicles[*ahead];
    if (target.position >= sys.r_Rmin && target.position <= sys.r_Rmax) {
      TraceOptions opt;
      opt.tx_beam = Beam{0.0, sys.phi_Vt};
      opt.rx_beam = forward_rx;
      opt.reach_x = target.rect.xmax;
      opt.target_id = vehicle_obstacle_id(scene, *ahead);
      PathSet radar = trace_link(sys.radar_tx, sys.radar_rx, obstacles, rt, sys.f_c, opt);
      const PathSet echo = filter_clutter(radar);
      s.target_present = true;
      s.r_r = target.position;
      s.s_r_raw = received_power(radar, sys.P_V, sys.G_R, rt.coherent);
      const double filtered = received_power(echo, sys.P_V, sys.G_R, rt.coherent);
      s.s_r = rt.filter_clutter ? filtered : s.s_r_raw;
      out.observations.push_back({LinkKind::kRadar, target.position, filtered, std::nullopt, 0});
      if (keep_traces) {
        out.traces.push_back(std::move(radar));
        out.trace_kinds.push_back(LinkKind::kRadar);
      }
    }
  }

  if (!scene.rsu_nodes.empty()) {
    const Vec3 rsu = scene.rsu_nodes.front();
    TraceOptions opt;
    opt.tx_beam = Beam{kPi, sys.phi_Lt};
    opt.rx_beam = forward_rx;
    PathSet comm = trace_link(rsu, sys.radar_rx, obstacles, rt, sys.f_c, opt);
    const bool los = visible(rsu, sys.radar_rx, obstacles);
    s.r_c = rsu.x - x0;
    s.los_c = los;
    s.s_c = received_power(comm, sys.P_L, sys.G_C, rt.coherent);
    out.observations.push_back({LinkKind::kComm, std::hypot(*s.r_c, sys.d_C), s.s_c, los, 0});
    if (keep_traces) {
      out.traces.push_back(std::move(comm));
      out.trace_kinds.push_back(LinkKind::kComm);
    }
  }

  double total = 0.0;
  for (const auto& v : scene.vehicles) {
    if (!v.interferer) continue;
    const Vec3 tx{v.rect.xmin, sys.opposite_lane_y, sys.interferer_height};
    TraceOptions opt;
    opt.tx_beam = Beam{kPi, sys.phi_Vt};
    opt.rx_beam = forward_rx;
    PathSet link = trace_link(tx, sys.radar_rx, obstacles, rt, sys.f_c, opt);
    const double p = received_power(link, sys.P_V, sys.G_I, rt.coherent);
    total += p;
    out.observations.push_back(
        {LinkKind::kInterference, std::hypot(v.position, sys.d_I), p, visible(tx, sys.radar_rx, obstacles), 0});
    if (keep_traces) {
      out.traces.push_back(std::move(link));
      out.trace_kinds.push_back(LinkKind::kInterference);
    }
  }
  s.i_total = total;
  return out;
}

/// Thread count from V2X_ISAC_THREADS, else the hardware concurrency.
inline unsigned default_thread_count() {
  if (const char* env = std::getenv("V2X_ISAC_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs `body(i)` for i in [0, n) on up to `threads` workers, contiguous
/// blocks per worker.
inline void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& body) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  const std::size_t chunk = (n + threads - 1) / threads;
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        const std::size_t lo = t * chunk;
        const std::size_t hi = std::min(n, lo + chunk);
        for (std::size_t i = lo; i < hi; ++i) body(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

/// n realizations; realization i always uses Rng::substream(seed, i), so
/// the result does not depend on `threads`.
inline SampleSet run_batch(EngineKind engine, const SimulationConfig& cfg, std::size_t n, std::uint64_t seed,
                           unsigned threads = 1, std::vector<RtRealization>* rt_details = nullptr) {
  if (n < 1) throw std::invalid_argument("run_batch: n must be >= 1");
  if (engine == EngineKind::kMc) {
    require_los_model(cfg.propagation.comm, "propagation.comm");
    require_los_model(cfg.propagation.interference, "propagation.interference");
  }
  SampleSet set;
  set.engine = engine;
  set.seed = seed;
  set.config_digest = config_digest(cfg);
  set.samples.resize(n);
  if (rt_details) rt_details->assign(engine == EngineKind::kRt ? n : 0, {});
  parallel_for(n, threads, [&](std::size_t i) {
    const Rng stream = Rng::substream(seed, i);
    switch (engine) {
      case EngineKind::kSg:
        set.samples[i] = run_sg_realization(cfg, stream);
        break;
      case EngineKind::kMc:
        set.samples[i] = run_mc_realization(cfg, stream);
        break;
      case EngineKind::kRt: {
        RtRealization r = run_rt_realization(cfg, stream);
        set.samples[i] = r.sample;
        if (rt_details) {
          for (auto& o : r.observations) o.realization = i;
          (*rt_details)[i] = std::move(r);
        }
        break;
      }
    }
  });
  return set;
}

}  // namespace v2x_isac
