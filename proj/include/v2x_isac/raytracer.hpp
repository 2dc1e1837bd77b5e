#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "v2x_isac/geometry.hpp"
#include "v2x_isac/scene.hpp"
#include "v2x_isac/units.hpp"

namespace v2x_isac {

/// 2.5D tracer settings: plan-view visibility and reflection, 3D lengths.
struct RayTracerConfig {
  int max_order = 2;  // reflections per path
  bool diffraction = true;
  bool diffraction_after_reflection = true;
  double diffraction_floor_db = 40.0;  // knife-edge losses above this are dropped
  std::complex<double> reflection_coeff{-0.63, 0.0};
  bool coherent = true;
  /// Obstacles further than this (along x) from both link ends are ignored.
  double region_margin = 50.0;
  /// Radar s_r keeps only target-interacting paths when set.
  bool filter_clutter = true;
};

/// Blocking rectangle with a height; ids index RtScene buildings first,
/// then vehicles.
struct Obstacle {
  Rect rect;
  double height = 0.0;
};

inline std::vector<Obstacle> obstacles_of(const RtScene& scene) {
  std::vector<Obstacle> out;
  out.reserve(scene.buildings.size() + scene.vehicles.size());
  for (const auto& b : scene.buildings) out.push_back({b.rect, b.height});
  for (const auto& v : scene.vehicles) out.push_back({v.rect, v.height});
  return out;
}

inline int vehicle_obstacle_id(const RtScene& scene, std::size_t vehicle_index) {
  return static_cast<int>(scene.buildings.size() + vehicle_index);
}

enum class InteractionKind { kReflection, kDiffraction };

/// `index` is the face (reflection) or corner (diffraction) of the block:
/// faces 0..3 = ymin, xmax, ymax, xmin; corners 0..3 counter-clockwise from
/// (xmin, ymin).
struct Interaction {
  InteractionKind kind = InteractionKind::kReflection;
  int block = -1;
  int index = 0;
  double nu = 0.0;       // Fresnel parameter, diffraction only
  double loss_db = 0.0;  // knife-edge loss, diffraction only

  friend bool operator==(const Interaction&, const Interaction&) = default;
};

struct RayPath {
  std::vector<Vec3> vertices;  // tx, interaction points..., rx
  std::vector<Interaction> interactions;
  double length = 0.0;
  std::complex<double> amplitude{0.0, 0.0};  // sqrt(W) per sqrt(W) transmitted
};

struct PathSet {
  std::vector<RayPath> paths;
  Vec3 tx;
  Vec3 rx;
  std::optional<int> target_id;
};

/// Antenna visibility cone in plan view.
struct Beam {
  double azimuth = 0.0;     // boresight, rad from +x
  double beamwidth = kPi;   // full width, rad
};

struct Face {
  Vec2 a;
  Vec2 b;
  Vec2 normal;  // outward
};

inline Face face_of(const Rect& r, int k) {
  switch (k) {
    case 0: return {{r.xmin, r.ymin}, {r.xmax, r.ymin}, {0.0, -1.0}};
    case 1: return {{r.xmax, r.ymin}, {r.xmax, r.ymax}, {1.0, 0.0}};
    case 2: return {{r.xmax, r.ymax}, {r.xmin, r.ymax}, {0.0, 1.0}};
    default: return {{r.xmin, r.ymax}, {r.xmin, r.ymin}, {-1.0, 0.0}};
  }
}

inline Vec2 corner_of(const Rect& r, int k) {
  switch (k) {
    case 0: return {r.xmin, r.ymin};
    case 1: return {r.xmax, r.ymin};
    case 2: return {r.xmax, r.ymax};
    default: return {r.xmin, r.ymax};
  }
}

/// Single knife-edge loss in dB; 0 in the lit region (nu <= -0.78).
inline double knife_edge_loss_db(double nu) {
  if (nu <= -0.78) return 0.0;
  const double a = nu - 0.1;
  return 6.9 + 20.0 * std::log10(std::sqrt(a * a + 1.0) + a);
}

namespace detail {

inline constexpr double kShrink = 1e-6;   // m; keeps touching contacts unblocked
inline constexpr double kSideEps = 1e-9;  // m; strict side-of-face tests

inline bool blocks(const Obstacle& o, const Vec3& p, const Vec3& q) {
  const Rect r = o.rect.shrunk(kShrink);
  if (std::max(p.x, q.x) <= r.xmin || std::min(p.x, q.x) >= r.xmax) return false;
  if (std::max(p.y, q.y) <= r.ymin || std::min(p.y, q.y) >= r.ymax) return false;
  auto clip = clip_segment(p.plan(), q.plan(), r);
  if (!clip || clip->t1 - clip->t0 <= 0.0) return false;
  const double z0 = p.z + (q.z - p.z) * clip->t0;
  const double z1 = p.z + (q.z - p.z) * clip->t1;
  return std::min(z0, z1) < o.height;
}

/// Precomputed per-link view of the scene: the obstacles near the link.
class LinkContext {
 public:
  LinkContext(std::span<const Obstacle> obstacles, const Vec3& tx, const Vec3& rx, double margin,
              std::optional<double> reach_x = std::nullopt)
      : obstacles_(obstacles) {
    double lo = std::min(tx.x, rx.x);
    double hi = std::max(tx.x, rx.x);
    if (reach_x) {
      lo = std::min(lo, *reach_x);
      hi = std::max(hi, *reach_x);
    }
    lo -= margin;
    hi += margin;
    for (std::size_t i = 0; i < obstacles.size(); ++i) {
      const Rect& r = obstacles[i].rect;
      if (r.xmax >= lo && r.xmin <= hi) candidates_.push_back(static_cast<int>(i));
    }
  }

  const std::vector<int>& candidates() const { return candidates_; }
  const Obstacle& obstacle(int id) const { return obstacles_[static_cast<std::size_t>(id)]; }

  bool clear(const Vec3& p, const Vec3& q) const {
    for (int id : candidates_) {
      if (blocks(obstacles_[static_cast<std::size_t>(id)], p, q)) return false;
    }
    return true;
  }

 private:
  std::span<const Obstacle> obstacles_;
  std::vector<int> candidates_;
};

/// Height of the point at unfolded plan distance `s` out of `total`.
inline double height_at(const Vec3& tx, const Vec3& rx, double s, double total) {
  if (total <= 0.0) return tx.z;
  return tx.z + (rx.z - tx.z) * (s / total);
}

inline double plan_length(const std::vector<Vec3>& v) {
  double s = 0.0;
  for (std::size_t i = 1; i < v.size(); ++i) s += norm(v[i].plan() - v[i - 1].plan());
  return s;
}

inline double length_3d(const std::vector<Vec3>& v) {
  double s = 0.0;
  for (std::size_t i = 1; i < v.size(); ++i) s += distance(v[i - 1], v[i]);
  return s;
}

/// Intersection of segment p -> q with the line of face f, when it falls on
/// the face itself.
inline std::optional<Vec2> hit_face(Vec2 p, Vec2 q, const Face& f) {
  const double sp = dot(p - f.a, f.normal);
  const double sq = dot(q - f.a, f.normal);
  if (sp == sq) return std::nullopt;
  const double t = sp / (sp - sq);
  if (t < 0.0 || t > 1.0) return std::nullopt;
  const Vec2 h = p + t * (q - p);
  const Vec2 e = f.b - f.a;
  const double u = dot(h - f.a, e) / dot(e, e);
  if (u < 0.0 || u > 1.0) return std::nullopt;
  return h;
}

/// Assigns heights to plan-view interaction points so that height varies
/// linearly with unfolded distance, then validates heights and visibility.
inline std::optional<std::vector<Vec3>> lift_and_check(const LinkContext& ctx, const Vec3& tx, const Vec3& rx,
                                                       const std::vector<Vec2>& points,
                                                       const std::vector<int>& blocks_at) {
  std::vector<Vec3> v;
  v.reserve(points.size() + 2);
  v.push_back(tx);
  double total = 0.0;
  {
    Vec2 prev = tx.plan();
    for (auto p : points) {
      total += norm(p - prev);
      prev = p;
    }
    total += norm(rx.plan() - prev);
  }
  double s = 0.0;
  Vec2 prev = tx.plan();
  for (std::size_t i = 0; i < points.size(); ++i) {
    s += norm(points[i] - prev);
    prev = points[i];
    const double z = height_at(tx, rx, s, total);
    if (z > ctx.obstacle(blocks_at[i]).height || z < 0.0) return std::nullopt;
    v.push_back({points[i].x, points[i].y, z});
  }
  v.push_back(rx);
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (!ctx.clear(v[i - 1], v[i])) return std::nullopt;
  }
  return v;
}

inline RayPath make_path(std::vector<Vec3> vertices, std::vector<Interaction> interactions) {
  RayPath p;
  p.length = length_3d(vertices);
  p.vertices = std::move(vertices);
  p.interactions = std::move(interactions);
  return p;
}

inline std::vector<RayPath> reflect_paths(const LinkContext& ctx, const Vec3& tx, const Vec3& rx, int max_order) {
  std::vector<RayPath> out;
  struct FaceRef {
    int block;
    int k;
    Face f;
    bool tx_out;
    bool rx_out;
  };
  std::vector<FaceRef> faces;
  for (int id : ctx.candidates()) {
    for (int k = 0; k < 4; ++k) {
      Face f = face_of(ctx.obstacle(id).rect, k);
      faces.push_back({id, k, f, dot(tx.plan() - f.a, f.normal) > kSideEps, dot(rx.plan() - f.a, f.normal) > kSideEps});
    }
  }
  const Vec2 t2 = tx.plan();
  const Vec2 r2 = rx.plan();

  for (const auto& f : faces) {
    if (!f.tx_out || !f.rx_out) continue;
    const Vec2 img = mirror(t2, f.f.a, f.f.normal);
    auto hit = hit_face(img, r2, f.f);
    if (!hit) continue;
    auto v = lift_and_check(ctx, tx, rx, {*hit}, {f.block});
    if (!v) continue;
    out.push_back(make_path(std::move(*v), {{InteractionKind::kReflection, f.block, f.k}}));
  }
  if (max_order < 2) return out;

  for (const auto& f1 : faces) {
    if (!f1.tx_out) continue;
    const Vec2 img1 = mirror(t2, f1.f.a, f1.f.normal);
    for (const auto& f2 : faces) {
      if (&f1 == &f2 || !f2.rx_out) continue;
      if (dot(img1 - f2.f.a, f2.f.normal) <= kSideEps) continue;
      const Vec2 img2 = mirror(img1, f2.f.a, f2.f.normal);
      auto p2 = hit_face(img2, r2, f2.f);
      if (!p2) continue;
      if (dot(*p2 - f1.f.a, f1.f.normal) <= kSideEps) continue;
      auto p1 = hit_face(img1, *p2, f1.f);
      if (!p1) continue;
      auto v = lift_and_check(ctx, tx, rx, {*p1, *p2}, {f1.block, f2.block});
      if (!v) continue;
      out.push_back(make_path(std::move(*v), {{InteractionKind::kReflection, f1.block, f1.k},
                                              {InteractionKind::kReflection, f2.block, f2.k}}));
    }
  }
  return out;
}

/// Diffraction on a vertical block edge as the last interaction. `prefix`
/// holds the vertices tx..S (S = last vertex before the edge) and the
/// interactions along them.
inline void diffract_from(const LinkContext& ctx, const Vec3& tx, const Vec3& rx, const std::vector<Vec3>& prefix,
                          const std::vector<Interaction>& prefix_interactions, double wavelength, double floor_db,
                          std::vector<RayPath>& out) {
  const Vec3& s3 = prefix.back();
  const double prefix_plan = plan_length(prefix);
  const Vec2 r2 = rx.plan();
  for (int id : ctx.candidates()) {
    const Obstacle& o = ctx.obstacle(id);
    for (int k = 0; k < 4; ++k) {
      const Vec2 e = corner_of(o.rect, k);
      const double d1 = norm(e - s3.plan());
      const double d2 = norm(r2 - e);
      if (d1 <= 0.0 || d2 <= 0.0) continue;
      const double total = prefix_plan + d1 + d2;
      const double z = height_at(tx, rx, prefix_plan + d1, total);
      if (z > o.height || z < 0.0) continue;
      const Vec3 e3{e.x, e.y, z};
      const double excess = distance(s3, e3) + distance(e3, rx) - distance(s3, rx);
      const bool shadow = blocks(o, s3, rx);
      const double magnitude = 2.0 * std::sqrt(std::max(excess, 0.0) / wavelength);
      const double nu = shadow ? magnitude : -magnitude;
      if (nu <= -0.78) continue;
      const double loss = knife_edge_loss_db(nu);
      if (loss > floor_db) continue;
      if (!ctx.clear(s3, e3) || !ctx.clear(e3, rx)) continue;
      std::vector<Vec3> v = prefix;
      v.push_back(e3);
      v.push_back(rx);
      std::vector<Interaction> inter = prefix_interactions;
      inter.push_back({InteractionKind::kDiffraction, id, k, nu, loss});
      out.push_back(make_path(std::move(v), std::move(inter)));
    }
  }
}

inline std::vector<RayPath> diffract_paths(const LinkContext& ctx, const Vec3& tx, const Vec3& rx,
                                           bool after_reflection, double wavelength, double floor_db) {
  std::vector<RayPath> out;
  diffract_from(ctx, tx, rx, {tx}, {}, wavelength, floor_db, out);
  if (!after_reflection) return out;
  // tx -> specular point on a face -> edge -> rx: mirror tx in the face and
  // aim the image at the edge.
  for (int id : ctx.candidates()) {
    for (int k = 0; k < 4; ++k) {
      const Face f = face_of(ctx.obstacle(id).rect, k);
      if (dot(tx.plan() - f.a, f.normal) <= kSideEps) continue;
      const Vec2 img = mirror(tx.plan(), f.a, f.normal);
      for (int eid : ctx.candidates()) {
        const Obstacle& eo = ctx.obstacle(eid);
        for (int ek = 0; ek < 4; ++ek) {
          const Vec2 e = corner_of(eo.rect, ek);
          if (dot(e - f.a, f.normal) <= kSideEps) continue;
          auto hit = hit_face(img, e, f);
          if (!hit) continue;
          const double l1 = norm(*hit - tx.plan());
          const double l2 = norm(e - *hit);
          const double l3 = norm(rx.plan() - e);
          if (l2 <= 0.0 || l3 <= 0.0) continue;
          const double total = l1 + l2 + l3;
          const double zr = height_at(tx, rx, l1, total);
          if (zr > ctx.obstacle(id).height || zr < 0.0) continue;
          const double ze = height_at(tx, rx, l1 + l2, total);
          if (ze > eo.height || ze < 0.0) continue;
          const Vec3 r3{hit->x, hit->y, zr};
          const Vec3 e3{e.x, e.y, ze};
          const double excess = distance(r3, e3) + distance(e3, rx) - distance(r3, rx);
          const bool shadow = blocks(eo, r3, rx);
          const double magnitude = 2.0 * std::sqrt(std::max(excess, 0.0) / wavelength);
          const double nu = shadow ? magnitude : -magnitude;
          if (nu <= -0.78) continue;
          const double loss = knife_edge_loss_db(nu);
          if (loss > floor_db) continue;
          if (!ctx.clear(tx, r3) || !ctx.clear(r3, e3) || !ctx.clear(e3, rx)) continue;
          out.push_back(make_path({tx, r3, e3, rx}, {{InteractionKind::kReflection, id, k},
                                                     {InteractionKind::kDiffraction, eid, ek, nu, loss}}));
        }
      }
    }
  }
  return out;
}

inline bool within_beam(const std::optional<Beam>& beam, Vec2 from, Vec2 to) {
  if (!beam || beam->beamwidth >= 2.0 * kPi) return true;
  const Vec2 d = to - from;
  double diff = std::atan2(d.y, d.x) - beam->azimuth;
  diff = std::remainder(diff, 2.0 * kPi);
  return std::abs(diff) <= beam->beamwidth / 2.0 + 1e-12;
}

}  // namespace detail

/// True iff the segment pq crosses no obstacle below its height, treating
/// contact with block boundaries as unobstructed. Obstacles listed in
/// `ignore` are skipped.
inline bool visible(const Vec3& p, const Vec3& q, std::span<const Obstacle> obstacles,
                    std::span<const int> ignore = {}) {
  for (std::size_t i = 0; i < obstacles.size(); ++i) {
    if (std::find(ignore.begin(), ignore.end(), static_cast<int>(i)) != ignore.end()) continue;
    if (detail::blocks(obstacles[i], p, q)) return false;
  }
  return true;
}

/// Image-method specular paths with 1..max_order reflections.
inline std::vector<RayPath> reflect_paths(const Vec3& tx, const Vec3& rx, std::span<const Obstacle> obstacles,
                                          int max_order, double region_margin = 1e12) {
  if (max_order < 1 || max_order > 2) throw std::invalid_argument("reflect_paths: max_order must be 1 or 2");
  detail::LinkContext ctx(obstacles, tx, rx, region_margin);
  return detail::reflect_paths(ctx, tx, rx, max_order);
}

/// Knife-edge paths tx -> edge -> rx and, when `after_reflection`, also
/// tx -> reflection -> edge -> rx. Edges in the lit region (nu <= -0.78)
/// duplicate the unobstructed ray and are skipped.
inline std::vector<RayPath> diffract_paths(const Vec3& tx, const Vec3& rx, std::span<const Obstacle> obstacles,
                                           bool after_reflection, double wavelength, double floor_db = 40.0,
                                           double region_margin = 1e12) {
  detail::LinkContext ctx(obstacles, tx, rx, region_margin);
  return detail::diffract_paths(ctx, tx, rx, after_reflection, wavelength, floor_db);
}

/// Free-space factor times interaction coefficients times propagation phase.
inline std::complex<double> path_amplitude(const RayPath& path, double f_c, std::complex<double> reflection_coeff) {
  if (!(path.length > 0.0)) throw std::invalid_argument("path_amplitude: path length must be > 0");
  const double lambda = wavelength(f_c);
  std::complex<double> a = lambda / (4.0 * kPi * path.length);
  for (const auto& i : path.interactions) {
    if (i.kind == InteractionKind::kReflection) {
      a *= reflection_coeff;
    } else {
      a *= std::pow(10.0, -i.loss_db / 20.0);
    }
  }
  const double cycles = path.length / lambda;
  const double phase = -2.0 * kPi * (cycles - std::floor(cycles));
  return a * std::polar(1.0, phase);
}

/// Received power for transmit power `p_tx` and link gain `gain`; coherent
/// (phasor) or incoherent (power) summation.
inline double received_power(const PathSet& set, double p_tx, double gain, bool coherent = true) {
  if (set.paths.empty()) return 0.0;
  if (coherent) {
    std::complex<double> sum{0.0, 0.0};
    for (const auto& p : set.paths) sum += p.amplitude;
    return std::norm(sum) * p_tx * gain;
  }
  double sum = 0.0;
  for (const auto& p : set.paths) sum += std::norm(p.amplitude);
  return sum * p_tx * gain;
}

/// Keeps only paths that touch the target block.
inline PathSet filter_clutter(const PathSet& set) {
  if (!set.target_id) throw std::invalid_argument("filter_clutter: path set has no target");
  PathSet out;
  out.tx = set.tx;
  out.rx = set.rx;
  out.target_id = set.target_id;
  for (const auto& p : set.paths) {
    const bool hits = std::any_of(p.interactions.begin(), p.interactions.end(),
                                  [&](const Interaction& i) { return i.block == *set.target_id; });
    if (hits) out.paths.push_back(p);
  }
  return out;
}

struct TraceOptions {
  std::optional<Beam> tx_beam;
  std::optional<Beam> rx_beam;
  /// Extends the obstacle region to include this x (e.g. a radar target).
  std::optional<double> reach_x;
  std::optional<int> target_id;
};

/// Full link trace: direct path, reflections, diffractions, beam clipping
/// on the first departure and last arrival, and amplitudes.
inline PathSet trace_link(const Vec3& tx, const Vec3& rx, std::span<const Obstacle> obstacles,
                          const RayTracerConfig& cfg, double f_c, const TraceOptions& opt = {}) {
  detail::LinkContext ctx(obstacles, tx, rx, cfg.region_margin, opt.reach_x);
  PathSet set;
  set.tx = tx;
  set.rx = rx;
  set.target_id = opt.target_id;
  std::vector<RayPath> raw;
  if (ctx.clear(tx, rx)) raw.push_back(detail::make_path({tx, rx}, {}));
  if (cfg.max_order >= 1) {
    auto refl = detail::reflect_paths(ctx, tx, rx, std::min(cfg.max_order, 2));
    raw.insert(raw.end(), refl.begin(), refl.end());
  }
  if (cfg.diffraction) {
    auto diff = detail::diffract_paths(ctx, tx, rx, cfg.diffraction_after_reflection && cfg.max_order >= 1,
                                       wavelength(f_c), cfg.diffraction_floor_db);
    raw.insert(raw.end(), diff.begin(), diff.end());
  }
  for (auto& p : raw) {
    const Vec2 first = p.vertices[1].plan();
    const Vec2 last = p.vertices[p.vertices.size() - 2].plan();
    if (!detail::within_beam(opt.tx_beam, tx.plan(), first)) continue;
    if (!detail::within_beam(opt.rx_beam, rx.plan(), last)) continue;
    p.amplitude = path_amplitude(p, f_c, cfg.reflection_coeff);
    set.paths.push_back(std::move(p));
  }
  return set;
}

/// Compact interaction label, e.g. "R3.2;D7.1"; "direct" for LoS.
inline std::string interaction_label(const RayPath& p) {
  if (p.interactions.empty()) return "direct";
  std::string s;
  for (const auto& i : p.interactions) {
    if (!s.empty()) s += ';';
    s += i.kind == InteractionKind::kReflection ? 'R' : 'D';
    s += std::to_string(i.block) + "." + std::to_string(i.index);
  }
  return s;
}

}  // namespace v2x_isac
