#pragma once

#include <algorithm>
#include <cmath>
#include <optional>

namespace v2x_isac {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend bool operator==(const Vec2&, const Vec2&) = default;
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  Vec2 plan() const { return {x, y}; }
  friend bool operator==(const Vec3&, const Vec3&) = default;
};

inline double distance(const Vec3& a, const Vec3& b) {
  return std::sqrt((a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y) + (a.z - b.z) * (a.z - b.z));
}

/// Axis-aligned rectangle in plan view.
struct Rect {
  double xmin = 0.0;
  double ymin = 0.0;
  double xmax = 0.0;
  double ymax = 0.0;

  bool valid() const { return xmin < xmax && ymin < ymax; }
  bool contains(Vec2 p) const { return p.x > xmin && p.x < xmax && p.y > ymin && p.y < ymax; }
  Rect shrunk(double eps) const { return {xmin + eps, ymin + eps, xmax - eps, ymax - eps}; }
  bool overlaps(const Rect& o) const {
    return xmin < o.xmax && o.xmin < xmax && ymin < o.ymax && o.ymin < ymax;
  }
  friend bool operator==(const Rect&, const Rect&) = default;
};

/// Parameter interval [t0, t1] over which the segment a + t (b - a), t in
/// [0, 1], lies inside the closed rectangle (Liang-Barsky clipping).
struct ClipInterval {
  double t0;
  double t1;
};

inline std::optional<ClipInterval> clip_segment(Vec2 a, Vec2 b, const Rect& r) {
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  double t0 = 0.0;
  double t1 = 1.0;
  const double p[4] = {-dx, dx, -dy, dy};
  const double q[4] = {a.x - r.xmin, r.xmax - a.x, a.y - r.ymin, r.ymax - a.y};
  for (int k = 0; k < 4; ++k) {
    if (p[k] == 0.0) {
      if (q[k] < 0.0) return std::nullopt;
      continue;
    }
    const double t = q[k] / p[k];
    if (p[k] < 0.0) {
      t0 = std::max(t0, t);
    } else {
      t1 = std::min(t1, t);
    }
    if (t0 > t1) return std::nullopt;
  }
  return ClipInterval{t0, t1};
}

/// Mirror image of p across the infinite line through a with unit normal n.
inline Vec2 mirror(Vec2 p, Vec2 a, Vec2 n) {
  const double d = dot(p - a, n);
  return p - (2.0 * d) * n;
}

}  // namespace v2x_isac
