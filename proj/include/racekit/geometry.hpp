#pragma once

#include <algorithm>
#include <array>
#include <cmath>

namespace racekit {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double k) const { return {x * k, y * k}; }
  Vec2& operator+=(const Vec2& o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  double dot(const Vec2& o) const { return x * o.x + y * o.y; }
  double cross(const Vec2& o) const { return x * o.y - y * o.x; }
  double norm() const { return std::hypot(x, y); }
  double squared_norm() const { return x * x + y * y; }
  Vec2 normalized() const {
    double n = norm();
    return n > 0.0 ? Vec2{x / n, y / n} : Vec2{1.0, 0.0};
  }
  // 90 degree counter-clockwise rotation (left normal of a tangent).
  Vec2 perp() const { return {-y, x}; }
};

inline Vec2 operator*(double k, const Vec2& v) { return {v.x * k, v.y * k}; }

// Wraps an angle to (-pi, pi].
inline double wrap_angle(double a) {
  a = std::fmod(a, 2.0 * M_PI);
  if (a <= -M_PI) a += 2.0 * M_PI;
  if (a > M_PI) a -= 2.0 * M_PI;
  return a;
}

inline Vec2 heading_vec(double heading) {
  return {std::cos(heading), std::sin(heading)};
}

// True if the open segments (a1,a2) and (b1,b2) properly cross, i.e. they
// intersect at a single interior point of both. Shared endpoints and
// collinear overlap do not count; closed-polyline neighbours are safe to
// test this way.
inline bool segments_properly_intersect(const Vec2& a1, const Vec2& a2,
                                        const Vec2& b1, const Vec2& b2) {
  auto orient = [](const Vec2& p, const Vec2& q, const Vec2& r) {
    return (q - p).cross(r - p);
  };
  double o1 = orient(a1, a2, b1);
  double o2 = orient(a1, a2, b2);
  double o3 = orient(b1, b2, a1);
  double o4 = orient(b1, b2, a2);
  return ((o1 > 0) != (o2 > 0)) && ((o3 > 0) != (o4 > 0)) && o1 != 0 &&
         o2 != 0 && o3 != 0 && o4 != 0;
}

// Rectangle footprint with arbitrary heading, used for vehicle bodies.
struct OrientedBox {
  Vec2 center;
  double heading = 0.0;
  double length = 0.0;  // along heading
  double width = 0.0;

  std::array<Vec2, 4> corners() const {
    Vec2 f = heading_vec(heading) * (0.5 * length);
    Vec2 l = heading_vec(heading).perp() * (0.5 * width);
    return {center + f + l, center + f - l, center - f - l, center - f + l};
  }
};

// Separating axis test on the two boxes' edge normals (4 axes).
inline bool boxes_overlap(const OrientedBox& a, const OrientedBox& b) {
  auto ca = a.corners();
  auto cb = b.corners();
  std::array<Vec2, 4> axes = {heading_vec(a.heading),
                              heading_vec(a.heading).perp(),
                              heading_vec(b.heading),
                              heading_vec(b.heading).perp()};
  for (const Vec2& ax : axes) {
    double amin = 1e300, amax = -1e300, bmin = 1e300, bmax = -1e300;
    for (const Vec2& c : ca) {
      double p = c.dot(ax);
      amin = std::min(amin, p);
      amax = std::max(amax, p);
    }
    for (const Vec2& c : cb) {
      double p = c.dot(ax);
      bmin = std::min(bmin, p);
      bmax = std::max(bmax, p);
    }
    if (amax < bmin || bmax < amin) return false;
  }
  return true;
}

// Distance from p to segment [a, b].
inline double point_segment_distance(const Vec2& p, const Vec2& a,
                                     const Vec2& b) {
  Vec2 ab = b - a;
  double len2 = ab.squared_norm();
  if (len2 == 0.0) return (p - a).norm();
  double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return (p - (a + ab * t)).norm();
}

// First hit of the ray origin + t*dir (t >= 0) against segment [a, b].
// Returns the ray parameter t, or a negative value when there is no hit.
inline double ray_segment_hit(const Vec2& origin, const Vec2& dir,
                              const Vec2& a, const Vec2& b) {
  Vec2 ab = b - a;
  double denom = dir.cross(ab);
  if (std::abs(denom) < 1e-15) return -1.0;
  Vec2 ao = a - origin;
  double t = ao.cross(ab) / denom;
  double u = ao.cross(dir) / denom;
  if (t >= 0.0 && u >= 0.0 && u <= 1.0) return t;
  return -1.0;
}

}  // namespace racekit
