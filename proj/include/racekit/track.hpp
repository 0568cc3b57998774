#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "racekit/geometry.hpp"
#include "racekit/spline.hpp"

namespace racekit {

struct FrenetState {
  double s = 0.0;    // arc length along the reference line, in [0, length)
  double d = 0.0;    // signed lateral offset, positive to the left of travel
  double v_s = 0.0;  // longitudinal speed
  double v_d = 0.0;  // lateral speed
};

struct CartesianPose {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;  // radians, (-pi, pi]
};

// Closed reference line with arc-length parameterization, per-point lateral
// bounds and curvature. Immutable once built; all queries are const.
class TrackModel {
 public:
  struct Waypoint {
    double s;
    Vec2 pos;
    double heading;
    double kappa;
    double w_left;
    double w_right;
  };

  // Builds from an ordered loop of centerline points with per-point widths.
  // The loop may repeat the first point at the end (coincidence within
  // 1e-6 m) or leave the closing segment implicit.
  TrackModel(std::vector<Vec2> pts, std::vector<double> w_left,
             std::vector<double> w_right) {
    if (pts.size() != w_left.size() || pts.size() != w_right.size())
      throw std::invalid_argument("track: point/width count mismatch");
    if (pts.size() >= 2 && (pts.front() - pts.back()).norm() <= 1e-6) {
      pts.pop_back();
      w_left.pop_back();
      w_right.pop_back();
    }
    validate(pts, w_left, w_right);
    build(pts, w_left, w_right);
  }

  double length() const { return length_; }
  double spacing() const { return spacing_; }
  size_t size() const { return wps_.size(); }
  const std::vector<Waypoint>& waypoints() const { return wps_; }

  double wrap_s(double s) const {
    double r = std::fmod(s, length_);
    return r < 0.0 ? r + length_ : r;
  }

  // Forward arc distance from s0 to s1 (always in [0, length)).
  double forward_distance(double s0, double s1) const {
    return wrap_s(s1 - s0);
  }

  // Wrapped absolute gap between two arc positions, in [0, length/2].
  double abs_distance(double s0, double s1) const {
    double f = forward_distance(s0, s1);
    return std::min(f, length_ - f);
  }

  Vec2 position_at(double s, double d = 0.0) const {
    double u = param_at(s);
    Vec2 c = curve_.at(u);
    Vec2 n = curve_.tangent(u).normalized().perp();
    return c + n * d;
  }

  CartesianPose pose_at(double s, double d = 0.0) const {
    double u = param_at(s);
    Vec2 c = curve_.at(u);
    Vec2 t = curve_.tangent(u).normalized();
    Vec2 p = c + t.perp() * d;
    return {p.x, p.y, std::atan2(t.y, t.x)};
  }

  double heading_at(double s) const {
    double u = param_at(s);
    Vec2 t = curve_.tangent(u);
    return std::atan2(t.y, t.x);
  }

  double curvature_at(double s) const {
    return interp_wrapped(s, [](const Waypoint& w) { return w.kappa; });
  }
  double width_left_at(double s) const {
    return interp_wrapped(s, [](const Waypoint& w) { return w.w_left; });
  }
  double width_right_at(double s) const {
    return interp_wrapped(s, [](const Waypoint& w) { return w.w_right; });
  }

  // Projects a Cartesian point onto the reference line. Throws
  // std::domain_error when the point is farther laterally than twice the
  // local track width.
  FrenetState project(const Vec2& p) const {
    size_t i = nearest_waypoint(p);
    const size_t n = wps_.size();
    // Bracket the projection between the neighbouring waypoints, working in
    // an unwrapped copy of the curve parameter around waypoint i.
    double ui = u_[i];
    double ua = (i == 0) ? u_[n - 1] - curve_.period() : u_[i - 1];
    double ub = (i + 1 == n) ? u_[0] + curve_.period() : u_[i + 1];

    auto g = [&](double u) {
      return (p - curve_.at(u)).dot(curve_.tangent(u));
    };
    double u = ui;
    double lo = ua, hi = ub;
    double glo = g(lo), ghi = g(hi);
    // g decreases through zero at the projection; keep the bracket while
    // Newton runs so a wild step cannot escape.
    for (int it = 0; it < 30; ++it) {
      double gu = g(u);
      if (std::abs(gu) < 1e-13) break;
      if ((gu > 0.0) == (glo > 0.0)) {
        lo = u;
        glo = gu;
      } else {
        hi = u;
        ghi = gu;
      }
      Vec2 t = curve_.tangent(u);
      double dg = -t.squared_norm() + (p - curve_.at(u)).dot(curve_.second(u));
      double step = (std::abs(dg) > 1e-12) ? -gu / dg : 0.0;
      double un = u + step;
      if (step == 0.0 || un <= lo || un >= hi) un = 0.5 * (lo + hi);
      u = un;
    }

    Vec2 c = curve_.at(u);
    Vec2 t = curve_.tangent(u).normalized();
    double d = t.perp().dot(p - c);
    double s;
    if (u >= ui)
      s = wps_[i].s + curve_.arc_length(ui, u, 2);
    else
      s = wps_[i].s - curve_.arc_length(u, ui, 2);
    s = wrap_s(s);

    double w = width_left_at(s) + width_right_at(s);
    if (std::abs(d) > 2.0 * w)
      throw std::domain_error("point too far from track reference line");
    FrenetState f;
    f.s = s;
    f.d = d;
    return f;
  }

 private:
  void validate(const std::vector<Vec2>& pts,
                const std::vector<double>& wl,
                const std::vector<double>& wr) const {
    const size_t n = pts.size();
    if (n < 20)
      throw std::invalid_argument(
          "track needs at least 20 waypoints forming a closed loop");
    for (size_t i = 0; i < n; ++i) {
      size_t j = (i + 1) % n;
      double gap = (pts[j] - pts[i]).norm();
      if (!(gap > 0.0) || gap > 0.5)
        throw std::invalid_argument(
            "track waypoint spacing must be in (0, 0.5] m (including the "
            "closing segment)");
      if (!(wl[i] > 0.0) || !(wr[i] > 0.0))
        throw std::invalid_argument("track widths must be positive");
    }
    // Degenerate (zero-area) loops never make a usable track.
    double area2 = 0.0;
    for (size_t i = 0; i < n; ++i) area2 += pts[i].cross(pts[(i + 1) % n]);
    if (std::abs(area2) < 1e-9)
      throw std::invalid_argument("track centerline is degenerate (no area)");
    for (size_t i = 0; i < n; ++i) {
      size_t i2 = (i + 1) % n;
      for (size_t j = i + 1; j < n; ++j) {
        size_t j2 = (j + 1) % n;
        if (j == i || j2 == i || j == i2) continue;
        if (segments_properly_intersect(pts[i], pts[i2], pts[j], pts[j2]))
          throw std::invalid_argument("track centerline self-intersects");
      }
    }
  }

  void build(const std::vector<Vec2>& pts, const std::vector<double>& wl,
             const std::vector<double>& wr) {
    const size_t n = pts.size();
    // Chord-length parameter for the interpolating spline.
    std::vector<double> knots(n);
    knots[0] = 0.0;
    for (size_t i = 1; i < n; ++i)
      knots[i] = knots[i - 1] + (pts[i] - pts[i - 1]).norm();
    double period = knots[n - 1] + (pts[0] - pts[n - 1]).norm();
    curve_ = ClosedCurve(knots, pts, period);

    // Arc length per input segment, then the lap total.
    std::vector<double> cum(n + 1);
    cum[0] = 0.0;
    for (size_t i = 0; i < n; ++i) {
      double ua = knots[i];
      double ub = (i + 1 < n) ? knots[i + 1] : period;
      cum[i + 1] = cum[i] + curve_.arc_length(ua, ub);
    }
    length_ = cum[n];

    // Resample to uniform arc spacing <= 0.1 m.
    size_t n_out = static_cast<size_t>(std::ceil(length_ / 0.1));
    spacing_ = length_ / static_cast<double>(n_out);
    wps_.resize(n_out);
    u_.resize(n_out);
    size_t seg = 0;
    for (size_t i = 0; i < n_out; ++i) {
      double s = spacing_ * static_cast<double>(i);
      while (seg + 1 < n && cum[seg + 1] <= s) ++seg;
      double ua = knots[seg];
      double ub = (seg + 1 < n) ? knots[seg + 1] : period;
      // Newton for u with arc(ua -> u) = s - cum[seg].
      double target = s - cum[seg];
      double u = ua + (ub - ua) * (target / std::max(cum[seg + 1] - cum[seg],
                                                     1e-300));
      for (int it = 0; it < 8; ++it) {
        double err = curve_.arc_length(ua, u, 2) - target;
        double sp = curve_.speed(u);
        if (std::abs(err) < 1e-12 || sp <= 0.0) break;
        u -= err / sp;
        u = std::clamp(u, ua, ub);
      }
      u_[i] = u;

      Vec2 t = curve_.tangent(u);
      wps_[i].s = s;
      wps_[i].pos = curve_.at(u);
      wps_[i].heading = std::atan2(t.y, t.x);
      // widths interpolate linearly between the input points
      double fr = (u - ua) / std::max(ub - ua, 1e-300);
      size_t nxt = (seg + 1) % n;
      wps_[i].w_left = wl[seg] + (wl[nxt] - wl[seg]) * fr;
      wps_[i].w_right = wr[seg] + (wr[nxt] - wr[seg]) * fr;
      wps_[i].kappa = 0.0;
    }

    // Curvature: finite difference of heading over arc length, then a
    // 5-point moving average (raw differences at this spacing are noisy).
    std::vector<double> raw(n_out);
    for (size_t i = 0; i < n_out; ++i) {
      size_t ip = (i + 1) % n_out;
      size_t im = (i + n_out - 1) % n_out;
      double dpsi = wrap_angle(wps_[ip].heading - wps_[im].heading);
      raw[i] = dpsi / (2.0 * spacing_);
    }
    for (size_t i = 0; i < n_out; ++i) {
      double acc = 0.0;
      for (int k = -2; k <= 2; ++k)
        acc += raw[(i + n_out + static_cast<size_t>(k + 2) - 2) % n_out];
      wps_[i].kappa = acc / 5.0;
    }

    build_grid();
  }

  void build_grid() {
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto& w : wps_) {
      xmin = std::min(xmin, w.pos.x);
      xmax = std::max(xmax, w.pos.x);
      ymin = std::min(ymin, w.pos.y);
      ymax = std::max(ymax, w.pos.y);
    }
    cell_ = 0.5;
    gx0_ = xmin - cell_;
    gy0_ = ymin - cell_;
    nx_ = static_cast<int>((xmax - gx0_) / cell_) + 2;
    ny_ = static_cast<int>((ymax - gy0_) / cell_) + 2;
    grid_.assign(static_cast<size_t>(nx_) * ny_, {});
    for (size_t i = 0; i < wps_.size(); ++i) {
      int cx = static_cast<int>((wps_[i].pos.x - gx0_) / cell_);
      int cy = static_cast<int>((wps_[i].pos.y - gy0_) / cell_);
      grid_[static_cast<size_t>(cy) * nx_ + cx].push_back(
          static_cast<int>(i));
    }
  }

  size_t nearest_waypoint(const Vec2& p) const {
    int cx = std::clamp(static_cast<int>((p.x - gx0_) / cell_), 0, nx_ - 1);
    int cy = std::clamp(static_cast<int>((p.y - gy0_) / cell_), 0, ny_ - 1);
    double best = std::numeric_limits<double>::max();
    int best_i = -1;
    int max_ring = std::max(nx_, ny_);
    for (int r = 0; r <= max_ring; ++r) {
      if (best_i >= 0) {
        double reach = (r - 1) * cell_;
        if (reach > 0.0 && reach * reach > best) break;
      }
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          if (std::max(std::abs(dx), std::abs(dy)) != r) continue;
          int x = cx + dx, y = cy + dy;
          if (x < 0 || y < 0 || x >= nx_ || y >= ny_) continue;
          for (int idx : grid_[static_cast<size_t>(y) * nx_ + x]) {
            double d2 = (wps_[static_cast<size_t>(idx)].pos - p)
                            .squared_norm();
            if (d2 < best) {
              best = d2;
              best_i = idx;
            }
          }
        }
      }
    }
    return static_cast<size_t>(best_i);
  }

  // Curve parameter for an arc-length position, Newton-refined from the
  // uniform table.
  double param_at(double s) const {
    double sw = wrap_s(s);
    size_t n = wps_.size();
    size_t i = std::min(static_cast<size_t>(sw / spacing_), n - 1);
    double ua = u_[i];
    double ub = (i + 1 < n) ? u_[i + 1] : curve_.period();
    double target = sw - wps_[i].s;
    double u = ua + (ub - ua) * (target / spacing_);
    for (int it = 0; it < 6; ++it) {
      double err = curve_.arc_length(ua, u, 1) - target;
      if (std::abs(err) < 1e-12) break;
      double sp = curve_.speed(u);
      if (sp <= 0.0) break;
      u = std::clamp(u - err / sp, ua, ub);
    }
    return u;
  }

  template <typename F>
  double interp_wrapped(double s, F field) const {
    double sw = wrap_s(s);
    size_t n = wps_.size();
    size_t i = std::min(static_cast<size_t>(sw / spacing_), n - 1);
    size_t j = (i + 1) % n;
    double fr = (sw - wps_[i].s) / spacing_;
    return field(wps_[i]) + (field(wps_[j]) - field(wps_[i])) * fr;
  }

  ClosedCurve curve_;
  std::vector<Waypoint> wps_;
  std::vector<double> u_;  // curve parameter per resampled waypoint
  double length_ = 0.0;
  double spacing_ = 0.0;

  std::vector<std::vector<int>> grid_;
  double gx0_ = 0.0, gy0_ = 0.0, cell_ = 0.5;
  int nx_ = 0, ny_ = 0;
};

inline TrackModel build_track(const std::vector<Vec2>& centerline,
                              const std::vector<double>& w_left,
                              const std::vector<double>& w_right) {
  return TrackModel(centerline, w_left, w_right);
}

inline double wrap_s(const TrackModel& t, double s) { return t.wrap_s(s); }

inline FrenetState cartesian_to_frenet(const TrackModel& t,
                                       const CartesianPose& pose) {
  return t.project({pose.x, pose.y});
}

inline CartesianPose frenet_to_cartesian(const TrackModel& t, double s,
                                         double d) {
  return t.pose_at(s, d);
}

inline double curvature_at(const TrackModel& t, double s) {
  return t.curvature_at(s);
}

// Track file: one waypoint per line, `x y w_left w_right` in meters,
// '#' starts a comment, blank lines ignored.
inline TrackModel load_track(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open track file: " + path);
  std::vector<Vec2> pts;
  std::vector<double> wl, wr;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    double x, y, l, r;
    if (!(ss >> x)) continue;  // blank or comment-only line
    if (!(ss >> y >> l >> r))
      throw std::invalid_argument("track file " + path + " line " +
                                  std::to_string(lineno) +
                                  ": expected `x y w_left w_right`");
    pts.push_back({x, y});
    wl.push_back(l);
    wr.push_back(r);
  }
  if (pts.empty())
    throw std::invalid_argument("track file " + path + " has no waypoints");
  return TrackModel(pts, wl, wr);
}

inline void save_track(const std::string& path, const std::vector<Vec2>& pts,
                       const std::vector<double>& w_left,
                       const std::vector<double>& w_right) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write track file: " + path);
  out << "# x y w_left w_right\n";
  char buf[160];
  for (size_t i = 0; i < pts.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.9f %.9f %.6f %.6f\n", pts[i].x,
                  pts[i].y, w_left[i], w_right[i]);
    out << buf;
  }
}

}  // namespace racekit
