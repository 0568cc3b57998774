#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "racekit/track.hpp"

namespace racekit {

// 1:10-scale platform defaults; everything configurable.
struct VehicleLimits {
  double v_max = 7.0;        // m/s
  double a_lat_max = 6.0;    // m/s^2
  double a_lon_max = 4.0;    // m/s^2
  double length = 0.50;      // m
  double width = 0.30;       // m
  double wheelbase = 0.33;   // m
  double steer_max = 0.42;   // rad
  double steer_rate = 10.0;  // rad/s

  double kappa_max() const { return std::tan(steer_max) / wheelbase; }
};

struct LinePoint {
  double s = 0.0;  // arc length along this line
  double x = 0.0, y = 0.0;
  double heading = 0.0;
  double kappa = 0.0;
  double v = 0.0;
  double d_left = 0.0;   // distance from the line to the left track edge
  double d_right = 0.0;  // distance from the line to the right track edge
};

// Closed reference line with uniform arc spacing and speed profile.
struct RacingLine {
  std::vector<LinePoint> pts;
  double lap_length = 0.0;

  double step() const { return lap_length / static_cast<double>(pts.size()); }

  double wrap(double s) const {
    double r = std::fmod(s, lap_length);
    return r < 0.0 ? r + lap_length : r;
  }

  double v_at(double s) const {
    return interp(s, [](const LinePoint& p) { return p.v; });
  }
  double kappa_at(double s) const {
    return interp(s, [](const LinePoint& p) { return p.kappa; });
  }
  double d_left_at(double s) const {
    return interp(s, [](const LinePoint& p) { return p.d_left; });
  }
  double d_right_at(double s) const {
    return interp(s, [](const LinePoint& p) { return p.d_right; });
  }
  Vec2 position_at(double s) const {
    return {interp(s, [](const LinePoint& p) { return p.x; }),
            interp(s, [](const LinePoint& p) { return p.y; })};
  }

  // Longitudinal acceleration consistent with the speed profile,
  // a = d(v^2/2)/ds.
  double accel_at(double s) const {
    double sw = wrap(s);
    double h = step();
    size_t n = pts.size();
    size_t i = std::min(static_cast<size_t>(sw / h), n - 1);
    size_t ip = (i + 1) % n, im = (i + n - 1) % n;
    return (pts[ip].v * pts[ip].v - pts[im].v * pts[im].v) / (4.0 * h);
  }

  // Lap time at the profile speeds.
  double lap_time() const {
    double t = 0.0, h = step();
    for (const auto& p : pts) t += h / p.v;
    return t;
  }

 private:
  template <typename F>
  double interp(double s, F field) const {
    double sw = wrap(s);
    double h = step();
    size_t n = pts.size();
    size_t i = std::min(static_cast<size_t>(sw / h), n - 1);
    size_t j = (i + 1) % n;
    double fr = (sw - pts[i].s) / h;
    return field(pts[i]) + (field(pts[j]) - field(pts[i])) * fr;
  }
};

// Reference-frame view of a line: a TrackModel whose centerline is the line
// itself and whose widths are the line-to-boundary distances.
inline TrackModel line_reference(const RacingLine& line) {
  std::vector<Vec2> pts(line.pts.size());
  std::vector<double> wl(line.pts.size()), wr(line.pts.size());
  for (size_t i = 0; i < line.pts.size(); ++i) {
    pts[i] = {line.pts[i].x, line.pts[i].y};
    wl[i] = line.pts[i].d_left;
    wr[i] = line.pts[i].d_right;
  }
  return TrackModel(pts, wl, wr);
}

// Fills v by v = min(v_max, sqrt(a_lat_max/|kappa|)) followed by cyclic
// forward/backward passes enforcing the longitudinal limits. The passes are
// monotone (speeds only drop), so the result is the unique fixed point.
inline RacingLine velocity_profile(RacingLine line,
                                   const VehicleLimits& lim) {
  const size_t n = line.pts.size();
  const double ds = line.step();
  for (auto& p : line.pts)
    p.v = std::min(lim.v_max,
                   std::sqrt(lim.a_lat_max / std::max(std::abs(p.kappa),
                                                      1e-12)));
  for (int pass = 0; pass < 1000; ++pass) {
    bool changed = false;
    for (size_t k = 0; k < 2 * n; ++k) {  // two laps so the seam settles
      size_t i = k % n, j = (k + 1) % n;
      double cap = std::sqrt(line.pts[i].v * line.pts[i].v +
                             2.0 * lim.a_lon_max * ds);
      if (line.pts[j].v > cap) {
        line.pts[j].v = cap;
        changed = true;
      }
    }
    for (size_t k = 2 * n; k-- > 0;) {
      size_t i = k % n, j = (k + 1) % n;
      double cap = std::sqrt(line.pts[j].v * line.pts[j].v +
                             2.0 * lim.a_lon_max * ds);
      if (line.pts[i].v > cap) {
        line.pts[i].v = cap;
        changed = true;
      }
    }
    if (!changed) break;
  }
  return line;
}

namespace detail {

// Box bounds for per-waypoint lateral offsets: margin off either edge.
inline void offset_bounds(const TrackModel& track, double margin,
                          Eigen::VectorXd& lb, Eigen::VectorXd& ub) {
  const auto& wps = track.waypoints();
  lb.resize(wps.size());
  ub.resize(wps.size());
  for (size_t i = 0; i < wps.size(); ++i) {
    lb[i] = -(wps[i].w_right - margin);
    ub[i] = wps[i].w_left - margin;
    if (lb[i] >= ub[i])
      throw std::invalid_argument(
          "racing line margin leaves no feasible corridor");
  }
}

inline std::vector<Vec2> offset_points(const TrackModel& track,
                                       const Eigen::VectorXd& d) {
  const auto& wps = track.waypoints();
  std::vector<Vec2> pts(wps.size());
  for (size_t i = 0; i < wps.size(); ++i) {
    Vec2 nrm = heading_vec(wps[i].heading).perp();
    pts[i] = wps[i].pos + nrm * d[i];
  }
  return pts;
}

inline RacingLine line_from_offsets(const TrackModel& track,
                                    const Eigen::VectorXd& d,
                                    const VehicleLimits& lim) {
  const auto& wps = track.waypoints();
  std::vector<Vec2> pts = offset_points(track, d);
  std::vector<double> wl(wps.size()), wr(wps.size());
  for (size_t i = 0; i < wps.size(); ++i) {
    wl[i] = wps[i].w_left - d[i];
    wr[i] = wps[i].w_right + d[i];
  }
  TrackModel ref(pts, wl, wr);
  RacingLine line;
  line.lap_length = ref.length();
  line.pts.reserve(ref.size());
  for (const auto& w : ref.waypoints()) {
    LinePoint p;
    p.s = w.s;
    p.x = w.pos.x;
    p.y = w.pos.y;
    p.heading = w.heading;
    p.kappa = w.kappa;
    p.d_left = w.w_left;
    p.d_right = w.w_right;
    line.pts.push_back(p);
  }
  return velocity_profile(std::move(line), lim);
}

// Projected FISTA over box constraints for a smooth convex objective given
// by value+gradient callback. Runs until the projected-gradient residual
// drops below tol.
template <typename GradFn>
Eigen::VectorXd fista_box(const Eigen::VectorXd& x0,
                          const Eigen::VectorXd& lb,
                          const Eigen::VectorXd& ub, double step, double tol,
                          int max_iters, GradFn grad) {
  auto proj = [&](Eigen::VectorXd v) {
    return v.cwiseMax(lb).cwiseMin(ub).eval();
  };
  Eigen::VectorXd x = proj(x0), y = x, xp = x;
  double tk = 1.0;
  Eigen::VectorXd g(x.size());
  for (int it = 0; it < max_iters; ++it) {
    grad(y, g);
    Eigen::VectorXd xn = proj(y - step * g);
    double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * tk * tk));
    y = xn + ((tk - 1.0) / tn) * (xn - x);
    xp = x;
    x = xn;
    tk = tn;
    // residual check at x itself (not the extrapolated point)
    grad(x, g);
    Eigen::VectorXd fixed_point_gap = x - proj(x - step * g);
    double res = fixed_point_gap.lpNorm<Eigen::Infinity>() / step;
    if (res < tol) break;
  }
  return x;
}

// Discrete signed curvature of the polyline through a,b,c (circumcircle
// reciprocal radius); exact on circles.
inline double three_point_curvature(const Vec2& a, const Vec2& b,
                                    const Vec2& c) {
  Vec2 ab = b - a, bc = c - b, ac = c - a;
  double denom = ab.norm() * bc.norm() * ac.norm();
  if (denom < 1e-15) return 0.0;
  return 2.0 * ab.cross(bc) / denom;
}

}  // namespace detail

inline RacingLine centerline_line(const TrackModel& track,
                                  const VehicleLimits& lim) {
  Eigen::VectorXd d = Eigen::VectorXd::Zero(
      static_cast<Eigen::Index>(track.size()));
  return detail::line_from_offsets(track, d, lim);
}

// Minimizes total polyline length over lateral offsets (convex: each
// segment length is a norm of an affine map of the offsets), projected
// accelerated gradient under the box |d| <= width - margin.  The margin is
// clearance beyond the car's half width, so the body stays off the walls.
inline RacingLine shortest_path_line(const TrackModel& track,
                                     const VehicleLimits& lim,
                                     double margin = 0.1) {
  const auto& wps = track.waypoints();
  const Eigen::Index n = static_cast<Eigen::Index>(wps.size());
  Eigen::VectorXd lb, ub;
  detail::offset_bounds(track, margin + 0.5 * lim.width, lb, ub);

  std::vector<Vec2> nrm(wps.size());
  for (size_t i = 0; i < wps.size(); ++i)
    nrm[i] = heading_vec(wps[i].heading).perp();

  auto grad = [&](const Eigen::VectorXd& d, Eigen::VectorXd& g) {
    g.setZero();
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::Index j = (i + 1) % n;
      Vec2 pi = wps[static_cast<size_t>(i)].pos +
                nrm[static_cast<size_t>(i)] * d[i];
      Vec2 pj = wps[static_cast<size_t>(j)].pos +
                nrm[static_cast<size_t>(j)] * d[j];
      Vec2 u = (pj - pi).normalized();
      g[i] -= u.dot(nrm[static_cast<size_t>(i)]);
      g[j] += u.dot(nrm[static_cast<size_t>(j)]);
    }
  };

  double step = track.spacing() / 4.0;
  Eigen::VectorXd d = detail::fista_box(Eigen::VectorXd::Zero(n), lb, ub,
                                        step, 1e-8, 50000, grad);
  return detail::line_from_offsets(track, d, lim);
}

// Minimizes the sum of squared discrete curvatures: Gauss-Newton outer
// iterations (curvature linearized in the offsets, tridiagonal Jacobian),
// each inner box-QP solved by projected accelerated gradient.
inline RacingLine min_curvature_line(const TrackModel& track,
                                     const VehicleLimits& lim,
                                     double margin = 0.1) {
  const auto& wps = track.waypoints();
  const Eigen::Index n = static_cast<Eigen::Index>(wps.size());
  Eigen::VectorXd lb, ub;
  detail::offset_bounds(track, margin + 0.5 * lim.width, lb, ub);

  auto kappas = [&](const Eigen::VectorXd& d, Eigen::VectorXd& k) {
    std::vector<Vec2> p = detail::offset_points(track, d);
    for (Eigen::Index i = 0; i < n; ++i) {
      size_t im = static_cast<size_t>((i + n - 1) % n);
      size_t ip = static_cast<size_t>((i + 1) % n);
      k[i] = detail::three_point_curvature(p[im], p[static_cast<size_t>(i)],
                                           p[ip]);
    }
  };

  Eigen::VectorXd d = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd kap(n), kp(n), km(n);
  const double fd = 1e-6;
  const double damping = 1e-6;
  const double trust = 0.3;

  for (int outer = 0; outer < 10; ++outer) {
    kappas(d, kap);
    // Tridiagonal Jacobian bands by central differences: offset j only
    // moves kappa at j-1, j, j+1.
    Eigen::MatrixXd band(n, 3);  // columns: dk_{j-1}/dd_j, dk_j/dd_j, dk_{j+1}/dd_j
    Eigen::VectorXd dp = d, dm = d;
    for (Eigen::Index j = 0; j < n; ++j) {
      dp[j] = d[j] + fd;
      dm[j] = d[j] - fd;
      std::vector<Vec2> pp = detail::offset_points(track, dp);
      std::vector<Vec2> pm = detail::offset_points(track, dm);
      for (int off = -1; off <= 1; ++off) {
        Eigen::Index i = (j + off + n) % n;
        size_t im = static_cast<size_t>((i + n - 1) % n);
        size_t ic = static_cast<size_t>(i);
        size_t ip = static_cast<size_t>((i + 1) % n);
        double kp1 = detail::three_point_curvature(pp[im], pp[ic], pp[ip]);
        double km1 = detail::three_point_curvature(pm[im], pm[ic], pm[ip]);
        band(j, off + 1) = (kp1 - km1) / (2.0 * fd);
      }
      dp[j] = d[j];
      dm[j] = d[j];
    }

    auto jmul = [&](const Eigen::VectorXd& v, Eigen::VectorXd& out) {
      // out_i = sum_j J_ij v_j, J_ij nonzero for j in {i-1, i, i+1}
      for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::Index jm = (i + n - 1) % n, jp = (i + 1) % n;
        out[i] = band(jp, 0) * v[jp] + band(i, 1) * v[i] +
                 band(jm, 2) * v[jm];
      }
    };
    auto jtmul = [&](const Eigen::VectorXd& v, Eigen::VectorXd& out) {
      for (Eigen::Index j = 0; j < n; ++j) {
        Eigen::Index im = (j + n - 1) % n, ip = (j + 1) % n;
        out[j] = band(j, 0) * v[im] + band(j, 1) * v[j] +
                 band(j, 2) * v[ip];
      }
    };

    // Lipschitz bound for J^T J via max row sum of |J| squared.
    double jmax = 0.0;
    for (Eigen::Index j = 0; j < n; ++j)
      jmax = std::max(jmax, std::abs(band(j, 0)) + std::abs(band(j, 1)) +
                                std::abs(band(j, 2)));
    double lip = jmax * jmax + damping;

    Eigen::VectorXd tmp(n), jt(n);
    auto grad = [&](const Eigen::VectorXd& delta, Eigen::VectorXd& g) {
      jmul(delta, tmp);
      tmp += kap;
      jtmul(tmp, jt);
      g = jt + damping * delta;
    };

    Eigen::VectorXd dlb = (lb - d).cwiseMax(-trust);
    Eigen::VectorXd dub = (ub - d).cwiseMin(trust);
    Eigen::VectorXd delta = detail::fista_box(
        Eigen::VectorXd::Zero(n), dlb, dub, 1.0 / lip, 1e-8, 20000, grad);
    d += delta;
    if (delta.lpNorm<Eigen::Infinity>() < 1e-6) break;
  }
  return detail::line_from_offsets(track, d, lim);
}

// CSV round trip, header `s,x,y,heading,kappa,v,d_left,d_right`.
inline void save_racing_line(const std::string& path,
                             const RacingLine& line) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write racing line: " + path);
  out << "s,x,y,heading,kappa,v,d_left,d_right\n";
  char buf[320];
  for (const auto& p : line.pts) {
    std::snprintf(buf, sizeof(buf),
                  "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", p.s,
                  p.x, p.y, p.heading, p.kappa, p.v, p.d_left, p.d_right);
    out << buf;
  }
}

inline RacingLine load_racing_line(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open racing line: " + path);
  std::string header;
  if (!std::getline(in, header) ||
      header != "s,x,y,heading,kappa,v,d_left,d_right")
    throw std::invalid_argument("racing line " + path +
                                ": unexpected header");
  RacingLine line;
  std::string row;
  int lineno = 1;
  while (std::getline(in, row)) {
    ++lineno;
    if (row.empty()) continue;
    std::replace(row.begin(), row.end(), ',', ' ');
    std::istringstream ss(row);
    LinePoint p;
    if (!(ss >> p.s >> p.x >> p.y >> p.heading >> p.kappa >> p.v >>
          p.d_left >> p.d_right))
      throw std::invalid_argument("racing line " + path + " line " +
                                  std::to_string(lineno) + ": bad row");
    line.pts.push_back(p);
  }
  if (line.pts.size() < 2)
    throw std::invalid_argument("racing line " + path + ": too few rows");
  // lap length recovered from the uniform spacing
  line.lap_length = line.pts.back().s * static_cast<double>(line.pts.size()) /
                    static_cast<double>(line.pts.size() - 1);
  return line;
}

}  // namespace racekit
