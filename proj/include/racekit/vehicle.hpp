#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "racekit/geometry.hpp"
#include "racekit/racing_line.hpp"

namespace racekit {

struct VehicleState {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
  double v = 0.0;
  double steer = 0.0;
};

struct VehicleCommand {
  double accel = 0.0;  // m/s^2, clamped to +-a_lon_max
  double steer = 0.0;  // target steering angle, slewed at steer_rate
};

inline OrientedBox footprint(const VehicleState& st, const VehicleLimits& lim) {
  return OrientedBox{{st.x, st.y}, st.heading, lim.length, lim.width};
}

// Kinematic bicycle, integrated exactly along the circular arc the steering
// angle implies. Steering slews toward the command at steer_rate and
// saturates at steer_max; speed never goes negative.
inline VehicleState step_vehicle(const VehicleState& st,
                                 const VehicleCommand& cmd, double dt,
                                 const VehicleLimits& lim) {
  if (!(dt > 0.0)) throw std::invalid_argument("step_vehicle: dt must be > 0");
  VehicleState out = st;

  double target = std::clamp(cmd.steer, -lim.steer_max, lim.steer_max);
  double dmax = lim.steer_rate * dt;
  out.steer = st.steer + std::clamp(target - st.steer, -dmax, dmax);

  double a = std::clamp(cmd.accel, -lim.a_lon_max, lim.a_lon_max);
  double v1 = st.v + a * dt;
  double ds;
  if (v1 < 0.0) {
    ds = -st.v * st.v / (2.0 * a);  // rolls to a stop inside the step
    v1 = 0.0;
  } else {
    ds = st.v * dt + 0.5 * a * dt * dt;
  }
  out.v = std::min(v1, lim.v_max);

  double k = std::tan(out.steer) / lim.wheelbase;
  if (std::abs(k) < 1e-9) {
    out.x = st.x + std::cos(st.heading) * ds;
    out.y = st.y + std::sin(st.heading) * ds;
  } else {
    double dth = k * ds;
    out.x = st.x + (std::sin(st.heading + dth) - std::sin(st.heading)) / k;
    out.y = st.y - (std::cos(st.heading + dth) - std::cos(st.heading)) / k;
    out.heading = wrap_angle(st.heading + dth);
  }
  return out;
}

// Sampled path handed to the tracker. Closed paths wrap; open paths hold
// their last point as the target once the lookahead runs past the end.
struct TrackedPath {
  std::vector<Vec2> pts;
  std::vector<double> v;
  std::vector<double> kappa;
  bool closed = true;

  size_t size() const { return pts.size(); }
};

inline TrackedPath path_from_line(const RacingLine& line) {
  TrackedPath p;
  p.closed = true;
  p.pts.reserve(line.pts.size());
  p.v.reserve(line.pts.size());
  p.kappa.reserve(line.pts.size());
  for (const LinePoint& lp : line.pts) {
    p.pts.push_back({lp.x, lp.y});
    p.v.push_back(lp.v);
    p.kappa.push_back(lp.kappa);
  }
  return p;
}

struct PursuitParams {
  double lookahead_base = 0.35;
  double lookahead_gain = 0.18;  // seconds of travel added to the base
  double lookahead_min = 0.30;
  double speed_gain = 3.0;       // accel per m/s of speed error
};

inline size_t nearest_path_index(const TrackedPath& path, Vec2 p) {
  size_t best = 0;
  double best_d = std::numeric_limits<double>::max();
  for (size_t i = 0; i < path.pts.size(); ++i) {
    double d = (path.pts[i] - p).squared_norm();
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

// Pure pursuit with a curvature feedforward term. The chord to the
// lookahead point gives the feedback curvature; the same chord measured
// from the reference pose at the nearest path point is subtracted out and
// replaced by the path curvature, so on-path tracking commands the path
// curvature exactly and the chord only corrects deviations.
inline VehicleCommand pure_pursuit_control(
    const VehicleState& st, const TrackedPath& path, const PursuitParams& pp,
    const VehicleLimits& lim, double v_scale = 1.0,
    double v_cap = std::numeric_limits<double>::infinity()) {
  const size_t n = path.pts.size();
  if (n < 2) throw std::invalid_argument("pure_pursuit: path too short");

  double lookahead =
      std::max(pp.lookahead_min, pp.lookahead_base + pp.lookahead_gain * st.v);
  Vec2 pos{st.x, st.y};
  size_t ni = nearest_path_index(path, pos);
  double nd = (path.pts[ni] - pos).norm();
  if (nd > 2.0 * lookahead)
    throw std::runtime_error(
        "pure_pursuit: no path point within twice the lookahead distance");

  // walk forward to the lookahead target
  size_t ti = ni;
  double acc = 0.0;
  size_t limit = path.closed ? n : n - 1 - ni;
  for (size_t k = 0; k < limit; ++k) {
    size_t next = path.closed ? (ti + 1) % n : ti + 1;
    acc += (path.pts[next] - path.pts[ti]).norm();
    ti = next;
    if (acc >= lookahead) break;
  }
  Vec2 tgt = path.pts[ti];
  double chord = (tgt - pos).norm();

  double k_cmd;
  if (chord < 1e-6) {
    k_cmd = path.kappa[ni];
  } else {
    double ang = std::atan2(tgt.y - pos.y, tgt.x - pos.x);
    double alpha = wrap_angle(ang - st.heading);
    double k_fb = 2.0 * std::sin(alpha) / chord;

    // chord curvature the reference pose itself would measure
    Vec2 rp = path.pts[ni];
    size_t nn = path.closed ? (ni + 1) % n : std::min(ni + 1, n - 1);
    Vec2 rt = path.pts[nn] - path.pts[ni == nn ? ni - 1 : ni];
    double ref_heading = std::atan2(rt.y, rt.x);
    Vec2 rc = tgt - rp;
    double rchord = rc.norm();
    double k_ref_chord = 0.0;
    if (rchord > 1e-6) {
      double ralpha = wrap_angle(std::atan2(rc.y, rc.x) - ref_heading);
      k_ref_chord = 2.0 * std::sin(ralpha) / rchord;
    }
    k_cmd = k_fb - k_ref_chord + path.kappa[ni];
  }

  VehicleCommand cmd;
  cmd.steer = std::atan(k_cmd * lim.wheelbase);

  double v_tgt = std::min(path.v[ti], path.v[ni]);  // preview braking
  v_tgt = std::min(v_tgt * v_scale, v_cap);
  cmd.accel = std::clamp(pp.speed_gain * (v_tgt - st.v), -lim.a_lon_max,
                         lim.a_lon_max);
  return cmd;
}

}  // namespace racekit
