#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include "racekit/geometry.hpp"
#include "racekit/opponent.hpp"
#include "racekit/track.hpp"
#include "racekit/vehicle.hpp"

namespace racekit {

// Wall polylines lifted off the centerline by the local widths.
struct TrackWalls {
  std::vector<Vec2> left;
  std::vector<Vec2> right;
};

inline TrackWalls walls_from_track(const TrackModel& track) {
  TrackWalls w;
  const auto& wps = track.waypoints();
  w.left.reserve(wps.size());
  w.right.reserve(wps.size());
  for (const auto& wp : wps) {
    Vec2 n = heading_vec(wp.heading).perp();
    w.left.push_back(wp.pos + wp.w_left * n);
    w.right.push_back(wp.pos - wp.w_right * n);
  }
  return w;
}

struct RangeScan {
  double fov = 4.71238898038469;   // 270 degrees
  double step = 0.017453292519943295;  // 1 degree
  double max_range = 10.0;
  std::vector<double> ranges;  // beam 0 at heading - fov/2

  size_t beams() const { return ranges.size(); }
  double angle_of(size_t i) const {
    return -0.5 * fov + static_cast<double>(i) * step;
  }
};

// Casts the scan against both walls and, when given, the other car's box.
// Beams sweep counterclockwise from heading - 135 deg to heading + 135 deg.
inline RangeScan simulate_scan(const VehicleState& st, const TrackWalls& walls,
                               double max_range = 10.0,
                               const OrientedBox* other = nullptr) {
  RangeScan scan;
  scan.max_range = max_range;
  size_t n_beams = static_cast<size_t>(std::round(scan.fov / scan.step)) + 1;
  scan.ranges.assign(n_beams, max_range);
  Vec2 origin{st.x, st.y};

  // prune far wall segments once per scan
  auto gather = [&](const std::vector<Vec2>& poly,
                    std::vector<std::pair<Vec2, Vec2>>& segs) {
    const size_t n = poly.size();
    for (size_t i = 0; i < n; ++i) {
      Vec2 a = poly[i], b = poly[(i + 1) % n];
      double r = std::max((a - origin).norm(), (b - origin).norm());
      if (r - (a - b).norm() <= max_range) segs.emplace_back(a, b);
    }
  };
  std::vector<std::pair<Vec2, Vec2>> segs;
  gather(walls.left, segs);
  gather(walls.right, segs);
  if (other) {
    auto c = other->corners();
    for (int i = 0; i < 4; ++i) segs.emplace_back(c[i], c[(i + 1) % 4]);
  }

  for (size_t i = 0; i < n_beams; ++i) {
    Vec2 dir = heading_vec(st.heading + scan.angle_of(i));
    double best = max_range;
    for (const auto& [a, b] : segs) {
      double t = ray_segment_hit(origin, dir, a, b);
      if (t >= 0.0 && t < best) best = t;
    }
    scan.ranges[i] = best;
  }
  return scan;
}

struct ReactiveParams {
  double bubble_radius = 0.45;    // m carved around the nearest obstacle
  double gap_threshold = 1.2;     // m, beams shorter than this split gaps
  double emergency_range = 0.7;   // m dead ahead triggers hard braking
  double emergency_decel = 4.0;
  double target_clip = 2.5;       // m, cap on the chase point distance
};

// Follow-the-gap: carve a safety bubble around the nearest return, pick the
// widest clear gap (ties go left), chase its center. Short forward ranges
// trigger an emergency slowdown.
inline VehicleCommand reactive_opponent_control(const VehicleState& st,
                                                const RangeScan& scan,
                                                double v_cap,
                                                const VehicleLimits& lim,
                                                const ReactiveParams& rp = {}) {
  const size_t n = scan.beams();
  std::vector<double> r = scan.ranges;

  size_t nearest = 0;
  for (size_t i = 1; i < n; ++i)
    if (r[i] < r[nearest]) nearest = i;
  if (r[nearest] < scan.max_range) {
    double arc = std::max(r[nearest], 0.1);
    int half = static_cast<int>(std::ceil(rp.bubble_radius / (arc * scan.step)));
    for (int k = -half; k <= half; ++k) {
      long j = static_cast<long>(nearest) + k;
      if (j >= 0 && j < static_cast<long>(n)) r[static_cast<size_t>(j)] = 0.0;
    }
  }

  // widest run of clear beams; on equal width prefer the later (left) run
  size_t best_lo = 0, best_len = 0;
  size_t i = 0;
  while (i < n) {
    if (r[i] < rp.gap_threshold) {
      ++i;
      continue;
    }
    size_t j = i;
    while (j < n && r[j] >= rp.gap_threshold) ++j;
    if (j - i >= best_len) {
      best_len = j - i;
      best_lo = i;
    }
    i = j;
  }

  VehicleCommand cmd;
  double aim;
  if (best_len == 0) {
    aim = 0.0;  // boxed in: hold the heading and brake
  } else {
    size_t mid = best_lo + best_len / 2;
    aim = scan.angle_of(mid);
  }
  double reach = rp.target_clip;
  double k_cmd = 2.0 * std::sin(aim) / std::max(reach, 0.3);
  cmd.steer = std::atan(k_cmd * lim.wheelbase);

  // emergency window: +-15 degrees around straight ahead
  double fwd = scan.max_range;
  for (size_t b = 0; b < n; ++b)
    if (std::abs(scan.angle_of(b)) <= 0.262)
      fwd = std::min(fwd, scan.ranges[b]);

  double v_tgt = v_cap;
  if (fwd < rp.emergency_range)
    v_tgt = std::min(v_tgt, v_cap * fwd / rp.emergency_range);
  if (best_len == 0) v_tgt = 0.0;
  cmd.accel = std::clamp(3.0 * (v_tgt - st.v), -rp.emergency_decel,
                         lim.a_lon_max);
  return cmd;
}

// Opponent perception: range and field-of-view gated, Gaussian noise on the
// lateral offset and speed, occasional dropouts. Returns nothing when the
// opponent is not detected this frame.
struct ObservationModel {
  double sigma_d = 0.03;
  double sigma_vs = 0.15;
  double dropout = 0.05;
  double range = 12.0;
  double fov_half = 2.356194490192345;  // +-135 degrees
};

inline std::optional<OpponentObservation> observe_opponent(
    const VehicleState& ego, const VehicleState& opp,
    const FrenetState& opp_frenet, double t, const ObservationModel& m,
    std::mt19937_64& rng) {
  // fixed draw order keeps runs reproducible regardless of visibility
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  double drop = u(rng);
  double nd = gauss(rng);
  double nv = gauss(rng);

  Vec2 rel{opp.x - ego.x, opp.y - ego.y};
  double dist = rel.norm();
  if (dist > m.range) return std::nullopt;
  double bearing = wrap_angle(std::atan2(rel.y, rel.x) - ego.heading);
  if (std::abs(bearing) > m.fov_half) return std::nullopt;
  if (drop < m.dropout) return std::nullopt;

  OpponentObservation obs;
  obs.s = opp_frenet.s;
  obs.d = opp_frenet.d + m.sigma_d * nd;
  obs.v_s = opp_frenet.v_s + m.sigma_vs * nv;
  obs.t = t;
  return obs;
}

enum class CrashKind { None, CarContact, EgoWall, OppWall };

// Car-versus-car contact by box overlap; wall contact by any footprint
// corner leaving the corridor at its own arc position.
inline bool footprint_off_track(const VehicleState& st,
                                const VehicleLimits& lim,
                                const TrackModel& track) {
  auto corners = footprint(st, lim).corners();
  for (const Vec2& c : corners) {
    try {
      FrenetState f = track.project(c);
      if (f.d > track.width_left_at(f.s) || -f.d > track.width_right_at(f.s))
        return true;
    } catch (const std::domain_error&) {
      return true;  // far outside the corridor
    }
  }
  return false;
}

inline CrashKind detect_crash(const VehicleState& ego,
                              const VehicleState& opp,
                              const VehicleLimits& lim,
                              const TrackModel& track) {
  if (boxes_overlap(footprint(ego, lim), footprint(opp, lim)))
    return CrashKind::CarContact;
  if (footprint_off_track(ego, lim, track)) return CrashKind::EgoWall;
  if (footprint_off_track(opp, lim, track)) return CrashKind::OppWall;
  return CrashKind::None;
}

}  // namespace racekit
