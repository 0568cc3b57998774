#pragma once

#include <cmath>
#include <vector>

#include "racekit/track.hpp"

namespace racekit {

struct TrackBlueprint {
  std::vector<Vec2> centerline;
  std::vector<double> w_left;
  std::vector<double> w_right;

  TrackModel build() const { return TrackModel(centerline, w_left, w_right); }
};

// Ring of radius R, constant corridor width; handy because every geometric
// quantity has a closed form.
inline TrackBlueprint circle_blueprint(double radius, double half_width,
                                       int n_points = 0) {
  TrackBlueprint bp;
  int n = n_points > 0
              ? n_points
              : std::max(24, static_cast<int>(2.0 * M_PI * radius / 0.35));
  bp.centerline.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    double th = 2.0 * M_PI * static_cast<double>(i) / n;
    bp.centerline.push_back({radius * std::cos(th), radius * std::sin(th)});
  }
  bp.w_left.assign(static_cast<size_t>(n), half_width);
  bp.w_right.assign(static_cast<size_t>(n), half_width);
  return bp;
}

// Two straights joined by semicircular ends.
inline TrackBlueprint stadium_blueprint(double straight = 10.0,
                                        double radius = 2.5,
                                        double half_width = 1.0,
                                        double spacing = 0.35) {
  TrackBlueprint bp;
  auto push = [&](Vec2 p) { bp.centerline.push_back(p); };

  int n_str = std::max(4, static_cast<int>(straight / spacing));
  int n_arc = std::max(6, static_cast<int>(M_PI * radius / spacing));

  for (int i = 0; i < n_str; ++i)  // bottom, left to right
    push({straight * static_cast<double>(i) / n_str, -radius});
  for (int i = 0; i < n_arc; ++i) {  // right cap
    double th = -0.5 * M_PI + M_PI * static_cast<double>(i) / n_arc;
    push({straight + radius * std::cos(th), radius * std::sin(th)});
  }
  for (int i = 0; i < n_str; ++i)  // top, right to left
    push({straight * (1.0 - static_cast<double>(i) / n_str), radius});
  for (int i = 0; i < n_arc; ++i) {  // left cap
    double th = 0.5 * M_PI + M_PI * static_cast<double>(i) / n_arc;
    push({radius * std::cos(th), radius * std::sin(th)});
  }
  size_t n = bp.centerline.size();
  bp.w_left.assign(n, half_width);
  bp.w_right.assign(n, half_width);
  return bp;
}

// Smoothly waved ring: radius modulated by two low harmonics, giving a mix
// of tight and open corners with no self-intersection.
inline TrackBlueprint wavy_blueprint(double base_radius = 9.0,
                                     double half_width = 1.0,
                                     int n_points = 180) {
  TrackBlueprint bp;
  bp.centerline.reserve(static_cast<size_t>(n_points));
  for (int i = 0; i < n_points; ++i) {
    double th = 2.0 * M_PI * static_cast<double>(i) / n_points;
    double r = base_radius *
               (1.0 + 0.14 * std::sin(2.0 * th) + 0.07 * std::sin(3.0 * th));
    bp.centerline.push_back({r * std::cos(th), r * std::sin(th)});
  }
  size_t n = bp.centerline.size();
  bp.w_left.assign(n, half_width);
  bp.w_right.assign(n, half_width);
  return bp;
}

}  // namespace racekit
