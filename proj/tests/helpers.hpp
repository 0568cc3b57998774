// Shared fixtures for the test suites: canonical tracks and small utilities.
#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "racekit/track.hpp"
#include "racekit/track_shapes.hpp"

namespace racekit::testing {

inline std::string track_dir() { return TRACK_DATA_DIR; }

inline std::string stadium_path() { return track_dir() + "/stadium.txt"; }
inline std::string wavy_path() { return track_dir() + "/wavy.txt"; }

// Counter-clockwise circle centered at the origin. With this orientation the
// left normal (+d) points toward the center, so position_at(s, d) sits at
// radius R - d.
inline TrackModel circle_track(double radius, double half_width,
                               int n_points = 0) {
  TrackBlueprint bp = circle_blueprint(radius, half_width, n_points);
  return bp.build();
}

inline TrackModel stadium_track() {
  return stadium_blueprint(10.0, 2.5, 1.0).build();
}

// Smallest absolute distance between two arc positions on a lap.
inline double s_distance(double a, double b, double lap) {
  double r = std::fmod(std::abs(a - b), lap);
  return std::min(r, lap - r);
}

}  // namespace racekit::testing
