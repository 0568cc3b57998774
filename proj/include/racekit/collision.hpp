#pragma once

#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "racekit/opponent.hpp"
#include "racekit/racing_line.hpp"

namespace racekit {

struct PropagationParams {
  double dt = 0.02;         // s
  double horizon = 5.0;     // s
  double delta = 0.6;       // m, longitudinal collision threshold
  bool stochastic = false;  // sample opponent speed instead of using the mean
};

// Predicted collision interval in ego arc-length coordinates.
struct RegionOfCollision {
  bool valid = false;
  bool open_ended = false;  // opponent never cleared within the horizon
  double c_start = 0.0;     // ego s where the gap first closes below delta
  double c_end = 0.0;       // ego s where the gap opens back past delta
  double t_s = 0.0;
  double t_e = 0.0;
};

struct RocTraceRow {
  double t, s_ego, s_opp, gap;
};

// Forward propagation of both cars over the horizon. The ego follows its
// racing-line speed profile (a = v dv/ds at the propagated position), the
// opponent advances at the GP speed prediction for its current position.
// The gap is the wrapped forward distance from ego to opponent, so the
// region also closes once the ego moves past.
template <class OppModel>
RegionOfCollision predict_roc(const FrenetState& ego, double opp_s0,
                              const OppModel& gp, const PropagationParams& p,
                              const RacingLine& ego_line,
                              std::vector<RocTraceRow>* trace = nullptr,
                              std::mt19937_64* rng = nullptr) {
  if (!(gp.lap_length() > 0.0))
    throw std::invalid_argument("predict_roc: GP is not fitted");
  if (!(p.dt > 0.0) || !(p.horizon >= p.dt) || !(p.delta > 0.0))
    throw std::invalid_argument("predict_roc: bad propagation parameters");

  const double lap = ego_line.lap_length;
  auto wrap = [&](double s) {
    double r = std::fmod(s, lap);
    return r < 0.0 ? r + lap : r;
  };

  double s_e = ego.s, v_e = ego.v_s, s_o = opp_s0;
  RegionOfCollision roc;
  bool inside = false;
  const int steps = static_cast<int>(std::floor(p.horizon / p.dt));
  for (int k = 0; k <= steps; ++k) {
    double t = k * p.dt;
    double gap = wrap(s_o - s_e);
    if (trace) trace->push_back({t, wrap(s_e), wrap(s_o), gap});
    if (!inside && gap < p.delta) {
      roc.c_start = wrap(s_e);
      roc.t_s = t;
      inside = true;
    } else if (inside && gap > p.delta) {
      roc.c_end = wrap(s_e);
      roc.t_e = t;
      roc.valid = true;
      return roc;
    }
    if (k == steps) break;

    double a_e = ego_line.accel_at(s_e);
    auto [v_o, v_o_std] = gp.predict_vs(s_o);
    if (p.stochastic && rng) {
      std::normal_distribution<double> dist(v_o, v_o_std);
      v_o = dist(*rng);
    }
    s_e += v_e * p.dt + 0.5 * a_e * p.dt * p.dt;
    v_e = std::max(0.0, v_e + a_e * p.dt);
    s_o += std::max(0.0, v_o) * p.dt;
    if (!std::isfinite(s_e) || !std::isfinite(s_o) || !std::isfinite(v_e))
      throw std::runtime_error("predict_roc: non-finite propagation");
  }
  if (inside) {
    roc.c_end = wrap(s_e);
    roc.t_e = steps * p.dt;
    roc.valid = true;
    roc.open_ended = true;
  }
  return roc;
}

// Padded planner window around the region, wrapped onto the lap.
inline std::pair<double, double> roc_window(const RegionOfCollision& roc,
                                            double pad, double lap_length) {
  if (!roc.valid)
    throw std::invalid_argument("roc_window: invalid region of collision");
  auto wrap = [&](double s) {
    double r = std::fmod(s, lap_length);
    return r < 0.0 ? r + lap_length : r;
  };
  return {wrap(roc.c_start - pad), wrap(roc.c_end + pad)};
}

inline void save_roc_trace(const std::string& path,
                           const std::vector<RocTraceRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write RoC trace: " + path);
  out << "t,s_ego,s_opp,gap\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%.9g,%.9g,%.9g,%.9g\n", r.t, r.s_ego,
                  r.s_opp, r.gap);
    out << buf;
  }
}

}  // namespace racekit
