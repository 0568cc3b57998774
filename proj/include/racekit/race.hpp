#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "racekit/collision.hpp"
#include "racekit/planner.hpp"
#include "racekit/sensors.hpp"
#include "racekit/vehicle.hpp"

namespace racekit {

enum class BehaviorKind { MinCurvatureLine, ShortestPathLine, Centerline, Reactive };
enum class PlannerKind { Disabled, Spliner, Predictive };
enum class RacePhase { Trail, Plan, Overtake, Rejoin };

inline const char* to_string(BehaviorKind b) {
  switch (b) {
    case BehaviorKind::MinCurvatureLine: return "min_curvature";
    case BehaviorKind::ShortestPathLine: return "shortest_path";
    case BehaviorKind::Centerline: return "centerline";
    case BehaviorKind::Reactive: return "reactive";
  }
  return "?";
}

inline const char* to_string(PlannerKind p) {
  switch (p) {
    case PlannerKind::Disabled: return "disabled";
    case PlannerKind::Spliner: return "spliner";
    case PlannerKind::Predictive: return "predictive";
  }
  return "?";
}

inline const char* to_string(RacePhase p) {
  switch (p) {
    case RacePhase::Trail: return "trail";
    case RacePhase::Plan: return "plan";
    case RacePhase::Overtake: return "overtake";
    case RacePhase::Rejoin: return "rejoin";
  }
  return "?";
}

struct RaceParams {
  double dt = 0.01;
  double obs_hz = 40.0;
  double plan_hz = 20.0;
  double timeout = 240.0;
  double respawn_gap = 3.0;   // m behind the opponent after each attempt
  double hold_time = 1.0;     // s the lead must persist to score
  double trail_gap = 2.5;     // m the trailing controller aims to keep
  double activation = 8.0;    // m forward gap that arms the planners
  double obs_max_age = 0.5;   // s before a held observation goes stale
  int abort_after = 5;        // consecutive consistency failures
  int stop_after_crashes = 0; // early exit for pass/fail probes; 0 = off
  double k_sigma = 2.0;
  double gp_bin = 0.1;
  ObservationModel obs_model;
  PursuitParams pursuit;
  GpFitConfig gp_fit;
  PropagationParams prop;
  ReactiveParams reactive;
  PlannerWeights weights;  // zero-initialized kappa_max means "derive"
  bool weights_set = false;
};

struct RaceEvent {
  double t = 0.0;
  std::string kind;    // overtake | crash | abort | phase | fit | opp_reset
  std::string detail;
};

struct RaceOutcome {
  int n_overtakes = 0;
  int n_crashes = 0;
  int n_aborts = 0;
  bool timed_out = false;
  double sim_time = 0.0;
  std::vector<double> ego_lap_times;
  std::vector<double> opp_lap_times;
  std::vector<RaceEvent> events;
  long n_plans = 0;
  double plan_time_mean_ms = 0.0;
  double plan_time_std_ms = 0.0;

  double r_otc() const {
    int total = n_overtakes + n_crashes;
    return total > 0 ? static_cast<double>(n_overtakes) / total : 0.0;
  }
};

// Optional per-run capture for artifact writers and plots.
struct RaceTrace {
  struct PoseRow {
    double t, x, y, s, d, v;
  };
  std::vector<PoseRow> ego;
  std::vector<PoseRow> opp;
  std::vector<OpponentObservation> observations;
  std::vector<RocTraceRow> first_roc;
  EvasionTrajectory last_plan;
  std::string gp_json;
  double sample_dt = 0.05;  // pose capture stride
};

// Immutable per-track context, shared across probes and worker threads.
struct RaceSetup {
  TrackModel track;
  TrackWalls walls;
  RacingLine ego_line;
  RacingLine opp_line;       // behaviors I-III; reactive ignores it
  TrackModel line_ref;       // ego line as the Frenet reference
  BehaviorKind behavior;
  VehicleLimits limits;
  double ego_lap_time = 0.0;       // ego line, full profile
  double opp_lap_time_full = 0.0;  // opponent line, full profile

  RaceSetup(TrackModel t, BehaviorKind b, const VehicleLimits& lim,
            double margin = 0.1)
      : track(std::move(t)),
        walls(walls_from_track(track)),
        ego_line(min_curvature_line(track, lim, margin)),
        opp_line(b == BehaviorKind::ShortestPathLine
                     ? shortest_path_line(track, lim, margin)
                     : (b == BehaviorKind::MinCurvatureLine
                            ? ego_line
                            : centerline_line(track, lim))),
        line_ref(line_reference(ego_line)),
        behavior(b),
        limits(lim) {
    ego_lap_time = ego_line.lap_time();
    opp_lap_time_full = opp_line.lap_time();
  }
};

namespace detail {

inline double fold_half(double ds, double lap) {
  double r = std::fmod(ds + 0.5 * lap, lap);
  if (r < 0.0) r += lap;
  return r - 0.5 * lap;
}

// Open-path velocity profile: lateral-acceleration cap plus forward and
// backward longitudinal passes, seeded with the entry speed.
inline void open_profile(std::vector<double>& v, const std::vector<double>& kap,
                         double ds, double v_entry, const VehicleLimits& lim) {
  const size_t n = v.size();
  for (size_t i = 0; i < n; ++i) {
    double klim = std::sqrt(lim.a_lat_max / std::max(std::abs(kap[i]), 1e-12));
    v[i] = std::min(v[i], klim);
  }
  v[0] = std::min(v[0], std::max(v_entry, 0.5));
  for (size_t i = 0; i + 1 < n; ++i)
    v[i + 1] = std::min(v[i + 1],
                        std::sqrt(v[i] * v[i] + 2.0 * lim.a_lon_max * ds));
  for (size_t i = n - 1; i > 0; --i)
    v[i - 1] = std::min(v[i - 1],
                        std::sqrt(v[i] * v[i] + 2.0 * lim.a_lon_max * ds));
}

class RaceRunner {
 public:
  RaceRunner(const RaceSetup& setup, PlannerKind planner, double s_scaler,
             uint64_t seed, const RaceParams& params, RaceTrace* trace)
      : su_(setup),
        kind_(planner),
        s_(s_scaler),
        rp_(params),
        rng_(seed),
        trace_(trace),
        weights_(params.weights_set ? params.weights
                                    : default_weights(setup.limits)),
        planner_(weights_, SplinerParams{2.0, 3.0, 0.6, params.activation}) {
    lap_ = su_.line_ref.length();
    // opponent speed scale so its lap time lands near T_ego / S
    f_ = std::min(1.0, s_ * su_.opp_lap_time_full / su_.ego_lap_time);
    v_cap_reactive_ = s_ * lap_ / su_.ego_lap_time;
    ego_path_ = path_from_line(su_.ego_line);
    opp_path_ = path_from_line(su_.opp_line);
  }

  RaceOutcome run() {
    init_states();
    double next_obs = 0.0;
    double next_plan = 0.0;
    double next_scan = 0.0;
    double next_trace = 0.0;
    const double dt = rp_.dt;

    while (t_ < rp_.timeout) {
      if (out_.n_overtakes >= 5) break;
      if (rp_.stop_after_crashes > 0 && out_.n_crashes >= rp_.stop_after_crashes)
        break;

      // controllers; a tracker losing its path just brakes straight
      VehicleCommand opp_cmd;
      if (su_.behavior == BehaviorKind::Reactive) {
        if (t_ >= next_scan - 1e-12) {
          OrientedBox ego_box = footprint(ego_, su_.limits);
          RangeScan scan = simulate_scan(opp_, su_.walls, 10.0, &ego_box);
          cached_opp_cmd_ = reactive_opponent_control(
              opp_, scan, v_cap_reactive_, su_.limits, rp_.reactive);
          next_scan += 1.0 / rp_.plan_hz;
        }
        opp_cmd = cached_opp_cmd_;
      } else {
        try {
          opp_cmd = pure_pursuit_control(opp_, opp_path_, rp_.pursuit,
                                         su_.limits, f_);
        } catch (const std::runtime_error&) {
          opp_cmd = VehicleCommand{-su_.limits.a_lon_max, 0.0};
        }
      }
      VehicleCommand ego_cmd;
      try {
        ego_cmd = ego_control();
      } catch (const std::runtime_error&) {
        ego_cmd = VehicleCommand{-su_.limits.a_lon_max, 0.0};
        evade_active_ = false;
      }

      ego_ = step_vehicle(ego_, ego_cmd, dt, su_.limits);
      opp_ = step_vehicle(opp_, opp_cmd, dt, su_.limits);
      t_ += dt;

      if (!update_frenet()) {
        handle_crash(CrashKind::EgoWall);
        continue;
      }

      CrashKind ck = detect_crash(ego_, opp_, su_.limits, su_.track);
      if (ck == CrashKind::CarContact || ck == CrashKind::EgoWall) {
        handle_crash(ck);
        continue;
      }
      if (ck == CrashKind::OppWall) {
        reset_opponent();
        continue;
      }

      track_lap_progress();

      if (t_ >= next_obs - 1e-12) {
        take_observation();
        next_obs += 1.0 / rp_.obs_hz;
      }
      if (t_ >= next_plan - 1e-12) {
        planner_tick();
        next_plan += 1.0 / rp_.plan_hz;
      }
      update_lead();

      if (trace_ && t_ >= next_trace - 1e-12) {
        trace_->ego.push_back({t_, ego_.x, ego_.y, ego_f_.s, ego_f_.d, ego_.v});
        trace_->opp.push_back({t_, opp_.x, opp_.y, opp_f_.s, opp_f_.d, opp_.v});
        next_trace += trace_->sample_dt;
      }
    }

    out_.timed_out = t_ >= rp_.timeout && out_.n_overtakes < 5;
    out_.sim_time = t_;
    if (plan_n_ > 0) {
      out_.n_plans = plan_n_;
      out_.plan_time_mean_ms = plan_mean_;
      out_.plan_time_std_ms =
          plan_n_ > 1 ? std::sqrt(plan_m2_ / static_cast<double>(plan_n_ - 1))
                      : 0.0;
    }
    if (trace_ && gp_.lap_length() > 0.0) trace_->gp_json = gp_.to_json().dump(2);
    return out_;
  }

 private:
  void event(const std::string& kind, const std::string& detail = "") {
    out_.events.push_back({t_, kind, detail});
  }

  void set_phase(RacePhase p) {
    if (p == phase_) return;
    phase_ = p;
    event("phase", to_string(p));
  }

  void init_states() {
    const RacingLine& el = su_.ego_line;
    Vec2 p0 = el.position_at(0.0);
    Vec2 p1 = el.position_at(el.step());
    ego_.x = p0.x;
    ego_.y = p0.y;
    ego_.heading = std::atan2(p1.y - p0.y, p1.x - p0.x);
    ego_.v = 0.0;
    ego_.steer = 0.0;

    const RacingLine& ol = su_.opp_line;
    double so = rp_.respawn_gap;  // start a respawn gap ahead of the ego
    Vec2 q0 = ol.position_at(so);
    Vec2 q1 = ol.position_at(ol.wrap(so + ol.step()));
    opp_.x = q0.x;
    opp_.y = q0.y;
    opp_.heading = std::atan2(q1.y - q0.y, q1.x - q0.x);
    opp_.v = 0.0;
    opp_.steer = 0.0;

    update_frenet();
    prev_ego_s_ = ego_f_.s;
    prev_opp_s_ = opp_f_.s;
    ego_lap_start_ = 0.0;
    opp_lap_start_ = 0.0;
    ego_prog_ = 0.0;
    opp_prog_ = 0.0;
  }

  bool update_frenet() {
    try {
      FrenetState ef = su_.line_ref.project({ego_.x, ego_.y});
      ef.v_s = ego_.v * std::cos(ego_.heading - su_.line_ref.heading_at(ef.s));
      FrenetState of = su_.line_ref.project({opp_.x, opp_.y});
      of.v_s = opp_.v * std::cos(opp_.heading - su_.line_ref.heading_at(of.s));
      ego_f_ = ef;
      opp_f_ = of;
      return true;
    } catch (const std::domain_error&) {
      return false;
    }
  }

  void track_lap_progress() {
    double de = detail::fold_half(ego_f_.s - prev_ego_s_, lap_);
    double dopp = detail::fold_half(opp_f_.s - prev_opp_s_, lap_);
    ego_prog_ += de;
    opp_prog_ += dopp;
    prev_ego_s_ = ego_f_.s;
    prev_opp_s_ = opp_f_.s;
    if (ego_prog_ >= lap_) {
      out_.ego_lap_times.push_back(t_ - ego_lap_start_);
      ego_lap_start_ = t_;
      ego_prog_ -= lap_;
    }
    if (opp_prog_ >= lap_) {
      out_.opp_lap_times.push_back(t_ - opp_lap_start_);
      opp_lap_start_ = t_;
      opp_prog_ -= lap_;
      refit_gp();
    }
  }

  void refit_gp() {
    if (obs_.empty()) return;
    BinnedData binned = bin_observations(obs_, rp_.gp_bin, lap_);
    if (binned.coverage() < rp_.gp_fit.min_coverage) return;
    try {
      OpponentTrajectoryGP fresh = OpponentTrajectoryGP::fit(binned, rp_.gp_fit);
      gp_table_ = SampledOpponentModel(fresh);
      gp_ = std::move(fresh);
      event("fit", "coverage=" + std::to_string(binned.coverage()));
    } catch (const std::exception&) {
      // keep the previous model; try again next lap
    }
  }

  void take_observation() {
    auto obs = observe_opponent(ego_, opp_, opp_f_, t_, rp_.obs_model, rng_);
    if (!obs) return;
    obs_.push_back(*obs);
    last_obs_ = *obs;
    if (trace_) trace_->observations.push_back(*obs);
    if (gp_.lap_length() > 0.0) {
      if (!gp_.consistency_check(*obs, rp_.k_sigma)) {
        ++consec_fail_;
        if (consec_fail_ >= rp_.abort_after &&
            (phase_ == RacePhase::Plan || phase_ == RacePhase::Overtake)) {
          ++out_.n_aborts;
          event("abort", "consistency");
          planner_.reset();
          evade_active_ = false;
          consec_fail_ = 0;
          set_phase(RacePhase::Trail);
        }
      } else {
        consec_fail_ = 0;
      }
    }
  }

  VehicleCommand ego_control() {
    if (evade_active_) {
      // progress along the planned path; hand back to the line at its end
      double along = detail::fold_half(ego_f_.s - evade_end_s_, lap_);
      if (along > -0.2) {
        evade_active_ = false;
        set_phase(RacePhase::Rejoin);
      } else {
        return pure_pursuit_control(ego_, evade_path_, rp_.pursuit, su_.limits);
      }
    }
    if (phase_ == RacePhase::Rejoin && std::abs(ego_f_.d) < 0.07)
      set_phase(RacePhase::Trail);

    // trailing: line tracking with a speed cap that holds the gap
    double gap = std::fmod(opp_f_.s - ego_f_.s, lap_);
    if (gap < 0.0) gap += lap_;
    double v_cap = std::numeric_limits<double>::infinity();
    if (gap < 3.0 * rp_.trail_gap) {
      v_cap = std::max(0.0, opp_f_.v_s + 1.2 * (gap - rp_.trail_gap));
      if (gap < 0.9) v_cap = 0.0;
    }
    return pure_pursuit_control(ego_, ego_path_, rp_.pursuit, su_.limits, 1.0,
                                v_cap);
  }

  void planner_tick() {
    if (kind_ == PlannerKind::Disabled) return;
    if (gp_.lap_length() <= 0.0) return;  // still learning the opponent
    if (!last_obs_ || t_ - last_obs_->t > rp_.obs_max_age) return;
    if (phase_ == RacePhase::Rejoin) return;

    auto t0 = std::chrono::steady_clock::now();
    bool did_work = false;
    FrenetState ego_now = ego_f_;
    ego_now.v_s = std::max(ego_now.v_s, 0.1);

    try {
      if (kind_ == PlannerKind::Predictive) {
        did_work = true;  // collision prediction runs every cycle
        RegionOfCollision roc = predict_roc(
            ego_now, last_obs_->s, gp_table_, rp_.prop, su_.ego_line,
            (trace_ && trace_->first_roc.empty() && first_roc_pending_)
                ? &pending_roc_rows_
                : nullptr);
        if (roc.valid) {
          if (phase_ == RacePhase::Trail) set_phase(RacePhase::Plan);
          FrenetState opp_est{last_obs_->s,
                              gp_table_.predict_d(last_obs_->s).first,
                              last_obs_->v_s, 0.0};
          EvasionTrajectory traj =
              planner_.plan(ego_now, opp_est, roc, gp_table_, su_.ego_line);
          if (traj.feasible) {
            if (phase_ != RacePhase::Overtake) {
              char b[80];
              std::snprintf(b, sizeof(b), "%.9g %.9g", roc.c_start, roc.c_end);
              event("roc", b);
            }
            accept_plan(traj);
            if (trace_ && trace_->first_roc.empty() &&
                !pending_roc_rows_.empty()) {
              trace_->first_roc = pending_roc_rows_;
              first_roc_pending_ = false;
            }
          }
          pending_roc_rows_.clear();
        } else if (phase_ == RacePhase::Plan) {
          set_phase(RacePhase::Trail);
        }
      } else {  // baseline spliner on the latest observation
        double gap = std::fmod(last_obs_->s - ego_f_.s, lap_);
        if (gap < 0.0) gap += lap_;
        if (gap < rp_.activation) {
          did_work = true;
          if (phase_ == RacePhase::Trail) set_phase(RacePhase::Plan);
          FrenetState opp_est{last_obs_->s, last_obs_->d, last_obs_->v_s, 0.0};
          EvasionTrajectory traj = baseline_spliner(
              ego_now, opp_est, su_.ego_line, weights_,
              SplinerParams{2.0, 3.0, 0.6, rp_.activation}, spliner_side_);
          if (traj.feasible) {
            spliner_side_ = traj.side;
            accept_plan(traj);
          }
        } else if (phase_ == RacePhase::Plan) {
          spliner_side_ = 0;
          set_phase(RacePhase::Trail);
        }
      }
    } catch (const std::exception& e) {
      event("plan_error", e.what());
      planner_.reset();
    }

    if (did_work) {
      double ms = std::chrono::duration<double, std::milli>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
      ++plan_n_;
      double delta = ms - plan_mean_;
      plan_mean_ += delta / static_cast<double>(plan_n_);
      plan_m2_ += delta * (ms - plan_mean_);
    }
  }

  void accept_plan(const EvasionTrajectory& traj) {
    evade_path_.pts.clear();
    evade_path_.v.clear();
    evade_path_.kappa.clear();
    evade_path_.closed = false;
    const size_t n = traj.s.size();
    std::vector<double> kf = frenet_curvature(traj.d, traj.s,
                                              weights_.curvature_exponent);
    std::vector<double> vmax(n);
    evade_path_.pts.reserve(n);
    evade_path_.kappa.reserve(n);
    for (size_t i = 0; i < n; ++i) {
      double sw = su_.ego_line.wrap(traj.s[i]);
      Vec2 p = su_.line_ref.position_at(sw, traj.d[i]);
      evade_path_.pts.push_back(p);
      double kt = kf[i] + su_.ego_line.kappa_at(sw);
      evade_path_.kappa.push_back(kt);
      vmax[i] = su_.ego_line.v_at(sw);
    }
    detail::open_profile(vmax, evade_path_.kappa, traj.step(),
                         std::max(ego_.v, 0.5), su_.limits);
    evade_path_.v = std::move(vmax);
    evade_active_ = true;
    evade_end_s_ = su_.ego_line.wrap(traj.s.back());
    if (trace_) trace_->last_plan = traj;
    set_phase(RacePhase::Overtake);
  }

  void update_lead() {
    double lead = detail::fold_half(ego_f_.s - opp_f_.s, lap_);
    if (lead > su_.limits.length) {
      lead_hold_ += rp_.dt;
      if (lead_hold_ >= rp_.hold_time) {
        ++out_.n_overtakes;
        event("overtake", "lead=" + std::to_string(lead));
        lead_hold_ = 0.0;
        if (out_.n_overtakes < 5) respawn_ego();
      }
    } else {
      lead_hold_ = 0.0;
    }
  }

  void handle_crash(CrashKind ck) {
    ++out_.n_crashes;
    event("crash", ck == CrashKind::CarContact ? "car_contact" : "wall");
    lead_hold_ = 0.0;
    respawn_ego();
  }

  void respawn_ego() {
    double sr = su_.ego_line.wrap(opp_f_.s - rp_.respawn_gap);
    place_on_line(ego_, su_.ego_line, sr);
    ego_.v = std::min(opp_.v, su_.ego_line.v_at(sr));
    planner_.reset();
    evade_active_ = false;
    spliner_side_ = 0;
    consec_fail_ = 0;
    lead_hold_ = 0.0;
    set_phase(RacePhase::Trail);
    update_frenet();
    prev_ego_s_ = ego_f_.s;
    // lap bookkeeping restarts cleanly after the teleport
    ego_prog_ = 0.0;
    ego_lap_start_ = t_;
  }

  void reset_opponent() {
    double sr = su_.opp_line.wrap(opp_f_.s);
    place_on_line(opp_, su_.opp_line, sr);
    opp_.v = 0.5 * su_.opp_line.v_at(sr) * f_;
    event("opp_reset");
    update_frenet();
    prev_opp_s_ = opp_f_.s;
  }

  static void place_on_line(VehicleState& st, const RacingLine& line,
                            double s) {
    Vec2 p0 = line.position_at(s);
    Vec2 p1 = line.position_at(line.wrap(s + line.step()));
    st.x = p0.x;
    st.y = p0.y;
    st.heading = std::atan2(p1.y - p0.y, p1.x - p0.x);
    st.steer = 0.0;
  }

  const RaceSetup& su_;
  PlannerKind kind_;
  double s_;
  RaceParams rp_;
  std::mt19937_64 rng_;
  RaceTrace* trace_;
  PlannerWeights weights_;
  SqpPlanner planner_;

  double lap_ = 0.0;
  double f_ = 1.0;
  double v_cap_reactive_ = 0.0;
  TrackedPath ego_path_, opp_path_, evade_path_;
  VehicleState ego_, opp_;
  FrenetState ego_f_, opp_f_;
  VehicleCommand cached_opp_cmd_;
  RacePhase phase_ = RacePhase::Trail;
  RaceOutcome out_;

  double t_ = 0.0;
  double prev_ego_s_ = 0.0, prev_opp_s_ = 0.0;
  double ego_prog_ = 0.0, opp_prog_ = 0.0;
  double ego_lap_start_ = 0.0, opp_lap_start_ = 0.0;
  double lead_hold_ = 0.0;

  std::vector<OpponentObservation> obs_;
  std::optional<OpponentObservation> last_obs_;
  OpponentTrajectoryGP gp_;
  SampledOpponentModel gp_table_;
  int consec_fail_ = 0;
  bool evade_active_ = false;
  double evade_end_s_ = 0.0;
  int spliner_side_ = 0;
  bool first_roc_pending_ = true;
  std::vector<RocTraceRow> pending_roc_rows_;

  long plan_n_ = 0;
  double plan_mean_ = 0.0, plan_m2_ = 0.0;
};

}  // namespace detail

inline RaceOutcome run_race(const RaceSetup& setup, PlannerKind planner,
                            double s_scaler, uint64_t seed,
                            const RaceParams& params = {},
                            RaceTrace* trace = nullptr) {
  if (!(s_scaler > 0.0 && s_scaler <= 1.0))
    throw std::invalid_argument("run_race: speed scaler must be in (0, 1]");
  detail::RaceRunner runner(setup, planner, s_scaler, seed, params, trace);
  return runner.run();
}

struct SmaxResult {
  bool found = false;
  double s_max = 0.0;   // valid when found
  int probes = 0;
  std::vector<std::pair<double, bool>> tested;  // (S, passed)
};

// Bisection on the 0.01 grid over [0.30, 0.95] for the largest passing S.
// Equal-width splits round down, so ties resolve toward the lower S.
template <typename PassFn>
SmaxResult bisect_smax(PassFn&& passes, int lo_k = 30, int hi_k = 95) {
  SmaxResult r;
  auto probe = [&](int k) {
    bool ok = passes(static_cast<double>(k) / 100.0);
    r.tested.emplace_back(static_cast<double>(k) / 100.0, ok);
    ++r.probes;
    return ok;
  };
  if (!probe(lo_k)) return r;  // even the floor fails: report < lower bound
  if (probe(hi_k)) {
    r.found = true;
    r.s_max = static_cast<double>(hi_k) / 100.0;
    return r;
  }
  int lo = lo_k, hi = hi_k;
  while (hi - lo > 1) {
    int mid = lo + (hi - lo) / 2;
    if (probe(mid))
      lo = mid;
    else
      hi = mid;
  }
  r.found = true;
  r.s_max = static_cast<double>(lo) / 100.0;
  return r;
}

inline bool race_passes(const RaceSetup& setup, PlannerKind planner, double s,
                        uint64_t seed, const RaceParams& params) {
  RaceParams rp = params;
  rp.stop_after_crashes = 1;  // any crash already fails the probe
  RaceOutcome o = run_race(setup, planner, s, seed, rp);
  return o.n_overtakes >= 5 && o.n_crashes == 0;
}

inline SmaxResult measure_smax(const RaceSetup& setup, PlannerKind planner,
                               uint64_t seed, const RaceParams& params = {}) {
  return bisect_smax([&](double s) {
    return race_passes(setup, planner, s, seed, params);
  });
}

}  // namespace racekit
