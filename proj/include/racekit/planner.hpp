#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "racekit/collision.hpp"
#include "racekit/qp.hpp"
#include "racekit/racing_line.hpp"

namespace racekit {

struct PlannerWeights {
  double q_d = 1.0;        // deviation from the racing line
  double q_ds = 5.0;       // squared second differences of d over s
  double q_d_delta = 10.0; // initial jump (d_1 - d_0)^2
  double delta_min = 0.5;  // lateral clearance to the opponent, m
  double kappa_max = 1.3;  // total curvature bound, 1/m
  double boundary_margin = 0.25;  // shrink of the lateral corridor, m
  double curvature_exponent = 1.5;  // denominator exponent p (1.5 standard)
  // clearance band extension fore/aft of the predicted overlap window; the
  // window bounds center collisions, the extension covers body length,
  // entry timing error, and holding the offset until genuinely clear
  double band_pre = 1.5;
  double band_post = 2.5;
  bool signed_deviation = false;    // true: penalize sum of d_i as printed
};

inline PlannerWeights default_weights(const VehicleLimits& lim,
                                      double margin = 0.1) {
  PlannerWeights w;
  // two swerving bodies can touch past one car width of center offset, so
  // pad the half-width pair with a full extra width
  w.delta_min = lim.width + 0.3;
  w.kappa_max = lim.kappa_max();
  w.boundary_margin = 0.5 * lim.width + margin;
  return w;
}

// Lateral-offset trajectory on a uniform s grid, stitched back to the
// racing line at the tail (last two offsets are zero).
struct EvasionTrajectory {
  std::vector<double> s;  // unwrapped, uniform spacing, starts at the ego
  std::vector<double> d;
  int side = 0;  // +1 pass on the left, -1 pass on the right
  double cost = 0.0;
  bool feasible = false;
  bool has_window = false;   // clearance window (RoC) attached
  double window_lo = 0.0;    // wrapped ego s
  double window_hi = 0.0;

  double step() const { return s.size() > 1 ? s[1] - s[0] : 0.0; }

  // Offset at an arbitrary wrapped position; zero outside the span.
  double d_at(double s_query, double lap_length) const {
    if (s.size() < 2) return 0.0;
    double rel = s_query - std::fmod(s.front(), lap_length);
    rel = std::fmod(rel, lap_length);
    if (rel < 0.0) rel += lap_length;
    double span = s.back() - s.front();
    if (rel > span) return 0.0;
    double h = step();
    size_t i = std::min(static_cast<size_t>(rel / h), s.size() - 2);
    double fr = rel / h - static_cast<double>(i);
    return d[i] + (d[i + 1] - d[i]) * fr;
  }
};

// kappa_frenet = (s'd'' - d's'')/(s'^2 + d'^2)^p with derivatives taken by
// finite differences in the point index. Endpoints copy their neighbors.
inline std::vector<double> frenet_curvature(const std::vector<double>& d,
                                            const std::vector<double>& s,
                                            double exponent = 1.5) {
  if (d.size() != s.size() || d.size() < 3)
    throw std::invalid_argument("frenet_curvature: need >= 3 points");
  const size_t n = d.size();
  for (size_t i = 0; i + 1 < n; ++i)
    if (s[i + 1] == s[i] && d[i + 1] == d[i])
      throw std::invalid_argument(
          "frenet_curvature: duplicate consecutive points");
  std::vector<double> k(n, 0.0);
  for (size_t i = 1; i + 1 < n; ++i) {
    double sd = 0.5 * (s[i + 1] - s[i - 1]);
    double dd = 0.5 * (d[i + 1] - d[i - 1]);
    double sdd = s[i + 1] - 2.0 * s[i] + s[i - 1];
    double ddd = d[i + 1] - 2.0 * d[i] + d[i - 1];
    double base = sd * sd + dd * dd;
    k[i] = (sd * ddd - dd * sdd) / std::pow(base, exponent);
  }
  k[0] = k[1];
  k[n - 1] = k[n - 2];
  return k;
}

// Trajectory cost (Eq. 1 shape): deviation, smoothness of d over s, and the
// initial lateral jump. Deviation uses |d| unless signed mode is on; the
// first two sums scale with the grid step so the weights keep meaning
// across grid resolutions.
inline double evasion_cost(const std::vector<double>& d, double ds,
                           const PlannerWeights& w) {
  if (d.size() < 3) return 0.0;
  double dev = 0.0;
  for (double v : d) dev += w.signed_deviation ? v : std::abs(v);
  double smooth = 0.0;
  for (size_t i = 1; i + 1 < d.size(); ++i) {
    double sec = (d[i + 1] - 2.0 * d[i] + d[i - 1]) / (ds * ds);
    smooth += sec * sec;
  }
  double jump = d[1] - d[0];
  return w.q_d * dev * ds + w.q_ds * smooth * ds + w.q_d_delta * jump * jump;
}

struct SplinerParams {
  double l_pre = 2.0;       // m before the opponent at low speed
  double l_post = 3.0;      // m after the opponent at low speed
  double speed_scale = 0.6; // extra meters per m/s of ego speed
  double activation = 8.0;  // m, forward gap that arms the planner
};

// Violation report for Eqs. 2-5 against a trajectory.
struct ViolationReport {
  double clearance = 0.0;
  double curvature = 0.0;
  double boundary = 0.0;
  double terminal = 0.0;
  double max_violation() const {
    return std::max({clearance, curvature, boundary, terminal});
  }
};

template <class OppModel>
ViolationReport validate(const EvasionTrajectory& traj, const OppModel& gp,
                         const RacingLine& line, const PlannerWeights& w) {
  ViolationReport rep;
  const size_t n = traj.d.size();
  if (n < 3) return rep;
  const double lap = line.lap_length;

  rep.terminal = std::max(std::abs(traj.d[n - 1]), std::abs(traj.d[n - 2]));

  for (size_t i = 0; i < n; ++i) {
    double sw = std::fmod(traj.s[i], lap);
    if (sw < 0.0) sw += lap;
    double hi = line.d_left_at(sw) - w.boundary_margin;
    double lo = -(line.d_right_at(sw) - w.boundary_margin);
    rep.boundary = std::max({rep.boundary, traj.d[i] - hi, lo - traj.d[i]});
  }
  rep.boundary = std::max(rep.boundary, 0.0);

  std::vector<double> kf = frenet_curvature(traj.d, traj.s, w.curvature_exponent);
  for (size_t i = 1; i + 1 < n; ++i) {
    double sw = std::fmod(traj.s[i], lap);
    if (sw < 0.0) sw += lap;
    double tot = std::abs(kf[i] + line.kappa_at(sw)) - w.kappa_max;
    rep.curvature = std::max(rep.curvature, tot);
  }
  rep.curvature = std::max(rep.curvature, 0.0);

  // Clearance over the attached RoC window, or the whole span without one.
  auto in_window = [&](double sw) {
    if (!traj.has_window) return true;
    double span = std::fmod(traj.window_hi - traj.window_lo, lap);
    if (span < 0.0) span += lap;
    double rel = std::fmod(sw - traj.window_lo, lap);
    if (rel < 0.0) rel += lap;
    return rel <= span;
  };
  for (size_t i = 0; i < n; ++i) {
    double sw = std::fmod(traj.s[i], lap);
    if (sw < 0.0) sw += lap;
    if (!in_window(sw)) continue;
    double d_opp = gp.predict_d(sw).first;
    double gap = std::abs(traj.d[i] - d_opp);
    rep.clearance = std::max(rep.clearance, w.delta_min - gap);
  }
  rep.clearance = std::max(rep.clearance, 0.0);
  return rep;
}

// Baseline Spliner: a single lateral-shift spline around the opponent's
// current position. Zero-slope cubic blend through (s_opp - L_pre, d_now),
// (s_opp, d_apex), (s_opp + L_post, 0), sampled every 0.1 m and clamped to
// the corridor. Also used as the SQP warm start.
inline EvasionTrajectory baseline_spliner(const FrenetState& ego,
                                          const FrenetState& opp,
                                          const RacingLine& line,
                                          const PlannerWeights& w,
                                          const SplinerParams& sp = {},
                                          int forced_side = 0) {
  const double lap = line.lap_length;
  const double ds = 0.1;
  auto wrap = [&](double s) {
    double r = std::fmod(s, lap);
    return r < 0.0 ? r + lap : r;
  };
  double gap = wrap(opp.s - ego.s);

  EvasionTrajectory traj;
  traj.feasible = false;
  if (gap > sp.activation) return traj;

  double scale = 1.0 + sp.speed_scale * std::max(0.0, ego.v_s - 3.0) / 3.0;
  double l_pre = sp.l_pre * scale;
  double l_post = sp.l_post * scale;

  double s_opp_u = ego.s + gap;  // unwrapped, ahead of ego
  double hi = line.d_left_at(wrap(s_opp_u)) - w.boundary_margin;
  double lo = -(line.d_right_at(wrap(s_opp_u)) - w.boundary_margin);
  double free_left = hi - opp.d;
  double free_right = opp.d - lo;

  int side;
  if (forced_side != 0)
    side = forced_side;
  else
    side = (free_left >= free_right) ? +1 : -1;
  double apex = opp.d + side * w.delta_min;
  bool ok = apex >= lo && apex <= hi;
  if (!ok && forced_side == 0) {
    side = -side;  // free-width side blocked; try the other one
    apex = opp.d + side * w.delta_min;
    ok = apex >= lo && apex <= hi;
  }

  double s0 = std::max(ego.s, s_opp_u - l_pre);
  double s1 = s_opp_u + l_post;
  size_t n = static_cast<size_t>(std::ceil((s1 - ego.s) / ds)) + 2;
  n = std::max<size_t>(n, 5);
  traj.s.resize(n);
  traj.d.resize(n);
  traj.side = side;

  auto blend = [](double t) { return t * t * (3.0 - 2.0 * t); };
  for (size_t i = 0; i < n; ++i) {
    double s = ego.s + ds * static_cast<double>(i);
    traj.s[i] = s;
    double d;
    if (s <= s0)
      d = ego.d;
    else if (s <= s_opp_u)
      d = ego.d + (apex - ego.d) * blend((s - s0) / (s_opp_u - s0));
    else if (s <= s1)
      d = apex * (1.0 - blend((s - s_opp_u) / (s1 - s_opp_u)));
    else
      d = 0.0;
    double bhi = line.d_left_at(wrap(s)) - w.boundary_margin;
    double blo = -(line.d_right_at(wrap(s)) - w.boundary_margin);
    traj.d[i] = std::clamp(d, blo, bhi);
  }
  traj.d[n - 1] = 0.0;
  traj.d[n - 2] = 0.0;
  traj.cost = evasion_cost(traj.d, ds, w);
  traj.feasible = ok;
  return traj;
}

namespace detail {

// Gradient and banded Hessian of the evasion cost. |d| is smoothed as
// sqrt(d^2 + eps^2) - eps for the optimizer only.
inline void cost_derivatives(const std::vector<double>& x, double ds,
                             const PlannerWeights& w, double eps,
                             Eigen::VectorXd& g, BandedSpd& H) {
  const int n = static_cast<int>(x.size());
  g.setZero();
  H.set_zero();
  for (int i = 0; i < n; ++i) {
    if (w.signed_deviation) {
      g[i] += w.q_d * ds;
    } else {
      double r = std::sqrt(x[static_cast<size_t>(i)] * x[static_cast<size_t>(i)] + eps * eps);
      g[i] += w.q_d * ds * x[static_cast<size_t>(i)] / r;
      H.add(i, i, w.q_d * ds * eps * eps / (r * r * r));
    }
  }
  double c = w.q_ds * ds / (ds * ds * ds * ds);
  for (int i = 1; i + 1 < n; ++i) {
    double sec = x[static_cast<size_t>(i + 1)] - 2.0 * x[static_cast<size_t>(i)] +
                 x[static_cast<size_t>(i - 1)];
    g[i - 1] += 2.0 * c * sec;
    g[i] += -4.0 * c * sec;
    g[i + 1] += 2.0 * c * sec;
    H.add(i - 1, i - 1, 2.0 * c);
    H.add(i, i, 8.0 * c);
    H.add(i + 1, i + 1, 2.0 * c);
    H.add(i, i - 1, -4.0 * c);
    H.add(i + 1, i, -4.0 * c);
    H.add(i + 1, i - 1, 2.0 * c);
  }
  double jump = x[1] - x[0];
  g[0] += -2.0 * w.q_d_delta * jump;
  g[1] += 2.0 * w.q_d_delta * jump;
  H.add(0, 0, 2.0 * w.q_d_delta);
  H.add(1, 1, 2.0 * w.q_d_delta);
  H.add(1, 0, -2.0 * w.q_d_delta);
}

inline double smoothed_cost(const std::vector<double>& x, double ds,
                            const PlannerWeights& w, double eps) {
  double dev = 0.0;
  for (double v : x)
    dev += w.signed_deviation
               ? v
               : std::sqrt(v * v + eps * eps) - eps;
  double smooth = 0.0;
  for (size_t i = 1; i + 1 < x.size(); ++i) {
    double sec = (x[i + 1] - 2.0 * x[i] + x[i - 1]) / (ds * ds);
    smooth += sec * sec;
  }
  double jump = x[1] - x[0];
  return w.q_d * dev * ds + w.q_ds * smooth * ds + w.q_d_delta * jump * jump;
}

}  // namespace detail

// Discretized instance the SQP solves: a uniform s grid from the ego with
// box bounds per point. The opponent clearance band (one side, by the warm
// start's choice) and the corridor margins are already folded into lb/ub,
// slightly tightened so the solution validates at the true bounds. Fixed
// points (head, two tail zeros) appear as lb == ub.
struct SqpProblem {
  std::vector<double> s;          // unwrapped grid, starts at ego.s
  std::vector<double> lb, ub;
  std::vector<double> kappa_ref;  // reference-line curvature along the grid
  double ds = 0.1;
  int side = 0;
  double window_lo = 0.0, window_hi = 0.0;  // wrapped RoC bounds
  bool ok = false;  // false: empty corridor, nothing to solve
};

template <class OppModel>
SqpProblem build_sqp_problem(const FrenetState& ego,
                             const RegionOfCollision& roc, const OppModel& gp,
                             const RacingLine& line, const PlannerWeights& w,
                             int side) {
  if (!roc.valid)
    throw std::invalid_argument("sqp problem: invalid region of collision");
  if (side == 0)
    throw std::invalid_argument("sqp problem: no overtaking side chosen");

  const double lap = line.lap_length;
  const double ds = 0.1;
  const double teps = 1e-5;
  auto wrap = [&](double s) {
    double r = std::fmod(s, lap);
    return r < 0.0 ? r + lap : r;
  };

  double to_c_start = wrap(roc.c_start - ego.s);
  double to_c_end = to_c_start + wrap(roc.c_end - roc.c_start);
  // long enough past the extended band that a smooth return to the line fits
  double tail = w.band_post + std::max(4.0, 0.5 * ego.v_s);
  double span = std::min(to_c_end + tail, 0.8 * lap);
  int n = static_cast<int>(std::ceil(span / ds)) + 1;
  n = std::max(n, 8);

  SqpProblem pb;
  pb.ds = ds;
  pb.side = side;
  pb.window_lo = wrap(roc.c_start);
  pb.window_hi = wrap(roc.c_end);
  pb.s.resize(static_cast<size_t>(n));
  pb.lb.resize(static_cast<size_t>(n));
  pb.ub.resize(static_cast<size_t>(n));
  pb.kappa_ref.resize(static_cast<size_t>(n));

  for (int i = 0; i < n; ++i) {
    double s = ego.s + ds * i;
    double sw = wrap(s);
    pb.s[static_cast<size_t>(i)] = s;
    pb.kappa_ref[static_cast<size_t>(i)] = line.kappa_at(sw);
    pb.lb[static_cast<size_t>(i)] =
        -(line.d_right_at(sw) - w.boundary_margin) + teps;
    pb.ub[static_cast<size_t>(i)] =
        line.d_left_at(sw) - w.boundary_margin - teps;
    double off = ds * i;
    if (off >= to_c_start - w.band_pre && off <= to_c_end + w.band_post) {
      double d_opp = gp.predict_d(sw).first;
      if (side > 0)
        pb.lb[static_cast<size_t>(i)] = std::max(
            pb.lb[static_cast<size_t>(i)], d_opp + w.delta_min + teps);
      else
        pb.ub[static_cast<size_t>(i)] = std::min(
            pb.ub[static_cast<size_t>(i)], d_opp - w.delta_min - teps);
    }
  }

  pb.lb[0] = pb.ub[0] = ego.d;
  pb.lb[static_cast<size_t>(n - 2)] = pb.ub[static_cast<size_t>(n - 2)] = 0.0;
  pb.lb[static_cast<size_t>(n - 1)] = pb.ub[static_cast<size_t>(n - 1)] = 0.0;
  pb.ok = true;
  for (int i = 1; i < n - 2; ++i)
    if (pb.lb[static_cast<size_t>(i)] > pb.ub[static_cast<size_t>(i)])
      pb.ok = false;
  return pb;
}

namespace detail {

// Raises (or lowers, for right-hand passes) the warm start into the blocked
// corridor with smoothstep shoulders sized by the curvature budget. Clamping
// a flat profile into the corridor bounds would leave step discontinuities
// whose linearized curvature rows no trust region can satisfy; lifting first
// hands the SQP a smooth, bound-feasible starting point.
inline void lift_into_corridor(const SqpProblem& pb, const PlannerWeights& w,
                               std::vector<double>& x) {
  const size_t n = pb.s.size();
  if (n < 5) return;
  // cells where the bound demands real displacement off the line; the
  // corridor edge can graze zero where the line touches its own margin,
  // so a millimeter threshold separates blockage from coincidence
  size_t j0 = n, j1 = 0;
  double level = 0.0;
  for (size_t j = 1; j + 2 < n; ++j) {
    bool blocked = pb.side > 0 ? pb.lb[j] > 1e-3 : pb.ub[j] < -1e-3;
    if (!blocked) continue;
    j0 = std::min(j0, j);
    j1 = std::max(j1, j);
    level = pb.side > 0 ? std::max(level, pb.lb[j])
                        : std::min(level, pb.ub[j]);
  }
  if (j0 > j1 || level == 0.0) return;
  // smoothstep over length L peaks at |d''| = 6 h / L^2; half budget
  double room = std::max(0.5 * w.kappa_max, 1e-3);
  double len = std::sqrt(6.0 * std::abs(level) / room);
  size_t ramp = static_cast<size_t>(std::max(3.0, std::ceil(len / pb.ds)));
  // ramps must land before the pinned head and tail; steeper shoulders are
  // acceptable, the soft curvature rows absorb what the budget cannot
  size_t ramp_in = std::min(ramp, j0 > 1 ? j0 - 1 : size_t{0});
  size_t ramp_out = std::min(ramp, n - 3 > j1 ? n - 3 - j1 : size_t{0});
  auto smooth = [](double t) { return t * t * (3.0 - 2.0 * t); };
  for (size_t j = 1; j + 2 < n; ++j) {
    double f = 0.0;
    if (j >= j0 && j <= j1)
      f = 1.0;
    else if (j < j0 && ramp_in > 0 && j0 - j <= ramp_in)
      f = smooth(1.0 - static_cast<double>(j0 - j) / ramp_in);
    else if (j > j1 && ramp_out > 0 && j - j1 <= ramp_out)
      f = smooth(1.0 - static_cast<double>(j - j1) / ramp_out);
    if (f <= 0.0) continue;
    double target = level * f;
    if (pb.side > 0)
      x[j] = std::max(x[j], target);
    else
      x[j] = std::min(x[j], target);
    x[j] = std::clamp(x[j], pb.lb[j], pb.ub[j]);
  }
}

}  // namespace detail

// Trust-region SQP with an l1 merit over the instance. Returns the offsets
// and whether the iteration converged to a feasible point.
inline bool solve_sqp(const SqpProblem& pb, std::vector<double>& x,
                      const PlannerWeights& w) {
  const int n = static_cast<int>(pb.s.size());
  const double ds = pb.ds;
  const std::vector<double>& lb = pb.lb;
  const std::vector<double>& ub = pb.ub;
  const std::vector<double>& kap_g = pb.kappa_ref;
  const std::vector<double>& sgrid = pb.s;
  const double teps = 1e-5;

  for (int i = 0; i < n; ++i)
    x[static_cast<size_t>(i)] = std::clamp(x[static_cast<size_t>(i)],
                                           lb[static_cast<size_t>(i)],
                                           ub[static_cast<size_t>(i)]);

  const double eps_abs = 1e-4;
  const double kmax_t = w.kappa_max - teps;
  Eigen::VectorXd g(n);
  BandedSpd H(n, 2);
  std::vector<double> kf;

  auto viol = [&](const std::vector<double>& v) {
    std::vector<double> k = frenet_curvature(v, sgrid, w.curvature_exponent);
    double acc = 0.0;
    for (int i = 1; i + 1 < n; ++i)
      acc += std::max(0.0, std::abs(k[static_cast<size_t>(i)] +
                                    kap_g[static_cast<size_t>(i)]) -
                               kmax_t);
    return acc;
  };

  double trust = 0.4;
  double mu = 1e3;
  bool converged = false;
  std::vector<double> xtrial(static_cast<size_t>(n));
  QpResult qp_warm;  // multipliers carry over between the inner QPs

  for (int iter = 0; iter < 50; ++iter) {
    detail::cost_derivatives(x, ds, w, eps_abs, g, H);
    kf = frenet_curvature(x, sgrid, w.curvature_exponent);

    BandedQp qp(n, 2);
    qp.P = H;
    // keep the quadratic model positive definite
    for (int i = 0; i < n; ++i) qp.P.add(i, i, 1e-9);
    qp.q = g;
    for (int i = 0; i < n; ++i) {
      // directional: a bound further than the trust radius still pulls the
      // step as far as the radius allows instead of freezing the variable
      qp.lb[i] = std::clamp(lb[static_cast<size_t>(i)] - x[static_cast<size_t>(i)], -trust, trust);
      qp.ub[i] = std::clamp(ub[static_cast<size_t>(i)] - x[static_cast<size_t>(i)], -trust, trust);
    }
    for (int i = 1; i + 1 < n; ++i) {
      double sd = ds;
      double dd = 0.5 * (x[static_cast<size_t>(i + 1)] - x[static_cast<size_t>(i - 1)]);
      double ddd = x[static_cast<size_t>(i + 1)] - 2.0 * x[static_cast<size_t>(i)] +
                   x[static_cast<size_t>(i - 1)];
      double base = sd * sd + dd * dd;
      double p = w.curvature_exponent;
      double bp = std::pow(base, p);
      double dkc = -2.0 * sd / bp;
      double common = p * sd * ddd * dd / (bp * base);
      double dkp = sd / bp - common;
      double dkm = sd / bp + common;
      TriRow row;
      row.i0 = i - 1;
      row.c[0] = dkm;
      row.c[1] = dkc;
      row.c[2] = dkp;
      double kt = kf[static_cast<size_t>(i)] + kap_g[static_cast<size_t>(i)];
      row.lo = -kmax_t - kt;
      row.hi = kmax_t - kt;
      // l1-soft at the merit weight: the subproblem stays feasible even
      // when the trust region cannot absorb the current violation, and its
      // step is exactly the step the merit function wants
      row.soft = mu;
      qp.rows.push_back(row);
    }

    QpSettings qs;
    qs.eps = 1e-8;
    qs.max_iters = 1500;
    QpResult qr = solve_banded_qp(qp, qs, &qp_warm);
#ifdef RACEKIT_SQP_TRACE
    std::fprintf(stderr, "sqp it=%d qp_conv=%d qp_it=%d trust=%.3g\n", iter,
                 (int)qr.converged, qr.iters, trust);
#endif
    if (!qr.converged) {
      trust *= 0.5;
      if (trust < 1e-9) return false;
      continue;
    }
    qp_warm = qr;

    // penalty weight keeps pace with the multipliers; a multiplier pinned
    // at the cap doubles it so feasibility eventually dominates
    double ymax = 0.0;
    for (int k = 0; k < qr.y_row.size(); ++k)
      ymax = std::max(ymax, std::abs(qr.y_row[k]));
    mu = std::min(std::max({mu, 2.0 * ymax, 1e3}), 1e8);

    double step_norm = qr.x.lpNorm<Eigen::Infinity>();
    double v0 = viol(x);
    double f0 = detail::smoothed_cost(x, ds, w, eps_abs);

    if (step_norm < 1e-9) {
      if (v0 < 1e-7) converged = true;
      break;
    }

    // linearized violation left at the step (soft rows may keep some)
    double vlin = 0.0;
    for (const TriRow& r : qp.rows) {
      double cd = 0.0;
      for (int j = 0; j < 3; ++j)
        if (r.i0 + j < n) cd += r.c[j] * qr.x[r.i0 + j];
      vlin += std::max({0.0, r.lo - cd, cd - r.hi});
    }
    double pred = -(g.dot(qr.x) + 0.5 * qr.x.dot([&] {
                      Eigen::VectorXd hv(n);
                      detail::qp_mat_vec_p(H, qr.x, hv);
                      return hv;
                    }())) +
                  mu * (v0 - vlin);
    for (int i = 0; i < n; ++i)
      xtrial[static_cast<size_t>(i)] = x[static_cast<size_t>(i)] + qr.x[i];
    double f1 = detail::smoothed_cost(xtrial, ds, w, eps_abs);
    double v1 = viol(xtrial);
    double actual = (f0 + mu * v0) - (f1 + mu * v1);

    if (pred <= 1e-14) {
      if (v0 < 1e-7) {
        converged = true;
        break;
      }
      trust *= 0.5;
      if (trust < 1e-9) return false;
      continue;
    }
    double ratio = actual / pred;
#ifdef RACEKIT_SQP_TRACE
    std::fprintf(stderr,
                 "   step=%.3g v0=%.3g v1=%.3g f0=%.6g f1=%.6g pred=%.3g "
                 "act=%.3g ratio=%.3g mu=%.3g\n",
                 step_norm, v0, v1, f0, f1, pred, actual, ratio, mu);
#endif
    if (ratio > 0.1) {
      x = xtrial;
      if (ratio > 0.7 && step_norm > 0.8 * trust)
        trust = std::min(trust * 1.8, 1.0);
    } else {
      trust *= 0.4;
      if (trust < 1e-9) return false;
    }
    if (step_norm < 1e-7 && viol(x) < 1e-7) {
      converged = true;
      break;
    }
  }

  return converged;
}

// Full planning step: build the instance from the region of collision,
// resample the warm start onto its grid, run the SQP. Failure to converge
// (or an empty corridor) returns the warm start flagged infeasible; a
// feasible warm start that is cheaper than the solution wins outright.
template <class OppModel>
EvasionTrajectory plan_sqp(const FrenetState& ego,
                           const RegionOfCollision& roc, const OppModel& gp,
                           const RacingLine& line, const PlannerWeights& w,
                           const EvasionTrajectory& warm_start) {
  if (!roc.valid)
    throw std::invalid_argument("plan_sqp: invalid region of collision");
  if (warm_start.side == 0)
    throw std::invalid_argument("plan_sqp: warm start has no side");

  const double lap = line.lap_length;
  SqpProblem pb = build_sqp_problem(ego, roc, gp, line, w, warm_start.side);

  EvasionTrajectory fail = warm_start;
  fail.feasible = false;
  if (!pb.ok) return fail;

  const size_t n = pb.s.size();
  std::vector<double> x(n);
  x[0] = ego.d;
  for (size_t i = 1; i < n; ++i)
    x[i] = warm_start.d_at(line.wrap(pb.s[i]), lap);
  detail::lift_into_corridor(pb, w, x);

  if (!solve_sqp(pb, x, w)) return fail;

  EvasionTrajectory out;
  out.s = pb.s;
  out.d = std::move(x);
  out.side = pb.side;
  out.has_window = true;
  out.window_lo = pb.window_lo;
  out.window_hi = pb.window_hi;
  out.cost = evasion_cost(out.d, pb.ds, w);
  out.feasible = true;

  // guard: never return something worse than a feasible warm start
  if (warm_start.feasible && warm_start.cost < out.cost) {
    ViolationReport warm_rep = validate(warm_start, gp, line, w);
    if (warm_rep.max_violation() <= 1e-6) return warm_start;
  }
  return out;
}

// Stateful wrapper: keeps the previous solution as the next warm start
// while a maneuver is active, per-maneuver side lock.
class SqpPlanner {
 public:
  SqpPlanner(PlannerWeights w, SplinerParams sp = {})
      : weights_(w), spliner_(sp) {}

  const PlannerWeights& weights() const { return weights_; }

  template <class OppModel>
  EvasionTrajectory plan(const FrenetState& ego, const FrenetState& opp,
                         const RegionOfCollision& roc, const OppModel& gp,
                         const RacingLine& line) {
    EvasionTrajectory warm;
    if (active_ && prev_.feasible) {
      warm = prev_;
      // refresh the anchor so d_at resamples correctly
    } else {
      SplinerParams sp = spliner_;
      sp.activation = std::max(sp.activation, 1e9);  // RoC already gates
      warm = baseline_spliner(ego, opp, line, weights_, sp, locked_side_);
      if (!warm.feasible) {
        active_ = false;
        return warm;
      }
    }
    EvasionTrajectory out = plan_sqp(ego, roc, gp, line, weights_, warm);
    if (out.feasible) {
      prev_ = out;
      locked_side_ = out.side;
      active_ = true;
    } else {
      active_ = false;
      locked_side_ = 0;
    }
    return out;
  }

  void reset() {
    active_ = false;
    locked_side_ = 0;
    prev_ = EvasionTrajectory{};
  }

  bool active() const { return active_; }

 private:
  PlannerWeights weights_;
  SplinerParams spliner_;
  EvasionTrajectory prev_;
  bool active_ = false;
  int locked_side_ = 0;
};

// Trajectory export: `s,d,x,y` with Cartesian positions on the given line.
inline void save_trajectory(const std::string& path,
                            const EvasionTrajectory& traj,
                            const TrackModel& line_ref) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write trajectory: " + path);
  out << "s,d,x,y\n";
  char buf[200];
  for (size_t i = 0; i < traj.s.size(); ++i) {
    Vec2 p = line_ref.position_at(line_ref.wrap_s(traj.s[i]), traj.d[i]);
    std::snprintf(buf, sizeof(buf), "%.9g,%.9g,%.9g,%.9g\n", traj.s[i],
                  traj.d[i], p.x, p.y);
    out << buf;
  }
}

}  // namespace racekit
