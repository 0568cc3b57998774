#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "racekit/race.hpp"

namespace racekit {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline uint64_t fnv1a64(const std::string& data) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hash_hex(uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline BehaviorKind parse_behavior(const std::string& name) {
  if (name == "min_curvature") return BehaviorKind::MinCurvatureLine;
  if (name == "shortest_path") return BehaviorKind::ShortestPathLine;
  if (name == "centerline") return BehaviorKind::Centerline;
  if (name == "reactive") return BehaviorKind::Reactive;
  throw ConfigError("unknown behavior: " + name +
                    " (expected min_curvature, shortest_path, centerline, "
                    "or reactive)");
}

inline PlannerKind parse_planner(const std::string& name) {
  if (name == "disabled") return PlannerKind::Disabled;
  if (name == "spliner") return PlannerKind::Spliner;
  if (name == "predictive") return PlannerKind::Predictive;
  throw ConfigError("unknown planner: " + name +
                    " (expected disabled, spliner, or predictive)");
}

// One experiment description. `planners`/`behaviors` drive the benchmark
// matrix; the scalar fields drive single races.
struct ExperimentConfig {
  std::string track_path;
  BehaviorKind behavior = BehaviorKind::Centerline;
  PlannerKind planner = PlannerKind::Predictive;
  double s = 0.5;
  uint64_t seed = 1;
  double margin = 0.1;
  VehicleLimits limits;
  RaceParams params;
  std::vector<PlannerKind> planners;    // benchmark rows
  std::vector<BehaviorKind> behaviors;  // benchmark columns
  std::string canonical;                // sorted-key dump used for hashing
  std::string hash;                     // fnv-1a of `canonical`
};

namespace detail {

template <typename T>
inline T take(const nlohmann::json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad value for `") + key + "`: " + e.what());
  }
}

}  // namespace detail

inline ExperimentConfig parse_config(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config root must be a JSON object");
  ExperimentConfig c;
  if (!j.contains("track") || !j.at("track").is_string())
    throw ConfigError("config needs a `track` path string");
  c.track_path = j.at("track").get<std::string>();

  c.behavior = parse_behavior(detail::take<std::string>(j, "behavior", "centerline"));
  c.planner = parse_planner(detail::take<std::string>(j, "planner", "predictive"));
  c.s = detail::take<double>(j, "s", 0.5);
  if (!(c.s > 0.0 && c.s <= 1.0))
    throw ConfigError("`s` must lie in (0, 1]");
  c.seed = detail::take<uint64_t>(j, "seed", 1);
  c.margin = detail::take<double>(j, "margin", 0.1);
  if (!(c.margin >= 0.0 && c.margin < 1.0))
    throw ConfigError("`margin` must lie in [0, 1)");

  if (j.contains("limits")) {
    const auto& l = j.at("limits");
    c.limits.v_max = detail::take<double>(l, "v_max", c.limits.v_max);
    c.limits.a_lat_max = detail::take<double>(l, "a_lat_max", c.limits.a_lat_max);
    c.limits.a_lon_max = detail::take<double>(l, "a_lon_max", c.limits.a_lon_max);
    c.limits.length = detail::take<double>(l, "length", c.limits.length);
    c.limits.width = detail::take<double>(l, "width", c.limits.width);
    c.limits.wheelbase = detail::take<double>(l, "wheelbase", c.limits.wheelbase);
    if (!(c.limits.v_max > 0.0 && c.limits.a_lat_max > 0.0 &&
          c.limits.a_lon_max > 0.0 && c.limits.length > 0.0 &&
          c.limits.width > 0.0 && c.limits.wheelbase > 0.0))
      throw ConfigError("`limits` entries must be positive");
  }

  RaceParams& p = c.params;
  p.timeout = detail::take<double>(j, "timeout", p.timeout);
  if (!(p.timeout > 0.0)) throw ConfigError("`timeout` must be positive");
  p.respawn_gap = detail::take<double>(j, "respawn_gap", p.respawn_gap);
  p.activation = detail::take<double>(j, "activation", p.activation);
  p.k_sigma = detail::take<double>(j, "k_sigma", p.k_sigma);

  if (j.contains("noise")) {
    const auto& nj = j.at("noise");
    p.obs_model.sigma_d = detail::take<double>(nj, "sigma_d", p.obs_model.sigma_d);
    p.obs_model.sigma_vs = detail::take<double>(nj, "sigma_vs", p.obs_model.sigma_vs);
    p.obs_model.dropout = detail::take<double>(nj, "dropout", p.obs_model.dropout);
    p.obs_model.range = detail::take<double>(nj, "range", p.obs_model.range);
    if (p.obs_model.sigma_d < 0.0 || p.obs_model.sigma_vs < 0.0 ||
        p.obs_model.dropout < 0.0 || p.obs_model.dropout >= 1.0)
      throw ConfigError("`noise` values out of range");
  }

  if (j.contains("weights")) {
    const auto& wj = j.at("weights");
    PlannerWeights w = default_weights(c.limits, c.margin);
    w.q_d = detail::take<double>(wj, "q_d", w.q_d);
    w.q_ds = detail::take<double>(wj, "q_ds", w.q_ds);
    w.q_d_delta = detail::take<double>(wj, "q_d_delta", w.q_d_delta);
    w.delta_min = detail::take<double>(wj, "delta_min", w.delta_min);
    w.kappa_max = detail::take<double>(wj, "kappa_max", w.kappa_max);
    w.curvature_exponent =
        detail::take<double>(wj, "curvature_exponent", w.curvature_exponent);
    w.signed_deviation =
        detail::take<bool>(wj, "signed_deviation", w.signed_deviation);
    if (!(w.q_d >= 0.0 && w.q_ds >= 0.0 && w.q_d_delta >= 0.0 &&
          w.delta_min > 0.0 && w.kappa_max > 0.0))
      throw ConfigError("`weights` values out of range");
    p.weights = w;
    p.weights_set = true;
  }

  for (const std::string& name : detail::take<std::vector<std::string>>(
           j, "planners", {"spliner", "predictive"}))
    c.planners.push_back(parse_planner(name));
  for (const std::string& name : detail::take<std::vector<std::string>>(
           j, "behaviors", {"min_curvature", "shortest_path", "centerline"}))
    c.behaviors.push_back(parse_behavior(name));

  c.canonical = j.dump();  // nlohmann objects serialize with sorted keys
  c.hash = hash_hex(fnv1a64(c.canonical));
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config parse error in " + path + ": " + e.what());
  }
  return parse_config(j);
}

}  // namespace racekit
