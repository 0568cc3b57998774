// racekit command-line front end: single races, S_max searches, planner
// benchmark campaigns, and SVG plots from prior run artifacts.

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "racekit/racekit.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace racekit;

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir = "out";
  std::optional<uint64_t> seed;
  std::optional<std::string> planner;
  std::optional<std::string> behavior;
  std::optional<double> s;
  unsigned workers = 0;
};

void add_common(CLI::App* cmd, CommonArgs& a, bool need_config = true) {
  auto* opt = cmd->add_option("--config", a.config_path, "experiment config JSON");
  if (need_config) opt->required();
  cmd->add_option("--out", a.out_dir, "output directory");
  cmd->add_option("--seed", a.seed, "seed override");
  cmd->add_option("--workers", a.workers, "max concurrent races (bench)");
  cmd->add_option("--planner", a.planner, "planner override");
  cmd->add_option("--behavior", a.behavior, "behavior override");
  cmd->add_option("--s", a.s, "speed-scaler override");
}

ExperimentConfig load_with_overrides(const CommonArgs& a) {
  ExperimentConfig cfg = load_config(a.config_path);
  if (a.seed) cfg.seed = *a.seed;
  if (a.planner) cfg.planner = parse_planner(*a.planner);
  if (a.behavior) cfg.behavior = parse_behavior(*a.behavior);
  if (a.s) {
    if (!(*a.s > 0.0 && *a.s <= 1.0))
      throw ConfigError("--s must lie in (0, 1]");
    cfg.s = *a.s;
  }
  // overrides participate in the hash so artifacts stay traceable
  json j = json::parse(cfg.canonical);
  j["behavior"] = to_string(cfg.behavior);
  j["planner"] = to_string(cfg.planner);
  j["s"] = cfg.s;
  j["seed"] = cfg.seed;
  cfg.canonical = j.dump();
  cfg.hash = hash_hex(fnv1a64(cfg.canonical));
  return cfg;
}

TrackModel load_track_checked(const ExperimentConfig& cfg) {
  if (!fs::exists(cfg.track_path))
    throw ConfigError("track file not found: " + cfg.track_path);
  try {
    return load_track(cfg.track_path);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("track load failed: ") + e.what());
  }
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream f(p);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  return f;
}

json outcome_json(const RaceOutcome& o) {
  json ev = json::array();
  for (const auto& e : o.events)
    ev.push_back({{"t", e.t}, {"kind", e.kind}, {"detail", e.detail}});
  return json{{"n_overtakes", o.n_overtakes},
              {"n_crashes", o.n_crashes},
              {"n_aborts", o.n_aborts},
              {"r_otc", o.r_otc()},
              {"timed_out", o.timed_out},
              {"sim_time", o.sim_time},
              {"ego_lap_times", o.ego_lap_times},
              {"opp_lap_times", o.opp_lap_times},
              {"n_plans", o.n_plans},
              {"plan_time_mean_ms", o.plan_time_mean_ms},
              {"plan_time_std_ms", o.plan_time_std_ms},
              {"events", ev}};
}

void write_pose_csv(const fs::path& p, const std::string& hash,
                    const std::vector<RaceTrace::PoseRow>& rows) {
  auto f = open_out(p);
  f << "# config " << hash << "\n";
  f << "t,x,y,s,d,v\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", r.t,
                  r.x, r.y, r.s, r.d, r.v);
    f << buf;
  }
}

int cmd_race(const CommonArgs& args) {
  ExperimentConfig cfg = load_with_overrides(args);
  TrackModel track = load_track_checked(cfg);
  RaceSetup setup(std::move(track), cfg.behavior, cfg.limits, cfg.margin);
  RaceTrace trace;
  RaceOutcome out =
      run_race(setup, cfg.planner, cfg.s, cfg.seed, cfg.params, &trace);

  fs::create_directories(args.out_dir);
  fs::path dir(args.out_dir);

  {
    json j = outcome_json(out);
    j["config_hash"] = cfg.hash;
    open_out(dir / "events.json") << j.dump(2) << "\n";
  }
  {
    json m{{"config_hash", cfg.hash},
           {"planner", to_string(cfg.planner)},
           {"behavior", to_string(cfg.behavior)},
           {"s", cfg.s},
           {"seed", cfg.seed},
           {"n_overtakes", out.n_overtakes},
           {"n_crashes", out.n_crashes},
           {"n_aborts", out.n_aborts},
           {"r_otc", out.r_otc()},
           {"timed_out", out.timed_out},
           {"sim_time", out.sim_time},
           {"n_plans", out.n_plans},
           {"plan_time_mean_ms", out.plan_time_mean_ms},
           {"plan_time_std_ms", out.plan_time_std_ms}};
    open_out(dir / "metrics.json") << m.dump(2) << "\n";
  }
  {
    auto f = open_out(dir / "obs.csv");
    f << "# config " << cfg.hash << "\n";
    f << "t,s,d,v_s\n";
    char buf[120];
    for (const auto& o : trace.observations) {
      std::snprintf(buf, sizeof(buf), "%.9g,%.9g,%.9g,%.9g\n", o.t, o.s, o.d,
                    o.v_s);
      f << buf;
    }
  }
  write_pose_csv(dir / "ego_path.csv", cfg.hash, trace.ego);
  write_pose_csv(dir / "opp_path.csv", cfg.hash, trace.opp);
  if (!trace.gp_json.empty())
    open_out(dir / "gp_model.json") << trace.gp_json << "\n";
  if (!trace.first_roc.empty()) {
    auto f = open_out(dir / "roc_trace.csv");
    f << "# config " << cfg.hash << "\n";
    f << "t,s_ego,s_opp,gap\n";
    char buf[140];
    for (const auto& r : trace.first_roc) {
      std::snprintf(buf, sizeof(buf), "%.9g,%.9g,%.9g,%.9g\n", r.t, r.s_ego,
                    r.s_opp, r.gap);
      f << buf;
    }
  }
  if (!trace.last_plan.s.empty()) {
    auto f = open_out(dir / "plan.csv");
    f << "# config " << cfg.hash << "\n";
    f << "s,d,x,y\n";
    char buf[160];
    for (size_t i = 0; i < trace.last_plan.s.size(); ++i) {
      double sw = setup.line_ref.wrap_s(trace.last_plan.s[i]);
      Vec2 p = setup.line_ref.position_at(sw, trace.last_plan.d[i]);
      std::snprintf(buf, sizeof(buf), "%.9g,%.9g,%.9g,%.9g\n",
                    trace.last_plan.s[i], trace.last_plan.d[i], p.x, p.y);
      f << buf;
    }
  }

  std::printf("race: overtakes=%d crashes=%d aborts=%d r_otc=%.3f %s\n",
              out.n_overtakes, out.n_crashes, out.n_aborts, out.r_otc(),
              out.timed_out ? "(timeout)" : "");
  return 0;
}

int cmd_smax(const CommonArgs& args) {
  ExperimentConfig cfg = load_with_overrides(args);
  TrackModel track = load_track_checked(cfg);
  RaceSetup setup(std::move(track), cfg.behavior, cfg.limits, cfg.margin);
  SmaxResult r = measure_smax(setup, cfg.planner, cfg.seed, cfg.params);

  fs::create_directories(args.out_dir);
  json tested = json::array();
  for (const auto& [s, ok] : r.tested) tested.push_back({{"s", s}, {"pass", ok}});
  json j{{"config_hash", cfg.hash},
         {"planner", to_string(cfg.planner)},
         {"behavior", to_string(cfg.behavior)},
         {"found", r.found},
         {"s_max", r.found ? r.s_max : 0.0},
         {"probes", r.probes},
         {"tested", tested}};
  open_out(fs::path(args.out_dir) / "smax.json") << j.dump(2) << "\n";

  if (r.found)
    std::printf("smax: %.2f (%d probes)\n", r.s_max, r.probes);
  else
    std::printf("smax: < 0.30 (%d probes)\n", r.probes);
  return 0;
}

struct BenchCell {
  PlannerKind planner;
  BehaviorKind behavior;
  bool found = false;
  double s_max = 0.0;
  double r_otc = 0.0;
  double plan_ms_mean = 0.0;
  double plan_ms_std = 0.0;
  int probes = 0;
};

int cmd_bench(const CommonArgs& args) {
  ExperimentConfig cfg = load_with_overrides(args);
  TrackModel track = load_track_checked(cfg);
  if (cfg.planners.empty() || cfg.behaviors.empty())
    throw ConfigError("bench needs non-empty `planners` and `behaviors`");

  // one immutable setup per behavior, shared by both planners
  std::vector<std::unique_ptr<RaceSetup>> setups;
  for (BehaviorKind b : cfg.behaviors)
    setups.push_back(
        std::make_unique<RaceSetup>(track, b, cfg.limits, cfg.margin));

  std::vector<BenchCell> cells;
  for (PlannerKind p : cfg.planners)
    for (size_t bi = 0; bi < cfg.behaviors.size(); ++bi) {
      BenchCell c;
      c.planner = p;
      c.behavior = cfg.behaviors[bi];
      cells.push_back(c);
    }

  unsigned workers = args.workers > 0
                         ? args.workers
                         : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(cells.size()));

  std::atomic<size_t> next{0};
  std::mutex err_mu;
  std::string first_error;
  auto worker = [&]() {
    while (true) {
      size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      BenchCell& c = cells[i];
      try {
        size_t bi = 0;
        for (; bi < cfg.behaviors.size(); ++bi)
          if (cfg.behaviors[bi] == c.behavior) break;
        const RaceSetup& setup = *setups[bi];
        SmaxResult r = measure_smax(setup, c.planner, cfg.seed, cfg.params);
        c.found = r.found;
        c.s_max = r.found ? r.s_max : 0.0;
        c.probes = r.probes;
        // R_ot/c and timing from a full (no early exit) run at the cell's S
        double s_run = r.found ? r.s_max : 0.30;
        RaceOutcome o = run_race(setup, c.planner, s_run, cfg.seed, cfg.params);
        c.r_otc = o.r_otc();
        c.plan_ms_mean = o.plan_time_mean_ms;
        c.plan_ms_std = o.plan_time_std_ms;
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lk(err_mu);
        if (first_error.empty())
          first_error = std::string("cell ") + to_string(c.planner) + "/" +
                        to_string(c.behavior) + ": " + e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned i = 0; i < workers; ++i) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (!first_error.empty())
    throw std::runtime_error("bench aborted: " + first_error);

  fs::create_directories(args.out_dir);
  fs::path dir(args.out_dir);
  {
    auto f = open_out(dir / "bench.csv");
    f << "# config " << cfg.hash << "\n";
    f << "planner,behavior,found,s_max,r_otc,plan_ms_mean,plan_ms_std,probes\n";
    char buf[240];
    for (const auto& c : cells) {
      std::snprintf(buf, sizeof(buf), "%s,%s,%d,%.17g,%.17g,%.17g,%.17g,%d\n",
                    to_string(c.planner), to_string(c.behavior),
                    c.found ? 1 : 0, c.s_max, c.r_otc, c.plan_ms_mean,
                    c.plan_ms_std, c.probes);
      f << buf;
    }
  }
  {
    auto f = open_out(dir / "bench.txt");
    f << "# config " << cfg.hash << "\n";
    char buf[240];
    std::snprintf(buf, sizeof(buf), "%-12s %-14s %7s %8s %18s\n", "planner",
                  "behavior", "S_max", "R_ot/c", "plan ms (mean+-sd)");
    f << buf;
    for (const auto& c : cells) {
      char smax_txt[16];
      if (c.found)
        std::snprintf(smax_txt, sizeof(smax_txt), "%.2f", c.s_max);
      else
        std::snprintf(smax_txt, sizeof(smax_txt), "<0.30");
      char timing[40];
      std::snprintf(timing, sizeof(timing), "%.2f ± %.2f", c.plan_ms_mean,
                    c.plan_ms_std);
      std::snprintf(buf, sizeof(buf), "%-12s %-14s %7s %8.3f %18s\n",
                    to_string(c.planner), to_string(c.behavior), smax_txt,
                    c.r_otc, timing);
      f << buf;
    }
  }

  std::ifstream echo(dir / "bench.txt");
  std::cout << echo.rdbuf();
  return 0;
}

std::vector<RaceTrace::PoseRow> read_pose_csv(const fs::path& p) {
  std::ifstream f(p);
  if (!f) throw std::runtime_error("missing artifact: " + p.string());
  std::vector<RaceTrace::PoseRow> rows;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#' || line[0] == 't') continue;
    RaceTrace::PoseRow r{};
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf,%lf,%lf", &r.t, &r.x, &r.y,
                    &r.s, &r.d, &r.v) == 6)
      rows.push_back(r);
  }
  return rows;
}

int cmd_plot(const CommonArgs& args) {
  ExperimentConfig cfg = load_with_overrides(args);
  fs::path dir(args.out_dir);

  // GP figure from the saved model and observation log
  fs::path gp_path = dir / "gp_model.json";
  fs::path obs_path = dir / "obs.csv";
  fs::path ev_path = dir / "events.json";
  for (const fs::path& p : {gp_path, obs_path, ev_path})
    if (!fs::exists(p))
      throw std::runtime_error("missing artifact: " + p.string());

  std::ifstream gf(gp_path);
  json gj;
  gf >> gj;
  OpponentTrajectoryGP gp = OpponentTrajectoryGP::from_json(gj);

  std::vector<OpponentObservation> obs;
  {
    std::ifstream f(obs_path);
    std::string line;
    while (std::getline(f, line)) {
      if (line.empty() || line[0] == '#' || line[0] == 't') continue;
      OpponentObservation o{};
      if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf", &o.t, &o.s, &o.d,
                      &o.v_s) == 4)
        obs.push_back(o);
    }
  }

  std::string header = "config " + cfg.hash;
  open_out(dir / "gp.svg") << gp_plot_svg(gp, obs, header);

  // track map from the config's track plus the path artifacts
  TrackModel track = load_track_checked(cfg);
  std::vector<MapPath> paths;
  MapPath ego{{}, "#2c4f9e", 1.8};
  for (const auto& r : read_pose_csv(dir / "ego_path.csv"))
    ego.pts.push_back({r.x, r.y});
  MapPath opp{{}, "#9e442c", 1.8};
  for (const auto& r : read_pose_csv(dir / "opp_path.csv"))
    opp.pts.push_back({r.x, r.y});
  paths.push_back(ego);
  paths.push_back(opp);

  bool have_roc = false;
  double c_start = 0.0, c_end = 0.0;
  {
    std::ifstream f(ev_path);
    json ej;
    f >> ej;
    for (const auto& e : ej.at("events")) {
      if (e.at("kind").get<std::string>() == "roc") {
        std::sscanf(e.at("detail").get<std::string>().c_str(), "%lf %lf",
                    &c_start, &c_end);
        have_roc = true;
        break;
      }
    }
  }

  open_out(dir / "track_map.svg")
      << track_map_svg(track, paths, have_roc, c_start, c_end, header);
  std::printf("plot: wrote gp.svg and track_map.svg\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"racekit: overtaking planner experiments"};
  app.require_subcommand(1);

  CommonArgs race_a, smax_a, bench_a, plot_a;
  add_common(app.add_subcommand("race", "run one race and write artifacts"),
             race_a);
  add_common(app.add_subcommand("smax", "bisect the highest passing S"),
             smax_a);
  add_common(app.add_subcommand("bench", "planner x behavior campaign"),
             bench_a);
  add_common(app.add_subcommand("plot", "render SVGs from run artifacts"),
             plot_a);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) ? 2 : 0;
  }

  try {
    if (app.got_subcommand("race")) return cmd_race(race_a);
    if (app.got_subcommand("smax")) return cmd_smax(smax_a);
    if (app.got_subcommand("bench")) return cmd_bench(bench_a);
    if (app.got_subcommand("plot")) return cmd_plot(plot_a);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 2;
}
