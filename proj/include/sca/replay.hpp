#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "sca/env.hpp"
#include "sca/experiments.hpp"
#include "sca/pet.hpp"
#include "sca/ppo.hpp"

namespace sca {

// Episode recording layout, one directory per episode:
//   ep.log            substep states, "t id x y heading speed is_av" per line
//   ep.meta.json      layout/env/social parameters plus per-vehicle identity
//   ep.decisions.jsonl decision-step actions and reward breakdowns
//
// Replay reconstructs the world at each decision boundary from ep.log and
// recomputes every reward term from first principles; it reports the largest
// absolute deviation from the recorded values.

struct DecisionRecord {
  int step = 0;
  double t = 0.0;  // world time when the reward was computed
  int action = 1;
  double av_speed = 0.0;
  bool collided = false;
  bool arrived = false;
  RewardBreakdown reward;
};

inline void write_episode_record(const std::string& dir, const IntersectionEnv& env,
                                 const std::vector<DecisionRecord>& decisions) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  {
    std::ofstream f(fs::path(dir) / "ep.log");
    if (!f) throw std::runtime_error("write_episode_record: cannot open ep.log");
    for (const auto& r : env.log())
      f << fmt_g17(r.t) << ' ' << r.id << ' ' << fmt_g17(r.x) << ' ' << fmt_g17(r.y) << ' '
        << fmt_g17(r.heading) << ' ' << fmt_g17(r.speed) << ' ' << (r.is_av ? 1 : 0) << "\n";
    if (!f) throw std::runtime_error("write_episode_record: ep.log write failed");
  }
  {
    const auto& lc = env.layout().config();
    const auto& ec = env.env_config();
    const auto& sc = env.social_config();
    json meta;
    meta["layout"] = {{"arm_length", lc.arm_length}, {"lane_width", lc.lane_width},
                      {"intersection_half", lc.intersection_half}, {"left_turn_radius", lc.left_turn_radius},
                      {"right_turn_radius", lc.right_turn_radius}, {"v_max", lc.v_max}};
    meta["social"] = {{"phi", sc.phi}, {"alpha", sc.alpha}, {"lambda", sc.lambda},
                      {"w_c", sc.w_c}, {"w_e", sc.w_e}, {"w_a", sc.w_a},
                      {"ttc_threshold", sc.ttc_threshold}};
    meta["env"] = {{"perception_radius", ec.perception_radius},
                   {"conflict_radius", ec.conflict_radius},
                   {"efficiency_coef", ec.efficiency_coef},
                   {"collision_reward", ec.collision_reward},
                   {"arrival_reward", ec.arrival_reward},
                   {"prediction_horizon", ec.prediction.horizon},
                   {"prediction_sample_dt", ec.prediction.sample_dt},
                   {"v0_aggressive", ec.v0_aggressive}, {"v0_moderate", ec.v0_moderate},
                   {"v0_conservative", ec.v0_conservative}, {"delta_exp", ec.delta_exp}};
    meta["vehicles"] = json::array();
    for (const auto& v : env.vehicles())
      meta["vehicles"].push_back({{"id", v.id}, {"is_av", v.is_av},
                                  {"style", style_name(v.style)}, {"arm", arm_name(v.arm)},
                                  {"movement", movement_name(v.movement)}});
    std::ofstream f(fs::path(dir) / "ep.meta.json");
    f << meta.dump(2) << "\n";
    if (!f) throw std::runtime_error("write_episode_record: ep.meta.json write failed");
  }
  {
    std::ofstream f(fs::path(dir) / "ep.decisions.jsonl");
    for (const auto& d : decisions) {
      json j = {{"step", d.step}, {"t", d.t}, {"action", d.action},
                {"av_speed", d.av_speed}, {"collided", d.collided}, {"arrived", d.arrived},
                {"r_c", d.reward.r_c}, {"r_e", d.reward.r_e}, {"r_a", d.reward.r_a},
                {"R_E", d.reward.R_E}, {"R_C", d.reward.R_C},
                {"R_global", d.reward.R_global}};
      f << j.dump() << "\n";
    }
    if (!f) throw std::runtime_error("write_episode_record: ep.decisions.jsonl write failed");
  }
}

struct ReplayReport {
  int decisions = 0;
  double max_abs_error = 0.0;  // over all recomputed reward terms
};

inline ReplayReport replay_episode(const std::string& dir) {
  namespace fs = std::filesystem;

  json meta;
  {
    std::ifstream f(fs::path(dir) / "ep.meta.json");
    if (!f) throw std::runtime_error("replay_episode: cannot open ep.meta.json");
    f >> meta;
  }
  LayoutConfig lc;
  lc.arm_length = meta["layout"]["arm_length"].get<double>();
  lc.lane_width = meta["layout"]["lane_width"].get<double>();
  lc.intersection_half = meta["layout"]["intersection_half"].get<double>();
  lc.left_turn_radius = meta["layout"]["left_turn_radius"].get<double>();
  lc.right_turn_radius = meta["layout"]["right_turn_radius"].get<double>();
  lc.v_max = meta["layout"]["v_max"].get<double>();
  IntersectionLayout layout(lc);

  SocialConfig sc;
  sc.phi = meta["social"]["phi"].get<double>();
  sc.alpha = meta["social"]["alpha"].get<double>();
  sc.lambda = meta["social"]["lambda"].get<double>();
  sc.w_c = meta["social"]["w_c"].get<double>();
  sc.w_e = meta["social"]["w_e"].get<double>();
  sc.w_a = meta["social"]["w_a"].get<double>();
  sc.ttc_threshold = meta["social"]["ttc_threshold"].get<double>();

  EnvConfig ec;
  ec.perception_radius = meta["env"]["perception_radius"].get<double>();
  ec.conflict_radius = meta["env"]["conflict_radius"].get<double>();
  ec.efficiency_coef = meta["env"]["efficiency_coef"].get<double>();
  ec.collision_reward = meta["env"]["collision_reward"].get<double>();
  ec.arrival_reward = meta["env"]["arrival_reward"].get<double>();
  ec.prediction.horizon = meta["env"]["prediction_horizon"].get<double>();
  ec.prediction.sample_dt = meta["env"]["prediction_sample_dt"].get<double>();
  ec.v0_aggressive = meta["env"]["v0_aggressive"].get<double>();
  ec.v0_moderate = meta["env"]["v0_moderate"].get<double>();
  ec.v0_conservative = meta["env"]["v0_conservative"].get<double>();
  ec.delta_exp = meta["env"]["delta_exp"].get<double>();

  struct Identity { bool is_av; DriverStyle style; Arm arm; Movement movement; };
  std::map<int, Identity> ids;
  for (const auto& jv : meta["vehicles"])
    ids[jv["id"].get<int>()] = {jv["is_av"].get<bool>(),
                                style_from_name(jv["style"].get<std::string>()),
                                arm_from_name(jv["arm"].get<std::string>()),
                                movement_from_name(jv["movement"].get<std::string>())};

  // Group log rows by timestamp (substep).
  std::vector<LogRow> log;
  {
    std::ifstream f(fs::path(dir) / "ep.log");
    if (!f) throw std::runtime_error("replay_episode: cannot open ep.log");
    std::string line;
    while (std::getline(f, line)) {
      if (line.empty()) continue;
      std::istringstream is(line);
      LogRow r;
      int av;
      is >> r.t >> r.id >> r.x >> r.y >> r.heading >> r.speed >> av;
      if (!is) throw std::runtime_error("replay_episode: malformed ep.log row: " + line);
      r.is_av = av != 0;
      log.push_back(r);
    }
  }

  auto snapshot_at = [&](double t) {
    std::vector<Vehicle> vehicles;
    for (const auto& r : log) {
      if (r.t != t) continue;
      const Identity& id = ids.at(r.id);
      Vehicle v;
      v.id = r.id;
      v.is_av = id.is_av;
      v.style = id.style;
      v.arm = id.arm;
      v.movement = id.movement;
      v.idm = style_params(id.style, ec.v0_aggressive, ec.v0_moderate, ec.v0_conservative,
                           ec.delta_exp);
      v.state = {r.x, r.y, r.heading, r.speed};
      vehicles.push_back(v);
    }
    return vehicles;
  };

  ReplayReport rep;
  std::ifstream f(fs::path(dir) / "ep.decisions.jsonl");
  if (!f) throw std::runtime_error("replay_episode: cannot open ep.decisions.jsonl");
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    double t = j["t"].get<double>();
    std::vector<Vehicle> world = snapshot_at(t);
    const Vehicle* av = nullptr;
    for (const auto& v : world)
      if (v.is_av) av = &v;
    if (!av) throw std::runtime_error("replay_episode: AV missing from snapshot at t=" +
                                      std::to_string(t));

    RewardBreakdown rb;
    RewardInputs in;
    in.av_speed = j["av_speed"].get<double>();
    in.collided = j["collided"].get<bool>();
    in.arrived = j["arrived"].get<bool>();
    ego_reward(in, lc.v_max, ec, sc, rb);
    rb.R_C = coordination_reward(*av, world, layout, ec, sc);
    rb.R_global = global_reward(rb.R_E, rb.R_C, sc.phi);

    auto check = [&](const char* key, double got) {
      double want = j[key].get<double>();
      rep.max_abs_error = std::max(rep.max_abs_error, std::abs(want - got));
    };
    check("r_c", rb.r_c);
    check("r_e", rb.r_e);
    check("r_a", rb.r_a);
    check("R_E", rb.R_E);
    check("R_C", rb.R_C);
    check("R_global", rb.R_global);
    ++rep.decisions;
  }
  return rep;
}

// Runs one greedy episode with the given policy and records it to `dir`.
template <typename T>
EpisodeResult record_episode(const LayoutConfig& layout, const EnvConfig& env_cfg,
                             const SocialConfig& social, PolicyNetT<T>& policy, DplModel* dpl,
                             std::uint64_t seed, const std::string& dir) {
  IntersectionRolloutEnv env(layout, env_cfg, social, dpl);
  PolicyInput in = env.reset(seed);
  Rng dummy(0);
  std::vector<DecisionRecord> decisions;
  bool done = false;
  int step = 0;
  while (!done) {
    PolicyOutput out = policy.forward(in);
    auto [action, logprob] = act(out, ActMode::Greedy, dummy);
    (void)logprob;
    auto [next, rb, d, info] = env.step(action);
    DecisionRecord rec;
    rec.step = step++;
    rec.t = env.env().time();
    rec.action = static_cast<int>(action);
    rec.av_speed = env.env().av().state.speed;
    rec.collided = info.collided;
    rec.arrived = info.arrived;
    rec.reward = rb;
    decisions.push_back(rec);
    in = next;
    done = d;
  }
  write_episode_record(dir, env.env(), decisions);
  EpisodeResult res = env.env().result();
  res.min_pet = compute_pet(env.env().log(), env.env().layout().config());
  return res;
}

}  // namespace sca
