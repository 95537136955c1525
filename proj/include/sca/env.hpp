#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "sca/driver.hpp"
#include "sca/dynamics.hpp"
#include "sca/geometry.hpp"
#include "sca/layout.hpp"
#include "sca/rng.hpp"

namespace sca {

enum class Action { SlowDown = 0, Cruise = 1, SpeedUp = 2 };
inline constexpr int kNumActions = 3;

struct SocialConfig {
  double phi = 0.0;           // coordination tendency, [0, pi/2]
  double alpha = 0.5;
  double lambda = 0.05;       // 1/m
  double w_c = 1.0;
  double w_e = 1.0;
  double w_a = 1.0;
  double ttc_threshold = 1.5; // s
};

struct RewardBreakdown {
  double r_c = 0.0;
  double r_e = 0.0;
  double r_a = 0.0;
  double R_E = 0.0;
  double R_C = 0.0;
  double R_global = 0.0;
};

enum class Outcome { Arrived, Collided, Timeout };

inline const char* outcome_name(Outcome o) {
  switch (o) {
    case Outcome::Arrived: return "Arrived";
    case Outcome::Collided: return "Collided";
    case Outcome::Timeout: return "Timeout";
  }
  return "?";
}

struct EpisodeResult {
  Outcome outcome = Outcome::Timeout;
  int steps = 0;
  double return_E = 0.0;
  double return_C = 0.0;
  double return_global = 0.0;
  double avg_speed = 0.0;
  std::optional<double> min_pet;
};

struct Observation {
  std::array<double, 4> ego{};                 // [x, y, vx, vy], normalized
  std::vector<std::array<double, 4>> rows;     // n_max neighbor rows
  std::vector<bool> mask;                      // row validity
};

struct EnvConfig {
  double decision_period = 0.5;   // s
  double substep_dt = 0.1;        // s
  int max_decisions = 120;
  int n_max_neighbors = 6;
  double perception_radius = 50.0;  // m
  int k_min = 3;
  int k_max = 6;
  double spawn_spacing = 10.0;    // m
  double speed_step = 1.5;        // m/s per SlowDown/SpeedUp
  double collision_reward = -10.0;
  double arrival_reward = 10.0;
  double efficiency_coef = 0.1;
  double lookahead = 5.0;         // pure-pursuit, m
  double conflict_radius = 3.0;   // m, shared by yield logic and TTC
  double av_initial_speed = 5.0;  // m/s
  double v0_aggressive = 10.0;
  double v0_moderate = 8.0;
  double v0_conservative = 6.0;
  double delta_exp = 4.0;
  BicycleParams vehicle{};
  PidGains pid{};
  PredictionConfig prediction{};
  bool spawn_av = true;           // false for HV-only data generation
};

struct Vehicle {
  int id = 0;
  bool is_av = false;
  DriverStyle style = DriverStyle::Moderate;
  IdmParams idm{};
  Arm arm = Arm::S;
  Movement movement = Movement::Left;
  VehicleState state{};
  bool active = true;
  std::vector<Vec2> history;  // position at each decision boundary
};

struct LogRow {
  double t = 0.0;
  int id = 0;
  double x = 0.0, y = 0.0, heading = 0.0, speed = 0.0;
  bool is_av = false;
};

// Separating-axis overlap test for two oriented rectangles (length along
// heading, width across).
inline bool rectangles_overlap(const VehicleState& a, const VehicleState& b,
                               double length, double width) {
  auto corners = [&](const VehicleState& s) {
    double c = std::cos(s.heading), n = std::sin(s.heading);
    double hl = length / 2.0, hw = width / 2.0;
    std::array<Vec2, 4> out;
    int k = 0;
    for (double dl : {hl, -hl})
      for (double dw : {hw, -hw})
        out[k++] = {s.x + dl * c - dw * n, s.y + dl * n + dw * c};
    return out;
  };
  auto ca = corners(a), cb = corners(b);
  auto separated = [&](const Vec2& axis) {
    double amin = std::numeric_limits<double>::infinity(), amax = -amin;
    double bmin = amin, bmax = amax;
    for (const auto& p : ca) { double d = p.dot(axis); amin = std::min(amin, d); amax = std::max(amax, d); }
    for (const auto& p : cb) { double d = p.dot(axis); bmin = std::min(bmin, d); bmax = std::max(bmax, d); }
    return amax < bmin || bmax < amin;
  };
  for (const VehicleState* s : {&a, &b}) {
    double c = std::cos(s->heading), n = std::sin(s->heading);
    if (separated({c, n}) || separated({-n, c})) return false;
  }
  return true;
}

inline std::vector<std::pair<int, int>> detect_collisions(const std::vector<Vehicle>& vehicles,
                                                          double length, double width) {
  std::vector<std::pair<int, int>> out;
  for (std::size_t i = 0; i < vehicles.size(); ++i) {
    if (!vehicles[i].active) continue;
    for (std::size_t j = i + 1; j < vehicles.size(); ++j) {
      if (!vehicles[j].active) continue;
      if (rectangles_overlap(vehicles[i].state, vehicles[j].state, length, width))
        out.emplace_back(vehicles[i].id, vehicles[j].id);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reward functions over world snapshots. Kept free-standing so that replay
// can recompute them from logged states.
// ---------------------------------------------------------------------------

struct RewardInputs {
  double av_speed = 0.0;
  bool collided = false;   // AV-involved collision during this decision step
  bool arrived = false;    // first arrival at the route end this decision step
};

inline void ego_reward(const RewardInputs& in, double v_max, const EnvConfig& env,
                       const SocialConfig& social, RewardBreakdown& rb) {
  rb.r_c = in.collided ? env.collision_reward : 0.0;
  rb.r_e = env.efficiency_coef * (in.av_speed / v_max);
  rb.r_a = in.arrived ? env.arrival_reward : 0.0;
  rb.R_E = social.w_c * rb.r_c + social.w_e * rb.r_e + social.w_a * rb.r_a;
}

// Coordination estimate over HVs within the perception radius. TTC comes from
// constant-speed route predictions against the AV.
inline double coordination_reward(const Vehicle& av, const std::vector<Vehicle>& vehicles,
                                  const IntersectionLayout& layout, const EnvConfig& env,
                                  const SocialConfig& social) {
  const Polyline& av_route = layout.route(av.arm, av.movement);
  PredictedPath av_path = predict_constant_speed(av.state, av_route, env.prediction);
  double sum = 0.0;
  for (const auto& hv : vehicles) {
    if (hv.is_av || !hv.active) continue;
    double d = distance(av.state.position(), hv.state.position());
    if (d > env.perception_radius) continue;
    PredictedPath hv_path =
        predict_constant_speed(hv.state, layout.route(hv.arm, hv.movement), env.prediction);
    double r_c_j = 0.0;
    if (av.active) {
      auto c = first_conflict(av_path, hv_path, env.conflict_radius);
      if (c && c->time_index * env.prediction.sample_dt < social.ttc_threshold) r_c_j = -1.0;
    }
    double r_e_j = hv.state.speed / hv.idm.v0;
    sum += std::exp(-social.lambda * d) * (social.w_c * r_c_j + social.w_e * r_e_j);
  }
  return social.alpha * sum;
}

inline double global_reward(double R_E, double R_C, double phi) {
  return std::cos(phi) * R_E + std::sin(phi) * R_C;
}

// ---------------------------------------------------------------------------
// Observation
// ---------------------------------------------------------------------------

inline Observation observe(const std::vector<Vehicle>& vehicles, int ego_id,
                           const IntersectionLayout& layout, const EnvConfig& env) {
  const Vehicle* ego = nullptr;
  for (const auto& v : vehicles)
    if (v.id == ego_id) ego = &v;
  if (!ego) throw std::invalid_argument("observe: ego not found");

  const auto& lc = layout.config();
  Observation obs;
  obs.ego = {ego->state.x / lc.arm_length, ego->state.y / lc.arm_length,
             ego->state.vx() / lc.v_max, ego->state.vy() / lc.v_max};

  struct Cand { double dist; int id; const Vehicle* v; };
  std::vector<Cand> cands;
  for (const auto& v : vehicles) {
    if (v.id == ego_id || !v.active) continue;
    double d = distance(v.state.position(), ego->state.position());
    if (d <= env.perception_radius) cands.push_back({d, v.id, &v});
  }
  std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
    return a.dist != b.dist ? a.dist < b.dist : a.id < b.id;
  });

  obs.rows.assign(env.n_max_neighbors, {0.0, 0.0, 0.0, 0.0});
  obs.mask.assign(env.n_max_neighbors, false);
  int n = std::min<int>(env.n_max_neighbors, static_cast<int>(cands.size()));
  for (int k = 0; k < n; ++k) {
    const Vehicle& v = *cands[k].v;
    obs.rows[k] = {(v.state.x - ego->state.x) / env.perception_radius,
                   (v.state.y - ego->state.y) / env.perception_radius,
                   (v.state.vx() - ego->state.vx()) / lc.v_max,
                   (v.state.vy() - ego->state.vy()) / lc.v_max};
    obs.mask[k] = true;
  }
  return obs;
}

// Ids (same order as observation rows) of the visible neighbors.
inline std::vector<int> visible_neighbor_ids(const std::vector<Vehicle>& vehicles, int ego_id,
                                             const EnvConfig& env) {
  const Vehicle* ego = nullptr;
  for (const auto& v : vehicles)
    if (v.id == ego_id) ego = &v;
  if (!ego) throw std::invalid_argument("visible_neighbor_ids: ego not found");
  struct Cand { double dist; int id; };
  std::vector<Cand> cands;
  for (const auto& v : vehicles) {
    if (v.id == ego_id || !v.active) continue;
    double d = distance(v.state.position(), ego->state.position());
    if (d <= env.perception_radius) cands.push_back({d, v.id});
  }
  std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
    return a.dist != b.dist ? a.dist < b.dist : a.id < b.id;
  });
  std::vector<int> ids;
  for (int k = 0; k < std::min<int>(env.n_max_neighbors, static_cast<int>(cands.size())); ++k)
    ids.push_back(cands[k].id);
  return ids;
}

// ---------------------------------------------------------------------------
// Environment
// ---------------------------------------------------------------------------

struct StepInfo {
  bool collided = false;
  bool arrived = false;
  Outcome outcome = Outcome::Timeout;  // valid when done
};

class IntersectionEnv {
 public:
  IntersectionEnv(const LayoutConfig& layout_cfg, const EnvConfig& env_cfg,
                  const SocialConfig& social_cfg)
      : layout_(layout_cfg), env_(env_cfg), social_(social_cfg), rng_(0) {}

  const IntersectionLayout& layout() const { return layout_; }
  const EnvConfig& env_config() const { return env_; }
  const SocialConfig& social_config() const { return social_; }
  const std::vector<Vehicle>& vehicles() const { return vehicles_; }
  const std::vector<LogRow>& log() const { return log_; }
  bool done() const { return done_; }
  int decision_count() const { return decisions_; }
  double av_target_speed() const { return av_target_; }
  int av_id() const { return 0; }
  int spawned_hv_count() const { return spawned_hvs_; }

  Observation reset(std::uint64_t seed) {
    rng_ = Rng(seed);
    vehicles_.clear();
    log_.clear();
    done_ = false;
    decisions_ = 0;
    time_ = 0.0;
    av_arrived_ = false;
    result_ = EpisodeResult{};
    speed_sum_ = 0.0;
    pid_.assign(64, PidSpeedController(env_.pid));

    int next_id = 0;
    if (env_.spawn_av) {
      Vehicle av;
      av.id = next_id++;
      av.is_av = true;
      av.arm = Arm::S;
      av.movement = Movement::Left;
      const Polyline& r = layout_.route(av.arm, av.movement);
      av.state.x = r.points().front().x;
      av.state.y = r.points().front().y;
      av.state.heading = r.heading_at(0.0);
      av.state.speed = env_.av_initial_speed;
      av.history.push_back(av.state.position());
      vehicles_.push_back(av);
    }
    av_target_ = env_.av_initial_speed;

    int k = static_cast<int>(rng_.uniform_int(env_.k_min, env_.k_max));
    spawned_hvs_ = 0;
    for (int i = 0; i < k; ++i) {
      bool placed = false;
      for (int attempt = 0; attempt < 100 && !placed; ++attempt) {
        Vehicle hv;
        hv.id = next_id;
        hv.arm = static_cast<Arm>(rng_.uniform_int(0, 3));
        hv.movement = static_cast<Movement>(rng_.uniform_int(0, 2));
        hv.style = static_cast<DriverStyle>(rng_.uniform_int(0, 2));
        hv.idm = style_params(hv.style, env_.v0_aggressive, env_.v0_moderate,
                              env_.v0_conservative, env_.delta_exp);
        double arc = rng_.uniform(0.0, layout_.config().arm_length - 5.0);
        const Polyline& r = layout_.route(hv.arm, hv.movement);
        Vec2 p = r.point_at(arc);
        hv.state.x = p.x;
        hv.state.y = p.y;
        hv.state.heading = r.heading_at(arc);
        // Drivers arrive travelling near their preferred speed.
        hv.state.speed = rng_.uniform(0.9 * hv.idm.v0, hv.idm.v0);
        bool ok = true;
        for (const auto& v : vehicles_)
          if (distance(v.state.position(), hv.state.position()) < env_.spawn_spacing) ok = false;
        if (!ok) continue;
        hv.history.push_back(hv.state.position());
        vehicles_.push_back(hv);
        ++next_id;
        ++spawned_hvs_;
        placed = true;
      }
      // Infeasible spawn after 100 attempts: K is reduced by skipping.
    }
    log_states();
    if (!env_.spawn_av) return Observation{};
    return observe(vehicles_, av_id(), layout_, env_);
  }

  std::tuple<Observation, RewardBreakdown, bool, StepInfo> step(Action a) {
    if (done_) throw std::logic_error("step: episode already done");
    if (!env_.spawn_av) throw std::logic_error("step: HV-only world takes no actions");

    switch (a) {
      case Action::SlowDown: av_target_ -= env_.speed_step; break;
      case Action::SpeedUp: av_target_ += env_.speed_step; break;
      case Action::Cruise: break;
    }
    av_target_ = std::clamp(av_target_, 0.0, layout_.config().v_max);

    StepInfo info = advance_substeps();
    ++decisions_;
    for (auto& v : vehicles_)
      if (v.active || v.is_av) v.history.push_back(v.state.position());

    RewardBreakdown rb;
    RewardInputs in;
    in.av_speed = av().state.speed;
    in.collided = info.collided;
    in.arrived = info.arrived;
    ego_reward(in, layout_.config().v_max, env_, social_, rb);
    rb.R_C = coordination_reward(av(), vehicles_, layout_, env_, social_);
    rb.R_global = global_reward(rb.R_E, rb.R_C, social_.phi);

    speed_sum_ += av().state.speed;
    result_.return_E += rb.R_E;
    result_.return_C += rb.R_C;
    result_.return_global += rb.R_global;
    result_.steps = decisions_;

    bool done = false;
    if (info.collided) { done = true; info.outcome = Outcome::Collided; }
    else if (info.arrived) { done = true; info.outcome = Outcome::Arrived; }
    else if (decisions_ >= env_.max_decisions) { done = true; info.outcome = Outcome::Timeout; }
    if (done) {
      done_ = true;
      result_.outcome = info.outcome;
      result_.avg_speed = speed_sum_ / decisions_;
    }
    return {observe(vehicles_, av_id(), layout_, env_), rb, done, info};
  }

  // Advances one decision period for HV-only data generation.
  void step_hvs_only() {
    if (env_.spawn_av) throw std::logic_error("step_hvs_only: world has an AV");
    advance_substeps();
    ++decisions_;
    for (auto& v : vehicles_)
      if (v.active) v.history.push_back(v.state.position());
  }

  EpisodeResult result() const {
    if (!done_) throw std::logic_error("result: episode still running");
    return result_;
  }

  const Vehicle& av() const {
    for (const auto& v : vehicles_)
      if (v.is_av) return v;
    throw std::logic_error("av: no AV in world");
  }

  std::vector<int> neighbor_ids() const { return visible_neighbor_ids(vehicles_, av_id(), env_); }

  const Vehicle& vehicle_by_id(int id) const {
    for (const auto& v : vehicles_)
      if (v.id == id) return v;
    throw std::invalid_argument("vehicle_by_id: unknown id");
  }

  double time() const { return time_; }

 private:
  Vehicle& av_mut() {
    for (auto& v : vehicles_)
      if (v.is_av) return v;
    throw std::logic_error("av: no AV in world");
  }

  StepInfo advance_substeps() {
    StepInfo info;
    int substeps = static_cast<int>(std::llround(env_.decision_period / env_.substep_dt));
    for (int s = 0; s < substeps; ++s) {
      std::vector<ControlInput> controls(vehicles_.size());
      for (std::size_t i = 0; i < vehicles_.size(); ++i) {
        if (!vehicles_[i].active) continue;
        controls[i] = control_for(static_cast<int>(i));
      }
      for (std::size_t i = 0; i < vehicles_.size(); ++i) {
        if (!vehicles_[i].active) continue;
        vehicles_[i].state = step_bicycle(vehicles_[i].state, controls[i], env_.substep_dt,
                                          env_.vehicle);
      }
      time_ += env_.substep_dt;
      log_states();

      auto collisions = detect_collisions(vehicles_, env_.vehicle.length, env_.vehicle.width);
      for (auto& [a, b] : collisions) {
        if (env_.spawn_av && (a == av_id() || b == av_id())) info.collided = true;
      }

      for (auto& v : vehicles_) {
        if (!v.active) continue;
        const Polyline& r = layout_.route(v.arm, v.movement);
        double arc = r.project(v.state.position());
        if (arc >= r.length() - 1.0) {
          if (v.is_av) {
            if (!av_arrived_) { av_arrived_ = true; info.arrived = true; }
            v.active = false;
          } else {
            v.active = false;
          }
        }
      }
      if (info.collided || info.arrived) break;
    }
    return info;
  }

  ControlInput control_for(int idx) {
    Vehicle& v = vehicles_[idx];
    const Polyline& route = layout_.route(v.arm, v.movement);
    ControlInput u;
    u.steering = track_route(v.state, route, env_.lookahead, env_.vehicle);
    if (v.is_av) {
      u.accel = pid_[idx].step(av_target_, v.state, env_.substep_dt, env_.vehicle);
      return u;
    }
    // IDM toward the nearest leader on this vehicle's route.
    double arc = route.project(v.state.position());
    double gap = std::numeric_limits<double>::infinity();
    double lead_speed = 0.0;
    for (const auto& o : vehicles_) {
      if (o.id == v.id || !o.active) continue;
      if (route.distance_to(o.state.position()) > 2.0) continue;
      double oarc = route.project(o.state.position());
      if (oarc <= arc) continue;
      double g = oarc - arc - env_.vehicle.length;
      if (g < gap) { gap = g; lead_speed = o.state.speed; }
    }
    double a = idm_accel(v.state.speed, gap,
                         std::isfinite(gap) ? v.state.speed - lead_speed : 0.0, v.idm);

    // Horizon-limited conflict avoidance toward prioritized vehicles.
    PredictedPath ego_path = predict_constant_speed(v.state, route, env_.prediction);
    std::vector<PredictedPath> others;
    std::vector<bool> priority;
    for (const auto& o : vehicles_) {
      if (o.id == v.id || !o.active) continue;
      others.push_back(predict_constant_speed(
          o.state, layout_.route(o.arm, o.movement), env_.prediction));
      priority.push_back(has_priority_over(o, v));
    }
    auto brake = yield_brake(v.state, ego_path, others, priority, env_.conflict_radius, v.idm);
    if (brake && *brake < a) a = *brake;
    u.accel = a;
    return u;
  }

  // True iff `a` has right of way over `b`. Exactly one of (a,b), (b,a) holds
  // for any distinct pair: box occupancy, then right-hand rule, then
  // time-to-conflict-box with id tie-break.
  bool has_priority_over(const Vehicle& a, const Vehicle& b) const {
    bool a_in = layout_.in_conflict_box(a.state.position());
    bool b_in = layout_.in_conflict_box(b.state.position());
    if (a_in != b_in) return a_in;
    if (!a_in) {
      if (a.arm == right_of(b.arm) && b.arm != right_of(a.arm)) return true;
      if (b.arm == right_of(a.arm) && a.arm != right_of(b.arm)) return false;
    }
    double ta = time_to_box(a), tb = time_to_box(b);
    if (ta != tb) return ta < tb;
    return a.id < b.id;
  }

  double time_to_box(const Vehicle& v) const {
    const Polyline& r = layout_.route(v.arm, v.movement);
    double arc = r.project(v.state.position());
    double to_box = std::max(0.0, layout_.config().arm_length - arc);
    return to_box / std::max(v.state.speed, 0.1);
  }

  void log_states() {
    for (const auto& v : vehicles_) {
      if (!v.active) continue;
      log_.push_back({time_, v.id, v.state.x, v.state.y, v.state.heading, v.state.speed, v.is_av});
    }
  }

  IntersectionLayout layout_;
  EnvConfig env_;
  SocialConfig social_;
  Rng rng_;
  std::vector<Vehicle> vehicles_;
  std::vector<PidSpeedController> pid_;
  std::vector<LogRow> log_;
  double av_target_ = 0.0;
  double time_ = 0.0;
  int decisions_ = 0;
  int spawned_hvs_ = 0;
  bool done_ = false;
  bool av_arrived_ = false;
  EpisodeResult result_;
  double speed_sum_ = 0.0;
};

}  // namespace sca
