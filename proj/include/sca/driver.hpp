#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "sca/dynamics.hpp"
#include "sca/geometry.hpp"

namespace sca {

struct IdmParams {
  double d0 = 5.0;         // jam distance, m
  double T = 1.5;          // desired time headway, s
  double a0 = 2.5;         // max acceleration, m/s^2
  double b0 = 4.0;         // comfortable deceleration, m/s^2
  double v0 = 8.0;         // desired speed, m/s
  double delta_exp = 4.0;  // acceleration exponent
};

enum class DriverStyle { Aggressive, Moderate, Conservative };

inline const char* style_name(DriverStyle s) {
  switch (s) {
    case DriverStyle::Aggressive: return "Aggressive";
    case DriverStyle::Moderate: return "Moderate";
    case DriverStyle::Conservative: return "Conservative";
  }
  return "?";
}

// Per-style IDM parameter rows. d0/T/a0/b0 follow the published style table;
// v0 per style is configurable (defaults 10/8/6).
inline IdmParams style_params(DriverStyle s, double v0_aggressive = 10.0,
                              double v0_moderate = 8.0, double v0_conservative = 6.0,
                              double delta_exp = 4.0) {
  switch (s) {
    case DriverStyle::Aggressive: return {2.0, 1.0, 5.0, 5.0, v0_aggressive, delta_exp};
    case DriverStyle::Moderate: return {5.0, 1.5, 2.5, 4.0, v0_moderate, delta_exp};
    case DriverStyle::Conservative: return {8.0, 2.0, 1.5, 2.0, v0_conservative, delta_exp};
  }
  throw std::invalid_argument("style_params: bad style");
}

// IDM acceleration. gap = +inf encodes "no leader"; dv = v - v_lead.
// Output clamped to [-2*b0, a0]; nonpositive gap returns the emergency limit.
inline double idm_accel(double v, double gap, double dv, const IdmParams& p) {
  double b_max = 2.0 * p.b0;
  if (gap <= 0.0) return -b_max;
  double free_term = 1.0 - std::pow(v / p.v0, p.delta_exp);
  double interaction = 0.0;
  if (std::isfinite(gap)) {
    double s_star = p.d0 + v * p.T + v * dv / (2.0 * std::sqrt(p.a0 * p.b0));
    s_star = std::max(0.0, s_star);
    interaction = (s_star / gap) * (s_star / gap);
  }
  double a = p.a0 * (free_term - interaction);
  return std::clamp(a, -b_max, p.a0);
}

struct MobilParams {
  double politeness = 0.3;
  double accel_gain_threshold = 0.2;  // m/s^2
  double safe_braking = 4.0;          // m/s^2
};

// Longitudinal context of one lane around the ego vehicle. Gaps are bumper
// gaps in meters; +inf means absent.
struct LaneContext {
  double leader_gap = std::numeric_limits<double>::infinity();
  double leader_speed = 0.0;
  double follower_gap = std::numeric_limits<double>::infinity();
  double follower_speed = 0.0;
};

// MOBIL incentive + safety criterion. All accelerations come from idm_accel
// with the shared parameter set `idm`. vehicle_length closes the gap the ego
// vacates for its old follower.
inline bool mobil_should_change(double ego_speed, const LaneContext& current,
                                const LaneContext& target, const IdmParams& idm,
                                const MobilParams& p, double vehicle_length = 5.0) {
  auto accel = [&](double v, double gap, double lead_speed) {
    return idm_accel(v, gap, std::isfinite(gap) ? v - lead_speed : 0.0, idm);
  };
  // Safety veto: the target-lane follower must not be forced below -safe_braking.
  double new_follower_after = accel(target.follower_speed, target.follower_gap, ego_speed);
  if (new_follower_after < -p.safe_braking) return false;

  double ego_now = accel(ego_speed, current.leader_gap, current.leader_speed);
  double ego_after = accel(ego_speed, target.leader_gap, target.leader_speed);

  double new_follower_before =
      accel(target.follower_speed,
            std::isfinite(target.leader_gap)
                ? target.follower_gap + vehicle_length + target.leader_gap
                : std::numeric_limits<double>::infinity(),
            target.leader_speed);
  double old_follower_before = accel(current.follower_speed, current.follower_gap, ego_speed);
  double old_follower_after =
      accel(current.follower_speed,
            std::isfinite(current.leader_gap)
                ? current.follower_gap + vehicle_length + current.leader_gap
                : std::numeric_limits<double>::infinity(),
            current.leader_speed);

  double ego_gain = ego_after - ego_now;
  double others_gain = (new_follower_after - new_follower_before) +
                       (old_follower_after - old_follower_before);
  return ego_gain + p.politeness * others_gain > p.accel_gain_threshold;
}

struct PredictionConfig {
  double horizon = 3.0;    // T_p, s
  double sample_dt = 0.5;  // s
};

struct PredictedPath {
  std::vector<Vec2> samples;  // horizon/sample_dt + 1 points, shared time grid
  double sample_dt = 0.5;
};

// Constant-speed advance along the route; truncates at the route end.
inline PredictedPath predict_constant_speed(const VehicleState& s, const Polyline& route,
                                            const PredictionConfig& cfg) {
  int n = static_cast<int>(std::llround(cfg.horizon / cfg.sample_dt));
  double s0 = route.project(s.position());
  PredictedPath path;
  path.sample_dt = cfg.sample_dt;
  path.samples.reserve(n + 1);
  for (int k = 0; k <= n; ++k) {
    double arc = std::min(s0 + s.speed * cfg.sample_dt * k, route.length());
    path.samples.push_back(route.point_at(arc));
  }
  return path;
}

struct ConflictInfo {
  int time_index = -1;        // first sample index within the conflict radius
  double ego_distance = 0.0;  // ego travel distance to its conflicting sample
};

// First predicted sample where two paths come within `radius` of each other.
inline std::optional<ConflictInfo> first_conflict(const PredictedPath& ego,
                                                  const PredictedPath& other,
                                                  double radius) {
  std::size_t n = std::min(ego.samples.size(), other.samples.size());
  double acc = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (k > 0) acc += distance(ego.samples[k - 1], ego.samples[k]);
    if (distance(ego.samples[k], other.samples[k]) < radius)
      return ConflictInfo{static_cast<int>(k), acc};
  }
  return std::nullopt;
}

// Brake override for a non-priority vehicle: treat the conflict point as a
// standing leader at the predicted ego travel distance.
inline std::optional<double> yield_brake(const VehicleState& ego, const PredictedPath& ego_path,
                                         const std::vector<PredictedPath>& others,
                                         const std::vector<bool>& other_has_priority,
                                         double conflict_radius, const IdmParams& idm) {
  std::optional<double> brake;
  for (std::size_t j = 0; j < others.size(); ++j) {
    if (!other_has_priority[j]) continue;
    auto c = first_conflict(ego_path, others[j], conflict_radius);
    if (!c) continue;
    double gap = std::max(c->ego_distance - conflict_radius, 0.1);
    double a = idm_accel(ego.speed, gap, ego.speed, idm);
    if (!brake || a < *brake) brake = a;
  }
  return brake;
}

}  // namespace sca
