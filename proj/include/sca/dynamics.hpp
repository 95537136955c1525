#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "sca/geometry.hpp"

namespace sca {

struct VehicleState {
  double x = 0.0;        // m, world longitudinal
  double y = 0.0;        // m, world lateral
  double heading = 0.0;  // rad, CCW from +x, in (-pi, pi]
  double speed = 0.0;    // m/s, nonnegative

  Vec2 position() const { return {x, y}; }
  double vx() const { return speed * std::cos(heading); }
  double vy() const { return speed * std::sin(heading); }
};

struct ControlInput {
  double steering = 0.0;  // rad, front-wheel angle
  double accel = 0.0;     // m/s^2
};

struct BicycleParams {
  double wheelbase = 2.5;
  double length = 5.0;
  double width = 2.0;
  double max_steer = 0.6;
  double max_accel = 5.0;
  double max_decel = 6.0;  // magnitude of the braking limit
};

struct PidGains {
  double kp = 1.2;
  double ki = 0.1;
  double kd = 0.0;
  double integral_clamp = 5.0;
};

inline bool finite_state(const VehicleState& s) {
  return std::isfinite(s.x) && std::isfinite(s.y) && std::isfinite(s.heading) &&
         std::isfinite(s.speed);
}

// Kinematic bicycle update, forward Euler. Slip angle beta = atan(tan(d)/2)
// places the reference point at the rear-axle midpoint of the chassis.
inline VehicleState step_bicycle(const VehicleState& state, const ControlInput& u,
                                 double dt, const BicycleParams& params) {
  if (!finite_state(state) || !std::isfinite(u.steering) || !std::isfinite(u.accel))
    throw std::invalid_argument("step_bicycle: non-finite input");
  if (dt <= 0.0) throw std::invalid_argument("step_bicycle: dt must be positive");

  double steering = std::clamp(u.steering, -params.max_steer, params.max_steer);
  double accel = std::clamp(u.accel, -params.max_decel, params.max_accel);

  double beta = std::atan(std::tan(steering) / 2.0);
  VehicleState next = state;
  next.x = state.x + state.speed * std::cos(state.heading + beta) * dt;
  next.y = state.y + state.speed * std::sin(state.heading + beta) * dt;
  next.heading = normalize_angle(
      state.heading + state.speed * std::tan(steering) * std::cos(beta) / params.wheelbase * dt);
  next.speed = std::max(0.0, state.speed + accel * dt);
  return next;
}

// Closed-loop speed tracking. Holds the integral state; one controller per vehicle.
class PidSpeedController {
 public:
  explicit PidSpeedController(const PidGains& gains = {}) : gains_(gains) {}

  double step(double v_target, const VehicleState& state, double dt,
              const BicycleParams& params) {
    if (dt <= 0.0) throw std::invalid_argument("pid_speed: dt must be positive");
    double e = v_target - state.speed;
    integral_ = std::clamp(integral_ + e * dt, -gains_.integral_clamp, gains_.integral_clamp);
    double de = (e - prev_error_) / dt;
    if (!has_prev_) de = 0.0;
    prev_error_ = e;
    has_prev_ = true;
    double a = gains_.kp * e + gains_.ki * integral_ + gains_.kd * de;
    return std::clamp(a, -params.max_decel, params.max_accel);
  }

  void reset() {
    integral_ = 0.0;
    prev_error_ = 0.0;
    has_prev_ = false;
  }

 private:
  PidGains gains_;
  double integral_ = 0.0;
  double prev_error_ = 0.0;
  bool has_prev_ = false;
};

// Pure-pursuit steering toward the route point `lookahead` meters ahead of
// the vehicle's projection onto the route. Past the route end: steer 0.
inline double track_route(const VehicleState& state, const Polyline& route,
                          double lookahead, const BicycleParams& params) {
  if (lookahead <= 0.0) throw std::invalid_argument("track_route: lookahead must be positive");
  double s = route.project(state.position());
  if (s >= route.length() - 1e-9) return 0.0;
  Vec2 target = route.point_at(s + lookahead);
  double bearing = std::atan2(target.y - state.y, target.x - state.x);
  double alpha = normalize_angle(bearing - state.heading);
  double steer = std::atan(2.0 * params.wheelbase * std::sin(alpha) / lookahead);
  return std::clamp(steer, -params.max_steer, params.max_steer);
}

}  // namespace sca
