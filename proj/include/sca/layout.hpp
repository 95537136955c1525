#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "sca/geometry.hpp"

namespace sca {

enum class Arm { S = 0, E = 1, N = 2, W = 3 };
enum class Movement { Left = 0, Straight = 1, Right = 2 };

inline const char* arm_name(Arm a) {
  switch (a) {
    case Arm::S: return "S";
    case Arm::E: return "E";
    case Arm::N: return "N";
    case Arm::W: return "W";
  }
  return "?";
}

inline const char* movement_name(Movement m) {
  switch (m) {
    case Movement::Left: return "Left";
    case Movement::Straight: return "Straight";
    case Movement::Right: return "Right";
  }
  return "?";
}

// The arm whose traffic approaches from the right of `a`'s approach.
inline Arm right_of(Arm a) { return static_cast<Arm>((static_cast<int>(a) + 1) % 4); }

struct LayoutConfig {
  double arm_length = 60.0;        // approach length from the conflict box edge, m
  double lane_width = 4.0;         // m
  double intersection_half = 8.0;  // conflict box half-extent, m
  double v_max = 9.0;              // speed limit, m/s
  double left_turn_radius = 9.0;   // m
  double right_turn_radius = 5.0;  // m
};

// Cross intersection centered at the origin, right-hand traffic. Routes for
// every (entry arm, movement) pair are prebuilt; arms other than S are
// rotations of the south-arm base routes.
class IntersectionLayout {
 public:
  explicit IntersectionLayout(const LayoutConfig& cfg = {}) : cfg_(cfg) {
    double h = cfg.lane_width / 2.0;
    if (cfg.right_turn_radius + h > cfg.intersection_half ||
        cfg.left_turn_radius - h > cfg.intersection_half)
      throw std::invalid_argument("IntersectionLayout: turn arcs exceed the conflict box");
    for (int arm = 0; arm < 4; ++arm)
      for (int mv = 0; mv < 3; ++mv)
        routes_[arm][mv] = Polyline(rotate(base_route(static_cast<Movement>(mv)), arm));
  }

  const LayoutConfig& config() const { return cfg_; }

  const Polyline& route(Arm arm, Movement mv) const {
    return routes_[static_cast<int>(arm)][static_cast<int>(mv)];
  }

  bool in_conflict_box(const Vec2& p) const {
    return std::abs(p.x) <= cfg_.intersection_half && std::abs(p.y) <= cfg_.intersection_half;
  }

 private:
  // South-arm base: approach northbound on lane x = +lane_width/2.
  std::vector<Vec2> base_route(Movement mv) const {
    double h = cfg_.lane_width / 2.0;
    double half = cfg_.intersection_half;
    double far = half + cfg_.arm_length;
    std::vector<Vec2> pts;
    pts.push_back({h, -far});
    if (mv == Movement::Straight) {
      pts.push_back({h, far});
      return pts;
    }
    if (mv == Movement::Right) {
      double r = cfg_.right_turn_radius;
      double y0 = -(r + h);
      pts.push_back({h, y0});
      Vec2 c{h + r, y0};
      append_arc(pts, c, r, kPi, kPi / 2.0);  // clockwise quarter turn
      pts.push_back({far, -h});
      return pts;
    }
    double r = cfg_.left_turn_radius;
    double y0 = -(r - h);
    pts.push_back({h, y0});
    Vec2 c{h - r, y0};
    append_arc(pts, c, r, 0.0, kPi / 2.0);  // counterclockwise quarter turn
    pts.push_back({-far, h});
    return pts;
  }

  static void append_arc(std::vector<Vec2>& pts, const Vec2& center, double r,
                         double start_angle, double end_angle) {
    int n = 64;
    for (int k = 1; k <= n; ++k) {
      double a = start_angle + (end_angle - start_angle) * k / n;
      pts.push_back({center.x + r * std::cos(a), center.y + r * std::sin(a)});
    }
  }

  static std::vector<Vec2> rotate(std::vector<Vec2> pts, int quarter_turns) {
    for (int k = 0; k < quarter_turns; ++k)
      for (auto& p : pts) p = Vec2{-p.y, p.x};
    return pts;
  }

  LayoutConfig cfg_;
  std::array<std::array<Polyline, 3>, 4> routes_;
};

}  // namespace sca
