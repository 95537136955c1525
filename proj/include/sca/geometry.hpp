#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

namespace sca {

inline constexpr double kPi = 3.14159265358979323846;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  double dot(const Vec2& o) const { return x * o.x + y * o.y; }
  double norm() const { return std::sqrt(x * x + y * y); }
};

inline double distance(const Vec2& a, const Vec2& b) { return (a - b).norm(); }

// Normalizes an angle into (-pi, pi].
inline double normalize_angle(double a) {
  a = std::fmod(a, 2.0 * kPi);
  if (a <= -kPi) a += 2.0 * kPi;
  if (a > kPi) a -= 2.0 * kPi;
  return a;
}

// Piecewise-linear path with cached cumulative arc length.
class Polyline {
 public:
  Polyline() = default;
  explicit Polyline(std::vector<Vec2> pts) : pts_(std::move(pts)) {
    if (pts_.size() < 2) throw std::invalid_argument("Polyline: need >= 2 points");
    cum_.resize(pts_.size());
    cum_[0] = 0.0;
    for (std::size_t i = 1; i < pts_.size(); ++i)
      cum_[i] = cum_[i - 1] + distance(pts_[i - 1], pts_[i]);
  }

  const std::vector<Vec2>& points() const { return pts_; }
  double length() const { return cum_.back(); }

  // Position at arc length s, clamped to [0, length].
  Vec2 point_at(double s) const {
    if (s <= 0.0) return pts_.front();
    if (s >= length()) return pts_.back();
    std::size_t i = segment_index(s);
    double seg = cum_[i + 1] - cum_[i];
    double t = seg > 0.0 ? (s - cum_[i]) / seg : 0.0;
    return pts_[i] + (pts_[i + 1] - pts_[i]) * t;
  }

  // Tangent heading at arc length s.
  double heading_at(double s) const {
    std::size_t i = segment_index(std::clamp(s, 0.0, length()));
    Vec2 d = pts_[i + 1] - pts_[i];
    return std::atan2(d.y, d.x);
  }

  // Arc length of the closest point on the polyline to p.
  double project(const Vec2& p) const {
    double best_d2 = std::numeric_limits<double>::infinity();
    double best_s = 0.0;
    for (std::size_t i = 0; i + 1 < pts_.size(); ++i) {
      Vec2 a = pts_[i], d = pts_[i + 1] - pts_[i];
      double len2 = d.dot(d);
      double t = len2 > 0.0 ? std::clamp((p - a).dot(d) / len2, 0.0, 1.0) : 0.0;
      Vec2 q = a + d * t;
      double d2 = (p - q).dot(p - q);
      if (d2 < best_d2) {
        best_d2 = d2;
        best_s = cum_[i] + t * std::sqrt(len2);
      }
    }
    return best_s;
  }

  double distance_to(const Vec2& p) const { return distance(p, point_at(project(p))); }

 private:
  std::size_t segment_index(double s) const {
    std::size_t lo = 0, hi = cum_.size() - 1;
    while (hi - lo > 1) {
      std::size_t mid = (lo + hi) / 2;
      if (cum_[mid] <= s) lo = mid; else hi = mid;
    }
    return lo;
  }

  std::vector<Vec2> pts_;
  std::vector<double> cum_;
};

}  // namespace sca
