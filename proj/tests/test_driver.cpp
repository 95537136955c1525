#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "sca/driver.hpp"
#include "sca/rng.hpp"

using namespace sca;

namespace {

// Independent scalar re-statement of the car-following law, kept deliberately
// separate from the implementation.
double idm_oracle(double v, double gap, double dv, double d0, double T, double a0, double b0,
                  double v0, double delta) {
  if (gap <= 0.0) return -2.0 * b0;
  double desired = d0 + v * T + v * dv / (2.0 * std::sqrt(a0 * b0));
  if (desired < 0.0) desired = 0.0;
  double inter = 0.0;
  if (std::isfinite(gap)) inter = (desired / gap) * (desired / gap);
  double a = a0 * (1.0 - std::pow(v / v0, delta) - inter);
  if (a > a0) a = a0;
  if (a < -2.0 * b0) a = -2.0 * b0;
  return a;
}

}  // namespace

TEST_CASE("idm matches the scalar oracle per style on random states") {
  Rng rng(2024);
  for (DriverStyle style : {DriverStyle::Aggressive, DriverStyle::Moderate,
                            DriverStyle::Conservative}) {
    IdmParams p = style_params(style);
    for (int i = 0; i < 100; ++i) {
      double v = rng.uniform(0.0, 12.0);
      double gap = rng.uniform() < 0.1 ? std::numeric_limits<double>::infinity()
                                       : rng.uniform(-2.0, 80.0);
      double dv = rng.uniform(-8.0, 8.0);
      double got = idm_accel(v, gap, dv, p);
      double want = idm_oracle(v, gap, dv, p.d0, p.T, p.a0, p.b0, p.v0, p.delta_exp);
      CHECK(std::abs(got - want) <= 1e-9);
    }
  }
}

TEST_CASE("style parameter table") {
  IdmParams a = style_params(DriverStyle::Aggressive);
  CHECK(a.d0 == 2.0); CHECK(a.T == 1.0); CHECK(a.a0 == 5.0); CHECK(a.b0 == 5.0);
  CHECK(a.v0 == 10.0);
  IdmParams m = style_params(DriverStyle::Moderate);
  CHECK(m.d0 == 5.0); CHECK(m.T == 1.5); CHECK(m.a0 == 2.5); CHECK(m.b0 == 4.0);
  CHECK(m.v0 == 8.0);
  IdmParams c = style_params(DriverStyle::Conservative);
  CHECK(c.d0 == 8.0); CHECK(c.T == 2.0); CHECK(c.a0 == 1.5); CHECK(c.b0 == 2.0);
  CHECK(c.v0 == 6.0);
  CHECK(a.delta_exp == 4.0);
}

TEST_CASE("idm free road at desired speed gives zero acceleration") {
  IdmParams p = style_params(DriverStyle::Moderate);
  double a = idm_accel(p.v0, std::numeric_limits<double>::infinity(), 0.0, p);
  CHECK(a == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("idm output stays within the clamp") {
  Rng rng(7);
  IdmParams p = style_params(DriverStyle::Aggressive);
  for (int i = 0; i < 1000; ++i) {
    double a = idm_accel(rng.uniform(0, 15), rng.uniform(-5, 100), rng.uniform(-10, 10), p);
    CHECK(a <= p.a0);
    CHECK(a >= -2.0 * p.b0);
  }
  CHECK(idm_accel(5.0, 0.0, 0.0, p) == -2.0 * p.b0);
  CHECK(idm_accel(5.0, -3.0, 0.0, p) == -2.0 * p.b0);
}

TEST_CASE("idm monotonicity properties") {
  IdmParams p = style_params(DriverStyle::Moderate);
  // larger gap (same everything else) never decreases acceleration
  for (double v : {2.0, 5.0, 7.9}) {
    double prev = -1e9;
    for (double gap = 1.0; gap < 100.0; gap += 1.0) {
      double a = idm_accel(v, gap, 1.0, p);
      CHECK(a >= prev - 1e-12);
      prev = a;
    }
  }
  // closing faster (larger dv) never increases acceleration
  for (double gap : {5.0, 20.0, 60.0}) {
    double prev = 1e9;
    for (double dv = -6.0; dv <= 6.0; dv += 0.5) {
      double a = idm_accel(5.0, gap, dv, p);
      CHECK(a <= prev + 1e-12);
      prev = a;
    }
  }
}

TEST_CASE("mobil: free target lane with a slow leader ahead triggers a change") {
  IdmParams p = style_params(DriverStyle::Moderate);
  LaneContext cur;
  cur.leader_gap = 8.0;
  cur.leader_speed = 2.0;
  LaneContext tgt;  // empty lane
  CHECK(mobil_should_change(7.0, cur, tgt, p, MobilParams{}));
}

TEST_CASE("mobil: no incentive on an already-free lane") {
  IdmParams p = style_params(DriverStyle::Moderate);
  LaneContext cur;  // empty
  LaneContext tgt;  // empty
  CHECK_FALSE(mobil_should_change(7.0, cur, tgt, p, MobilParams{}));
}

TEST_CASE("mobil: safety veto on a close fast follower") {
  IdmParams p = style_params(DriverStyle::Moderate);
  LaneContext cur;
  cur.leader_gap = 5.0;
  cur.leader_speed = 0.0;
  LaneContext tgt;
  tgt.follower_gap = 1.0;
  tgt.follower_speed = 12.0;
  CHECK_FALSE(mobil_should_change(6.0, cur, tgt, p, MobilParams{}));
}

TEST_CASE("mobil: politeness suppresses a selfish change") {
  IdmParams p = style_params(DriverStyle::Moderate);
  LaneContext cur;
  cur.leader_gap = 30.0;
  cur.leader_speed = 7.0;
  LaneContext tgt;
  tgt.follower_gap = 9.0;  // safe, but the follower is imposed on
  tgt.follower_speed = 8.0;
  MobilParams polite;    // politeness 0.3
  MobilParams selfish;
  selfish.politeness = 0.0;
  bool change_selfish = mobil_should_change(5.0, cur, tgt, p, selfish);
  bool change_polite = mobil_should_change(5.0, cur, tgt, p, polite);
  // the polite decision can only flip from change to no-change, never the reverse
  if (change_polite) CHECK(change_selfish);
}

TEST_CASE("constant-speed prediction along a straight route") {
  Polyline route({{0, 0}, {100, 0}});
  VehicleState s{10, 0, 0, 4};
  PredictedPath path = predict_constant_speed(s, route, PredictionConfig{});
  REQUIRE(path.samples.size() == 7);  // 3.0 / 0.5 + 1
  for (int k = 0; k <= 6; ++k) {
    CHECK(path.samples[k].x == doctest::Approx(10.0 + 4.0 * 0.5 * k));
    CHECK(path.samples[k].y == doctest::Approx(0.0));
  }
}

TEST_CASE("prediction truncates at the route end") {
  Polyline route({{0, 0}, {10, 0}});
  VehicleState s{8, 0, 0, 6};
  PredictedPath path = predict_constant_speed(s, route, PredictionConfig{});
  for (const auto& pt : path.samples) CHECK(pt.x <= 10.0 + 1e-12);
  CHECK(path.samples.back().x == doctest::Approx(10.0));
}

TEST_CASE("first conflict on crossing straight paths") {
  Polyline ew({{-30, 0}, {30, 0}});
  Polyline ns({{0, -30}, {0, 30}});
  VehicleState a{-10, 0, 0, 5};          // reaches origin at t=2
  VehicleState b{0, -10, M_PI / 2, 5};   // reaches origin at t=2
  auto pa = predict_constant_speed(a, ew, PredictionConfig{});
  auto pb = predict_constant_speed(b, ns, PredictionConfig{});
  auto c = first_conflict(pa, pb, 3.0);
  REQUIRE(c.has_value());
  // at k=3 (t=1.5) they are at (-2.5,0) and (0,-2.5): distance ~3.54 > 3
  // at k=4 (t=2.0) both at origin
  CHECK(c->time_index == 4);
  CHECK(c->ego_distance == doctest::Approx(10.0));
}

TEST_CASE("no conflict when paths stay apart") {
  Polyline r1({{-30, 0}, {30, 0}});
  Polyline r2({{-30, 10}, {30, 10}});
  VehicleState a{-10, 0, 0, 5};
  VehicleState b{-10, 10, 0, 5};
  auto c = first_conflict(predict_constant_speed(a, r1, {}),
                          predict_constant_speed(b, r2, {}), 3.0);
  CHECK_FALSE(c.has_value());
}

TEST_CASE("yield braking only against priority traffic") {
  Polyline ew({{-30, 0}, {30, 0}});
  Polyline ns({{0, -30}, {0, 30}});
  VehicleState ego{-10, 0, 0, 5};
  VehicleState other{0, -10, M_PI / 2, 5};
  auto ep = predict_constant_speed(ego, ew, {});
  auto op = predict_constant_speed(other, ns, {});
  IdmParams p = style_params(DriverStyle::Moderate);

  auto none = yield_brake(ego, ep, {op}, {false}, 3.0, p);
  CHECK_FALSE(none.has_value());

  auto brake = yield_brake(ego, ep, {op}, {true}, 3.0, p);
  REQUIRE(brake.has_value());
  CHECK(*brake < 0.0);
  // equals treating the conflict point as a standing leader
  double gap = std::max(10.0 - 3.0, 0.1);
  CHECK(*brake == doctest::Approx(idm_accel(5.0, gap, 5.0, p)));
}
