#include "copush/reference.hpp"

#include "test_utils.hpp"

#include <doctest.h>

using namespace copush;
using namespace copush::testutil;

TEST_CASE("time to goal") {
  Goal g;
  g.position = Vec2(5, 5);
  g.v_avg = 0.5;
  g.omega_avg = 0.8;

  ObjectState at_goal;
  at_goal.q = Vec3(5, 5, 0);
  CHECK(time_to_goal(at_goal, g) == 0.0);

  ObjectState origin;
  CHECK(time_to_goal(origin, g) == doctest::Approx(std::sqrt(50.0) / 0.5).epsilon(1e-6));

  Goal spin;
  spin.position = Vec2::Zero();
  spin.theta = M_PI;
  spin.omega_avg = 0.8;
  ObjectState x;
  CHECK(time_to_goal(x, spin) == doctest::Approx(M_PI / 0.8).epsilon(1e-9));
}

TEST_CASE("subgoals") {
  Goal g;
  g.position = Vec2(5, 5);
  g.v_avg = 0.5;
  g.omega_avg = 0.8;

  SUBCASE("already at goal") {
    ObjectState x;
    x.q = Vec3(5, 5, 0);
    const auto refs = subgoals(x, g, 0.1, 50);
    REQUIRE(refs.size() == 51);
    for (const RefPoint& r : refs) {
      CHECK((r.q.head<2>() - g.position).norm() < 1e-15);
      CHECK(r.qdot.norm() == 0.0);
    }
  }

  SUBCASE("cruise endpoint when the goal is far") {
    ObjectState x;
    const auto refs = subgoals(x, g, 0.1, 50);
    const double horizon = 5.0;
    const Vec2 dir = g.position.normalized();
    CHECK((refs.back().q.head<2>() - Vec2(dir * 0.5 * horizon)).norm() < 1e-9);
    CHECK(refs.back().qdot.head<2>().norm() == doctest::Approx(0.5).epsilon(1e-12));
  }

  SUBCASE("clamps at the goal when t_avg < horizon") {
    Goal close = g;
    close.position = Vec2(0.5, 0);
    ObjectState x;
    const auto refs = subgoals(x, close, 0.1, 50);  // t_avg = 1 s
    CHECK((refs.back().q.head<2>() - close.position).norm() < 1e-12);
    CHECK(refs.back().qdot.norm() == 0.0);
    CHECK((refs[5].q.head<2>() - Vec2(0.25, 0)).norm() < 1e-12);
  }

  SUBCASE("positions stay on the segment and rates stay bounded") {
    for (int trial = 0; trial < 30; ++trial) {
      ObjectState x;
      x.q = Vec3(uniform(-3, 3), uniform(-3, 3), uniform(-3, 3));
      Goal gg;
      gg.position = Vec2(uniform(-3, 3), uniform(-3, 3));
      gg.theta = uniform(-3, 3);
      gg.v_avg = uniform(0.2, 1.0);
      gg.omega_avg = uniform(0.2, 1.5);
      const auto refs = subgoals(x, gg, 0.1, 40);

      const Vec2 a = x.position();
      const Vec2 b = gg.position;
      const double seg_len = (b - a).norm();
      for (const RefPoint& r : refs) {
        const Vec2 p = r.q.head<2>();
        if (seg_len > 1e-12) {
          const double s = (p - a).dot(b - a) / (seg_len * seg_len);
          CHECK(s >= -1e-9);
          CHECK(s <= 1.0 + 1e-9);
          const Vec2 off_segment = (p - a) - s * (b - a);
          CHECK(off_segment.norm() < 1e-9);
        }
        CHECK(std::abs(r.qdot.x()) <= gg.v_avg + 1e-12);
        CHECK(std::abs(r.qdot.y()) <= gg.v_avg + 1e-12);
        CHECK(std::abs(r.qdot.z()) <= gg.omega_avg + 1e-12);
      }
    }
  }

  SUBCASE("advancing along the reference time-shifts it") {
    ObjectState x;
    x.q = Vec3(0, 0, -1.0);
    Goal gg;
    gg.position = Vec2(4, 1);
    gg.theta = 0.5;
    const double dt = 0.1;
    const auto refs = subgoals(x, gg, dt, 30);

    ObjectState advanced;
    advanced.q = refs[7].q;
    advanced.qdot = refs[7].qdot;
    const auto shifted = subgoals(advanced, gg, dt, 20);
    for (int k = 0; k <= 20; ++k) {
      CHECK((shifted[k].q - refs[k + 7].q).norm() < 1e-9);
      CHECK((shifted[k].qdot - refs[k + 7].qdot).norm() < 1e-9);
    }
  }

  SUBCASE("heading interpolates along the shortest arc") {
    ObjectState x;
    x.q = Vec3(0, 0, 3.0);
    Goal gg;
    gg.position = Vec2::Zero();
    gg.theta = -3.0;  // shortest way crosses pi, not zero
    const auto refs = subgoals(x, gg, 0.05, 20);
    CHECK(refs[1].q.z() > 3.0);
    CHECK(refs.back().q.z() == doctest::Approx(2.0 * M_PI - 3.0).epsilon(1e-9));
  }
}
