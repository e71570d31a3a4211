#include "copush/adaptive.hpp"

#include "copush/model.hpp"

#include "test_utils.hpp"

#include <doctest.h>

#include <cstring>

using namespace copush;
using namespace copush::testutil;

TEST_CASE("composite error") {
  TrackingReference ref;
  ref.lambda = 3.0;

  ObjectState x;
  CHECK(composite_error(x, ref).norm() == 0.0);

  x.q = Vec3(0.1, 0, 0);
  CHECK((composite_error(x, ref) - Vec3(0.3, 0, 0)).norm() < 1e-15);

  x.q.setZero();
  x.qdot = Vec3(0, 0.2, 0);
  CHECK((composite_error(x, ref) - Vec3(0, 0.2, 0)).norm() < 1e-15);
}

TEST_CASE("reference motion") {
  TrackingReference ref;
  ref.lambda = 3.0;

  SUBCASE("perfect tracking") {
    ref.qdot_d = Vec3(0.4, -0.1, 0.2);
    ObjectState x;
    x.qdot = ref.qdot_d;
    const ReferenceMotion m = reference_motion(x, ref);
    CHECK((m.qdot_r - ref.qdot_d).norm() < 1e-15);
    CHECK(m.qddot_r.norm() == 0.0);
  }

  SUBCASE("position error shifts the reference velocity") {
    ref.qdot_d = Vec3(0.5, 0, 0);
    ObjectState x;
    x.q = Vec3(0.1, 0, 0);
    const ReferenceMotion m = reference_motion(x, ref);
    CHECK(m.qdot_r.x() == doctest::Approx(0.2));
  }

  SUBCASE("velocity error shifts the reference acceleration") {
    ObjectState x;
    x.qdot = Vec3(0.1, 0, 0);
    const ReferenceMotion m = reference_motion(x, ref);
    CHECK(m.qddot_r.x() == doctest::Approx(-0.3));
  }

  SUBCASE("identity qdot_r = qdot_b - s") {
    for (int k = 0; k < 20; ++k) {
      ObjectState x;
      x.q = Vec3(uniform(-1, 1), uniform(-1, 1), uniform(-1, 1));
      x.qdot = Vec3(uniform(-1, 1), uniform(-1, 1), uniform(-1, 1));
      ref.q_d = Vec3(uniform(-1, 1), uniform(-1, 1), uniform(-1, 1));
      ref.qdot_d = Vec3(uniform(-1, 1), uniform(-1, 1), uniform(-1, 1));
      const Vec3 s = composite_error(x, ref);
      const ReferenceMotion m = reference_motion(x, ref);
      CHECK((m.qdot_r - (x.qdot - s)).norm() < 1e-14);
    }
  }
}

TEST_CASE("adaptation step") {
  UncertaintyEstimate est;
  est.gain = Vec4(300, 200, 100, 100);

  SUBCASE("no error, no update") {
    est.psi = Vec4(1, 2, 3, 4);
    est.psi_max = Vec4(10, 10, 10, 10);
    const UncertaintyEstimate next =
        adaptation_step(est, RegressorMat::Zero(), Vec3(0.5, -0.2, 0.1), 0.01);
    CHECK((next.psi - est.psi).norm() == 0.0);
    const UncertaintyEstimate still =
        adaptation_step(est, regressor(Vec3(1, 1, 1), Vec3(1, 1, 1), 0.01),
                        Vec3::Zero(), 0.01);
    CHECK((still.psi - est.psi).norm() == 0.0);
  }

  SUBCASE("single-entry regressor arithmetic") {
    est.psi = Vec4(0, 0, 10, 0);
    RegressorMat y = RegressorMat::Zero();
    y(0, 2) = 1.0;
    const UncertaintyEstimate next = adaptation_step(est, y, Vec3(0.1, 0, 0), 0.01);
    CHECK(next.psi(2) == doctest::Approx(10.0 - 0.1));
    CHECK(next.psi(0) == 0.0);
    CHECK(next.psi(1) == 0.0);
    CHECK(next.psi(3) == 0.0);
  }

  SUBCASE("projection at the upper bound") {
    est.psi = Vec4(0, 0, 59.9, 0);
    RegressorMat y = RegressorMat::Zero();
    y(0, 2) = 1.0;
    const UncertaintyEstimate next = adaptation_step(est, y, Vec3(-5.0, 0, 0), 0.1);
    CHECK(next.psi(2) == doctest::Approx(60.0));  // clamped at psi_max
  }

  SUBCASE("bit-for-bit determinism") {
    est.psi = Vec4(0.3, -0.2, 12.0, 1.5);
    const RegressorMat y = regressor(Vec3(0.2, -0.4, 0.1), Vec3(0.5, 0.1, -0.2), 0.01);
    const Vec3 s(0.05, -0.02, 0.03);
    const UncertaintyEstimate a = adaptation_step(est, y, s, 0.02);
    const UncertaintyEstimate b = adaptation_step(est, y, s, 0.02);
    CHECK(std::memcmp(a.psi.data(), b.psi.data(), sizeof(double) * 4) == 0);
  }
}
