#pragma once

#include "copush/types.hpp"

namespace copush {

/// Adaptive estimate of the lumped model error, with its diagonal gain and
/// projection box. Components: (mass error [kg], inertia error [kg m^2],
/// translational friction [N], rotational friction [N m]).
struct UncertaintyEstimate {
  Vec4 psi = Vec4::Zero();
  Vec4 gain = Vec4(300.0, 200.0, 100.0, 100.0);
  Vec4 psi_min = Vec4(-20.0, -5.0, 0.0, 0.0);
  Vec4 psi_max = Vec4(20.0, 5.0, 60.0, 20.0);

  bool valid() const {
    return (gain.array() > 0.0).all() && (psi_min.array() <= psi_max.array()).all() &&
           (psi.array() >= psi_min.array()).all() && (psi.array() <= psi_max.array()).all();
  }
};

/// Desired configuration, velocity, and acceleration for the tracking error,
/// with the composite-error rate lambda.
struct TrackingReference {
  Vec3 q_d = Vec3::Zero();
  Vec3 qdot_d = Vec3::Zero();
  Vec3 qddot_d = Vec3::Zero();
  double lambda = 3.0;
};

/// Composite tracking error s = qdot_e + lambda * q_e.
Vec3 composite_error(const ObjectState& x, const TrackingReference& ref);

/// Reference velocity qdot_r = qdot_b - s and its derivative.
struct ReferenceMotion {
  Vec3 qdot_r;
  Vec3 qddot_r;
};
ReferenceMotion reference_motion(const ObjectState& x, const TrackingReference& ref);

/// One explicit-Euler step of the adaptation law with componentwise
/// projection onto [psi_min, psi_max].
UncertaintyEstimate adaptation_step(const UncertaintyEstimate& est,
                                    const RegressorMat& regressor, const Vec3& s,
                                    double dt);

}  // namespace copush
