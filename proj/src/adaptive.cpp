#include "copush/adaptive.hpp"

namespace copush {

Vec3 composite_error(const ObjectState& x, const TrackingReference& ref) {
  return (x.qdot - ref.qdot_d) + ref.lambda * (x.q - ref.q_d);
}

ReferenceMotion reference_motion(const ObjectState& x, const TrackingReference& ref) {
  ReferenceMotion m;
  m.qdot_r = ref.qdot_d - ref.lambda * (x.q - ref.q_d);
  m.qddot_r = ref.qddot_d - ref.lambda * (x.qdot - ref.qdot_d);
  return m;
}

UncertaintyEstimate adaptation_step(const UncertaintyEstimate& est,
                                    const RegressorMat& regressor, const Vec3& s,
                                    double dt) {
  UncertaintyEstimate next = est;
  const Vec4 rate = est.gain.cwiseProduct(regressor.transpose() * s);
  next.psi = (est.psi - dt * rate).cwiseMax(est.psi_min).cwiseMin(est.psi_max);
  return next;
}

}  // namespace copush
