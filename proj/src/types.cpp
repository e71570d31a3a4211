#include "copush/types.hpp"

namespace copush {

double wrap_angle(double a) {
  double w = std::remainder(a, 2.0 * M_PI);
  if (w <= -M_PI) w += 2.0 * M_PI;
  return w;
}

bool ObjectParams::valid() const {
  if (!(mass > 0.0) || !(inertia_p > 0.0)) return false;
  if (!com_offset.allFinite() || !half_extents.allFinite()) return false;
  if (!(half_extents.minCoeff() > 0.0)) return false;
  return com_offset.norm() < half_extents.minCoeff();
}

bool ContactConfig::valid() const {
  constexpr double kUnitTol = 1e-12;
  if (std::abs(normal.norm() - 1.0) > kUnitTol) return false;
  if (std::abs(tangent.norm() - 1.0) > kUnitTol) return false;
  if (std::abs(normal.dot(tangent)) > kUnitTol) return false;
  return d_lower <= d_upper && standoff > 0.0;
}

VecX PlannerState::to_vector() const {
  VecX x(6 + d.size());
  x.segment<3>(0) = object.q;
  x.segment<3>(3) = object.qdot;
  x.tail(d.size()) = d;
  return x;
}

PlannerState PlannerState::from_vector(const VecX& x, int num_agents) {
  PlannerState s;
  s.object.q = x.segment<3>(0);
  s.object.qdot = x.segment<3>(3);
  s.d = x.tail(num_agents);
  return s;
}

VecX PlannerInput::to_vector() const {
  VecX u(force.size() + slide_rate.size());
  u.head(force.size()) = force;
  u.tail(slide_rate.size()) = slide_rate;
  return u;
}

PlannerInput PlannerInput::from_vector(const VecX& u, int num_agents) {
  PlannerInput in;
  in.force = u.head(num_agents);
  in.slide_rate = u.tail(num_agents);
  return in;
}

PlannerInput PlannerInput::zero(int num_agents) {
  PlannerInput in;
  in.force = VecX::Zero(num_agents);
  in.slide_rate = VecX::Zero(num_agents);
  return in;
}

}  // namespace copush
