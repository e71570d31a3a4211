#include "copush/safety.hpp"

#include <stdexcept>

namespace copush {

namespace {

constexpr double kDegenerateDistance = 1e-9;

const Mat2 kSpin = (Mat2() << 0.0, -1.0, 1.0, 0.0).finished();

struct RadialGeometry {
  Vec2 r;     // point -> obstacle center
  double rho = 0.0;
  Vec2 rhat;
  Mat2 proj;  // (I - rhat*rhat') / rho
};

RadialGeometry radial_geometry(const Vec2& point, const Vec2& center) {
  RadialGeometry g;
  g.r = center - point;
  g.rho = g.r.norm();
  if (g.rho < kDegenerateDistance) {
    throw std::domain_error("barrier: point coincides with obstacle center");
  }
  g.rhat = g.r / g.rho;
  g.proj = (Mat2::Identity() - g.rhat * g.rhat.transpose()) / g.rho;
  return g;
}

}  // namespace

double object_barrier(const VecX& x, const Obstacle& obs) {
  return (obs.center - x.head<2>()).norm() - obs.radius_object;
}

double robot_barrier(const VecX& x, int i, const Obstacle& obs,
                     std::span<const ContactConfig> contacts) {
  const PlannerState s = PlannerState::from_vector(x, static_cast<int>(contacts.size()));
  return (obs.center - agent_world_position(s, i, contacts)).norm() - obs.radius_robot;
}

BarrierValue object_barrier_grad(const VecX& x, const Obstacle& obs, int state_dim) {
  const RadialGeometry g = radial_geometry(x.head<2>(), obs.center);
  BarrierValue out;
  out.b = g.rho - obs.radius_object;
  out.db_dx = VecX::Zero(state_dim);
  out.db_dx.head<2>() = -g.rhat;
  return out;
}

BarrierValue robot_barrier_grad(const VecX& x, int i, const Obstacle& obs,
                                std::span<const ContactConfig> contacts) {
  const int n = static_cast<int>(contacts.size());
  const ContactConfig& c = contacts[static_cast<size_t>(i)];
  const Mat2 rot = rotation2(x(2));
  const Vec2 body = c.contact_point(x(6 + i)) - c.standoff * c.normal;
  const Vec2 world_arm = rot * body;
  const RadialGeometry g = radial_geometry(Vec2(x.head<2>() + world_arm), obs.center);

  BarrierValue out;
  out.b = g.rho - obs.radius_robot;
  out.db_dx = VecX::Zero(6 + n);
  out.db_dx.head<2>() = -g.rhat;
  out.db_dx(2) = -g.rhat.dot(perp(world_arm));
  out.db_dx(6 + i) = -g.rhat.dot(rot * c.tangent);
  return out;
}

double ecbf_object(const AdaptiveModel& model, const VecX& x, const VecX& u,
                   const Vec4& psi, const Obstacle& obs, const CbfGains& gains) {
  const RadialGeometry g = radial_geometry(x.head<2>(), obs.center);
  const Vec2 v_rel = obs.velocity - x.segment<2>(3);
  const double b = g.rho - obs.radius_object;
  const double bdot = g.rhat.dot(v_rel);
  const VecX xdot = model.dynamics(x, u, psi);
  const double curvature = (v_rel.squaredNorm() - bdot * bdot) / g.rho;
  const double bddot = curvature - g.rhat.dot(xdot.segment<2>(3));
  return bddot + gains.beta_object * bdot + gains.alpha_object * b;
}

ConstraintValue ecbf_object_grad(const AdaptiveModel& model, const VecX& x,
                                 const VecX& u, const Vec4& psi, const Obstacle& obs,
                                 const CbfGains& gains) {
  const int nx = model.state_dim();
  const int nu = model.input_dim();
  const RadialGeometry g = radial_geometry(x.head<2>(), obs.center);
  const Vec2 v_rel = obs.velocity - x.segment<2>(3);
  const double b = g.rho - obs.radius_object;
  const double bdot = g.rhat.dot(v_rel);

  const VecX xdot = model.dynamics(x, u, psi);
  MatX dfdx, dfdu;
  model.dynamics_jacobians(x, u, psi, dfdx, dfdu);
  const Vec2 accel = xdot.segment<2>(3);
  const double curvature = (v_rel.squaredNorm() - bdot * bdot) / g.rho;

  ConstraintValue out;
  out.h = curvature - g.rhat.dot(accel) + gains.beta_object * bdot +
          gains.alpha_object * b;
  out.dh_dx = VecX::Zero(nx);
  out.dh_du = VecX::Zero(nu);

  const Vec2 proj_v = g.proj * v_rel;
  // Direct geometric terms in position and velocity.
  out.dh_dx.head<2>() += -gains.alpha_object * g.rhat - gains.beta_object * proj_v +
                         (2.0 * bdot * proj_v + curvature * g.rhat) / g.rho +
                         g.proj * accel;
  out.dh_dx.segment<2>(3) += -gains.beta_object * g.rhat - 2.0 * proj_v;

  // Acceleration terms through the adapted dynamics.
  out.dh_dx -= dfdx.block(3, 0, 2, nx).transpose() * g.rhat;
  out.dh_du -= dfdu.block(3, 0, 2, nu).transpose() * g.rhat;
  return out;
}

namespace {

struct RobotBarrierGeometry {
  RadialGeometry g;
  Vec2 world_arm;     // object point -> agent center, world frame
  Vec2 tangent_world;
  Vec2 center_dot;    // agent center velocity
  Vec2 v_rel;
};

RobotBarrierGeometry robot_geometry(const AdaptiveModel& model, const VecX& x,
                                    const VecX& u, int i, const Obstacle& obs) {
  const ContactConfig& c = model.contacts[static_cast<size_t>(i)];
  const int n = model.num_agents();
  const double theta = x(2);
  const Mat2 rot = rotation2(theta);

  RobotBarrierGeometry rg;
  const Vec2 body = c.contact_point(x(6 + i)) - c.standoff * c.normal;
  rg.world_arm = rot * body;
  rg.tangent_world = rot * c.tangent;
  const Vec2 center = x.head<2>() + rg.world_arm;
  rg.g = radial_geometry(center, obs.center);
  rg.center_dot = x.segment<2>(3) + x(5) * perp(rg.world_arm) +
                  u(n + i) * rg.tangent_world;
  rg.v_rel = obs.velocity - rg.center_dot;
  return rg;
}

}  // namespace

double cbf_robot(const AdaptiveModel& model, const VecX& x, const VecX& u, int i,
                 const Obstacle& obs, const CbfGains& gains) {
  const RobotBarrierGeometry rg = robot_geometry(model, x, u, i, obs);
  const double b = rg.g.rho - obs.radius_robot;
  return rg.g.rhat.dot(rg.v_rel) + gains.alpha_robot * b;
}

ConstraintValue cbf_robot_grad(const AdaptiveModel& model, const VecX& x,
                               const VecX& u, int i, const Obstacle& obs,
                               const CbfGains& gains) {
  const int nx = model.state_dim();
  const int nu = model.input_dim();
  const int n = model.num_agents();
  const RobotBarrierGeometry rg = robot_geometry(model, x, u, i, obs);
  const double b = rg.g.rho - obs.radius_robot;
  const double thetadot = x(5);
  const double slide_rate = u(n + i);

  ConstraintValue out;
  out.h = rg.g.rhat.dot(rg.v_rel) + gains.alpha_robot * b;
  out.dh_dx = VecX::Zero(nx);
  out.dh_du = VecX::Zero(nu);

  const Vec2 proj_v = rg.g.proj * rg.v_rel;
  // Sensitivities of the agent center and its velocity.
  const Vec2 dc_dtheta = perp(rg.world_arm);
  const Vec2 dc_dd = rg.tangent_world;
  const Vec2 dcdot_dtheta =
      -thetadot * rg.world_arm + slide_rate * perp(rg.tangent_world);
  const Vec2 dcdot_dd = thetadot * perp(rg.tangent_world);

  auto center_term = [&](const Vec2& dc) {
    return -gains.alpha_robot * rg.g.rhat.dot(dc) - proj_v.dot(dc);
  };

  out.dh_dx.head<2>() = -gains.alpha_robot * rg.g.rhat - proj_v;
  out.dh_dx(2) = center_term(dc_dtheta) - rg.g.rhat.dot(dcdot_dtheta);
  out.dh_dx.segment<2>(3) = -rg.g.rhat;
  out.dh_dx(5) = -rg.g.rhat.dot(dc_dtheta);
  out.dh_dx(6 + i) = center_term(dc_dd) - rg.g.rhat.dot(dcdot_dd);
  out.dh_du(n + i) = -rg.g.rhat.dot(rg.tangent_world);
  return out;
}

namespace {

struct ClfTerms {
  Vec3 s;
  Vec3 qdot_r;
  Vec3 qddot_r;
  Vec3 b;  // -tau + H*qddot_r + C*qdot_r + Y*psi
};

ClfTerms clf_terms(const AdaptiveModel& model, const VecX& x, const VecX& u,
                   const Vec4& psi, const TrackingReference& ref) {
  const PlannerState state = PlannerState::from_vector(x, model.num_agents());
  const PlannerInput input = PlannerInput::from_vector(u, model.num_agents());

  ClfTerms t;
  t.s = composite_error(state.object, ref);
  const ReferenceMotion rm = reference_motion(state.object, ref);
  t.qdot_r = rm.qdot_r;
  t.qddot_r = rm.qddot_r;

  const double theta = state.object.heading();
  const Wrench tau = wrench_from_inputs(state, input, model.contacts);
  Vec3 tau_vec;
  tau_vec << tau.force, tau.moment;
  t.b = -tau_vec + mass_matrix(model.nominal, theta) * t.qddot_r +
        coriolis_matrix(model.nominal, theta, state.object.qdot.z()) * t.qdot_r +
        regressor(state.object.qdot, t.qddot_r, model.v_eps) * psi;
  return t;
}

}  // namespace

double clf_constraint(const AdaptiveModel& model, const VecX& x, const VecX& u,
                      const Vec4& psi, const TrackingReference& ref, const Mat3& k_d) {
  const ClfTerms t = clf_terms(model, x, u, psi, ref);
  return t.s.dot(t.b) - 0.5 * t.s.dot(k_d * t.s);
}

ConstraintValue clf_constraint_grad(const AdaptiveModel& model, const VecX& x,
                                    const VecX& u, const Vec4& psi,
                                    const TrackingReference& ref, const Mat3& k_d) {
  const int nx = model.state_dim();
  const int nu = model.input_dim();
  const int n = model.num_agents();
  const ClfTerms t = clf_terms(model, x, u, psi, ref);
  const double theta = x(2);
  const double thetadot = x(5);
  const Mat2 rot = rotation2(theta);
  const double lambda = ref.lambda;

  ConstraintValue out;
  out.h = t.s.dot(t.b) - 0.5 * t.s.dot(k_d * t.s);
  out.dh_dx = VecX::Zero(nx);
  out.dh_du = VecX::Zero(nu);

  // d s / dq = lambda*I, d s / dqdot = I; K_D is symmetric.
  const Vec3 s_weight = t.b - k_d * t.s;

  // Partials of b.
  Vec2 body_force = Vec2::Zero();
  for (int i = 0; i < n; ++i) {
    body_force += u(i) * model.contacts[static_cast<size_t>(i)].normal;
  }
  Vec3 dtau_dtheta = Vec3::Zero();
  dtau_dtheta.head<2>() = kSpin * (rot * body_force);

  const Mat3 cor = coriolis_matrix(model.nominal, theta, thetadot);
  Mat3 db_dq = -lambda * cor;  // qdot_r depends on q
  db_dq.col(2) += mass_matrix_dtheta(model.nominal, theta) * t.qddot_r +
                  coriolis_matrix_dtheta(model.nominal, theta, thetadot) * t.qdot_r -
                  dtau_dtheta;

  // qddot_r depends on qdot; friction columns of the regressor depend on qdot.
  Mat3 db_dqdot = -lambda * mass_matrix(model.nominal, theta);
  db_dqdot(0, 0) += -lambda * psi(0) + psi(2) * smooth_sign_derivative(x(3), model.v_eps);
  db_dqdot(1, 1) += -lambda * psi(0) + psi(2) * smooth_sign_derivative(x(4), model.v_eps);
  db_dqdot(2, 2) += -lambda * psi(1) + psi(3) * smooth_sign_derivative(x(5), model.v_eps);
  db_dqdot.col(2) += coriolis_matrix_dthetadot(model.nominal, theta) * t.qdot_r;

  out.dh_dx.segment<3>(0) = lambda * s_weight + db_dq.transpose() * t.s;
  out.dh_dx.segment<3>(3) = s_weight + db_dqdot.transpose() * t.s;

  for (int i = 0; i < n; ++i) {
    const ContactConfig& c = model.contacts[static_cast<size_t>(i)];
    out.dh_dx(6 + i) = -t.s.z() * u(i) * cross2(c.tangent, c.normal);
    Vec3 dtau_df;
    dtau_df.head<2>() = rot * c.normal;
    dtau_df.z() = cross2(c.contact_point(x(6 + i)), c.normal);
    out.dh_du(i) = -t.s.dot(dtau_df);
  }
  return out;
}

VecX bound_constraints(const VecX& x, const VecX& u, const Limits& lim,
                       std::span<const ContactConfig> contacts) {
  const int n = static_cast<int>(contacts.size());
  VecX h(6 * n);
  for (int i = 0; i < n; ++i) {
    const ContactConfig& c = contacts[static_cast<size_t>(i)];
    h(6 * i + 0) = u(i);
    h(6 * i + 1) = lim.f_max - u(i);
    h(6 * i + 2) = x(6 + i) - c.d_lower;
    h(6 * i + 3) = c.d_upper - x(6 + i);
    h(6 * i + 4) = lim.v_max - u(n + i);
    h(6 * i + 5) = lim.v_max + u(n + i);
  }
  return h;
}

PenaltyEval penalty(double h, const PenaltyParams& p) {
  PenaltyEval e;
  if (h >= p.eps) {
    e.value = -p.rho * std::log(h);
    e.d1 = -p.rho / h;
    e.d2 = p.rho / (h * h);
  } else {
    const double z = (h - 2.0 * p.eps) / p.eps;
    e.value = 0.5 * p.rho * (z * z - 1.0) - p.rho * std::log(p.eps);
    e.d1 = p.rho * z / p.eps;
    e.d2 = p.rho / (p.eps * p.eps);
  }
  return e;
}

}  // namespace copush
