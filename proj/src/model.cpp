#include "copush/model.hpp"

#include <stdexcept>

namespace copush {

namespace {

const Mat2 kSpin = (Mat2() << 0.0, -1.0, 1.0, 0.0).finished();  // +90 deg

}  // namespace

Mat2 rotation2(double theta) {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  Mat2 r;
  r << c, -s, s, c;
  return r;
}

Mat3 mass_matrix(const ObjectParams& p, double theta) {
  // Translational block m*I2, rotational inertia about p, and the coupling
  // -m*S*R*r_p from writing the equations about p instead of the COM.
  const Vec2 arm = rotation2(theta) * p.com_offset;  // p -> COM, world frame
  const Vec2 coupling = -p.mass * (kSpin * arm);
  Mat3 h = Mat3::Zero();
  h(0, 0) = h(1, 1) = p.mass;
  h(2, 2) = p.inertia_p;
  h.block<2, 1>(0, 2) = coupling;
  h.block<1, 2>(2, 0) = coupling.transpose();
  return h;
}

Mat3 coriolis_matrix(const ObjectParams& p, double theta, double theta_dot) {
  Mat3 c = Mat3::Zero();
  c.block<2, 1>(0, 2) = p.mass * theta_dot * (rotation2(theta) * p.com_offset);
  return c;
}

Mat3 mass_matrix_dtheta(const ObjectParams& p, double theta) {
  // d/dtheta of the coupling block -m*S*R*r_p; S*S = -I.
  const Vec2 d = p.mass * (rotation2(theta) * p.com_offset);
  Mat3 dh = Mat3::Zero();
  dh.block<2, 1>(0, 2) = d;
  dh.block<1, 2>(2, 0) = d.transpose();
  return dh;
}

Mat3 coriolis_matrix_dtheta(const ObjectParams& p, double theta, double theta_dot) {
  Mat3 dc = Mat3::Zero();
  dc.block<2, 1>(0, 2) =
      p.mass * theta_dot * (kSpin * (rotation2(theta) * p.com_offset));
  return dc;
}

Mat3 coriolis_matrix_dthetadot(const ObjectParams& p, double theta) {
  Mat3 dc = Mat3::Zero();
  dc.block<2, 1>(0, 2) = p.mass * (rotation2(theta) * p.com_offset);
  return dc;
}

Wrench wrench_from_inputs(const PlannerState& x, const PlannerInput& u,
                          std::span<const ContactConfig> contacts) {
  Wrench w;
  Vec2 body_force = Vec2::Zero();
  for (size_t i = 0; i < contacts.size(); ++i) {
    const Vec2 f = u.force(static_cast<int>(i)) * contacts[i].normal;
    body_force += f;
    w.moment += cross2(contacts[i].contact_point(x.d(static_cast<int>(i))), f);
  }
  w.force = rotation2(x.object.heading()) * body_force;
  return w;
}

Vec2 agent_world_position(const PlannerState& x, int i,
                          std::span<const ContactConfig> contacts) {
  const ContactConfig& c = contacts[static_cast<size_t>(i)];
  const Vec2 body = c.contact_point(x.d(i)) - c.standoff * c.normal;
  return x.object.position() + rotation2(x.object.heading()) * body;
}

double smooth_sign(double v, double v_eps) { return std::tanh(v / v_eps); }

double smooth_sign_derivative(double v, double v_eps) {
  const double t = std::tanh(v / v_eps);
  return (1.0 - t * t) / v_eps;
}

RegressorMat regressor(const Vec3& qdot_b, const Vec3& qddot_r, double v_eps) {
  RegressorMat y = RegressorMat::Zero();
  y(0, 0) = qddot_r.x();
  y(1, 0) = qddot_r.y();
  y(2, 1) = qddot_r.z();
  y(0, 2) = smooth_sign(qdot_b.x(), v_eps);
  y(1, 2) = smooth_sign(qdot_b.y(), v_eps);
  y(2, 3) = smooth_sign(qdot_b.z(), v_eps);
  return y;
}

Mat3 AdaptiveModel::effective_mass_matrix(double theta, const Vec4& psi) const {
  Mat3 h = mass_matrix(nominal, theta);
  h(0, 0) += psi(0);
  h(1, 1) += psi(0);
  h(2, 2) += psi(1);
  return h;
}

Vec3 AdaptiveModel::friction_wrench(const Vec3& qdot, const Vec4& psi) const {
  return {psi(2) * smooth_sign(qdot.x(), v_eps),
          psi(2) * smooth_sign(qdot.y(), v_eps),
          psi(3) * smooth_sign(qdot.z(), v_eps)};
}

Vec3 AdaptiveModel::object_acceleration(double theta, const Vec3& qdot,
                                        const Wrench& tau, const Vec4& psi) const {
  const Mat3 h = effective_mass_matrix(theta, psi);
  if (std::abs(h.determinant()) < 1e-12) {
    throw std::domain_error("adaptive model: singular effective inertia matrix");
  }
  const Mat3 c = coriolis_matrix(nominal, theta, qdot.z());
  Vec3 rhs;
  rhs << tau.force, tau.moment;
  rhs -= c * qdot + friction_wrench(qdot, psi);
  return h.inverse() * rhs;
}

VecX AdaptiveModel::dynamics(const VecX& x, const VecX& u, const Vec4& psi) const {
  const PlannerState state = unpack_state(x);
  const PlannerInput input = unpack_input(u);
  const Wrench tau = wrench_from_inputs(state, input, contacts);

  VecX xdot(state_dim());
  xdot.segment<3>(0) = state.object.qdot;
  xdot.segment<3>(3) =
      object_acceleration(state.object.heading(), state.object.qdot, tau, psi);
  xdot.tail(num_agents()) = input.slide_rate;
  return xdot;
}

void AdaptiveModel::dynamics_jacobians(const VecX& x, const VecX& u, const Vec4& psi,
                                       MatX& dfdx, MatX& dfdu) const {
  const int n = num_agents();
  const int nx = state_dim();
  const int nu = input_dim();
  const PlannerState state = unpack_state(x);
  const PlannerInput input = unpack_input(u);
  const double theta = state.object.heading();
  const Vec3 qdot = state.object.qdot;

  dfdx = MatX::Zero(nx, nx);
  dfdu = MatX::Zero(nx, nu);

  // qdot rows.
  dfdx.block<3, 3>(0, 3).setIdentity();

  const Mat2 rot = rotation2(theta);
  const Mat3 h = effective_mass_matrix(theta, psi);
  if (std::abs(h.determinant()) < 1e-12) {
    throw std::domain_error("adaptive model: singular effective inertia matrix");
  }
  const Mat3 h_inv = h.inverse();
  const Wrench tau = wrench_from_inputs(state, input, contacts);
  const Vec3 qddot = object_acceleration(theta, qdot, tau, psi);

  Vec2 body_force = Vec2::Zero();
  for (int i = 0; i < n; ++i) body_force += input.force(i) * contacts[static_cast<size_t>(i)].normal;

  // d(wrench)/d(theta): only the world-frame force rotates.
  Vec3 dw_dtheta = Vec3::Zero();
  dw_dtheta.head<2>() = kSpin * (rot * body_force);

  // qddot rows, state columns.
  const Vec3 dcor_dtheta = coriolis_matrix_dtheta(nominal, theta, qdot.z()) * qdot;
  dfdx.block<3, 1>(3, 2) =
      h_inv * (dw_dtheta - dcor_dtheta - mass_matrix_dtheta(nominal, theta) * qddot);
  Mat3 dfric_dqdot = Mat3::Zero();
  dfric_dqdot(0, 0) = psi(2) * smooth_sign_derivative(qdot.x(), v_eps);
  dfric_dqdot(1, 1) = psi(2) * smooth_sign_derivative(qdot.y(), v_eps);
  dfric_dqdot(2, 2) = psi(3) * smooth_sign_derivative(qdot.z(), v_eps);
  Mat3 dcor_dqdot = coriolis_matrix(nominal, theta, qdot.z());
  dcor_dqdot.col(2) += coriolis_matrix_dthetadot(nominal, theta) * qdot;
  dfdx.block<3, 3>(3, 3) -= h_inv * (dcor_dqdot + dfric_dqdot);

  for (int i = 0; i < n; ++i) {
    const ContactConfig& c = contacts[static_cast<size_t>(i)];
    // Moment sensitivity to the slide coordinate.
    Vec3 dw_dd = Vec3::Zero();
    dw_dd.z() = input.force(i) * cross2(c.tangent, c.normal);
    dfdx.block<3, 1>(3, 6 + i) = h_inv * dw_dd;

    // Wrench column of one unit of contact force.
    Vec3 dw_df;
    dw_df.head<2>() = rot * c.normal;
    dw_df.z() = cross2(c.contact_point(state.d(i)), c.normal);
    dfdu.block<3, 1>(3, i) = h_inv * dw_df;

    // Slide rates pass through.
    dfdu(6 + i, n + i) = 1.0;
  }
}

}  // namespace copush
