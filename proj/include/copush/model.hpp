#pragma once

#include "copush/types.hpp"

namespace copush {

/// Planar rotation matrix, body to world.
Mat2 rotation2(double theta);

/// Inertia matrix H(theta) of the object about the reference point.
Mat3 mass_matrix(const ObjectParams& p, double theta);

/// Velocity-product matrix C(theta, theta_dot); C*qdot reproduces the
/// centripetal terms of the translational equation.
Mat3 coriolis_matrix(const ObjectParams& p, double theta, double theta_dot);

/// Partial derivatives used by the constraint and dynamics Jacobians.
Mat3 mass_matrix_dtheta(const ObjectParams& p, double theta);
Mat3 coriolis_matrix_dtheta(const ObjectParams& p, double theta, double theta_dot);
Mat3 coriolis_matrix_dthetadot(const ObjectParams& p, double theta);

/// World-frame wrench about the reference point produced by the contact
/// forces: F = R(theta) * sum f_i n_i, M = sum (r_i,o + d_i t_i) x (f_i n_i).
Wrench wrench_from_inputs(const PlannerState& x, const PlannerInput& u,
                          std::span<const ContactConfig> contacts);

/// World position of agent i's body center: the contact point offset by the
/// standoff along the outward normal.
Vec2 agent_world_position(const PlannerState& x, int i,
                          std::span<const ContactConfig> contacts);

/// Smoothed sign tanh(v / v_eps) and its derivative.
double smooth_sign(double v, double v_eps);
double smooth_sign_derivative(double v, double v_eps);

/// Regressor of the parameterized model error, evaluated at the reference
/// acceleration. Columns weight (mass error, inertia error, translational
/// friction, rotational friction).
RegressorMat regressor(const Vec3& qdot_b, const Vec3& qddot_r, double v_eps);

/// Nominal object model augmented with the adapted error parameterization.
/// State layout x = [q(3); qdot(3); d(N)], input layout u = [f(N); ddot(N)].
struct AdaptiveModel {
  ObjectParams nominal;  // com_offset zero in the default configuration
  std::vector<ContactConfig> contacts;
  double v_eps = 0.01;

  int num_agents() const { return static_cast<int>(contacts.size()); }
  int state_dim() const { return 6 + num_agents(); }
  int input_dim() const { return 2 * num_agents(); }

  PlannerState unpack_state(const VecX& x) const { return PlannerState::from_vector(x, num_agents()); }
  PlannerInput unpack_input(const VecX& u) const { return PlannerInput::from_vector(u, num_agents()); }

  /// Nominal inertia plus the adapted mass/inertia corrections. The mass and
  /// inertia error columns of the regressor multiply the acceleration, so
  /// they fold into the inertia matrix of the adapted dynamics.
  Mat3 effective_mass_matrix(double theta, const Vec4& psi) const;

  /// Adapted friction wrench for the current velocity.
  Vec3 friction_wrench(const Vec3& qdot, const Vec4& psi) const;

  /// Object acceleration under world wrench tau.
  /// Throws std::domain_error if the effective inertia is singular.
  Vec3 object_acceleration(double theta, const Vec3& qdot, const Wrench& tau,
                           const Vec4& psi) const;

  /// Continuous-time xdot of the adapted planner dynamics.
  VecX dynamics(const VecX& x, const VecX& u, const Vec4& psi) const;

  /// Analytic d(xdot)/dx and d(xdot)/du.
  void dynamics_jacobians(const VecX& x, const VecX& u, const Vec4& psi,
                          MatX& dfdx, MatX& dfdu) const;
};

}  // namespace copush
