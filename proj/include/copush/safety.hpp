#pragma once

#include "copush/adaptive.hpp"
#include "copush/model.hpp"
#include "copush/types.hpp"

namespace copush {

/// Spherical obstacle with separate barrier radii for the object and for the
/// agent bodies. `velocity` is the constant-velocity prediction used inside
/// the planning horizon (zero for static obstacles).
struct Obstacle {
  Vec2 center = Vec2::Zero();
  Vec2 velocity = Vec2::Zero();
  double radius_object = 1.0;
  double radius_robot = 1.0;

  bool valid() const { return radius_object > 0.0 && radius_robot > 0.0; }

  /// Constant-velocity extrapolation ahead of the evaluation time.
  Obstacle predicted(double dt) const {
    Obstacle o = *this;
    o.center += dt * velocity;
    return o;
  }
};

/// Rate coefficients of the barrier conditions. The degree-2 object condition
/// Bddot + beta*Bdot + alpha*B >= 0 needs negative real characteristic roots.
struct CbfGains {
  double alpha_object = 4.0;
  double beta_object = 4.0;
  double alpha_robot = 4.0;

  bool valid() const {
    return alpha_object > 0.0 && beta_object > 0.0 &&
           beta_object * beta_object >= 4.0 * alpha_object && alpha_robot > 0.0;
  }
};

/// Relaxed log-barrier parameters: cost scale and relaxation threshold.
struct PenaltyParams {
  double rho = 1.0;
  double eps = 0.5;

  bool valid() const { return rho > 0.0 && eps > 0.0; }
};

/// Distance of the object reference point to the obstacle's barrier sphere.
double object_barrier(const VecX& x, const Obstacle& obs);

/// Distance of agent i's body center to the obstacle's barrier sphere.
double robot_barrier(const VecX& x, int i, const Obstacle& obs,
                     std::span<const ContactConfig> contacts);

struct BarrierValue {
  double b = 0.0;
  VecX db_dx;
};

/// Barrier distances with state gradients (used by the terminal safety cost).
BarrierValue object_barrier_grad(const VecX& x, const Obstacle& obs, int state_dim);
BarrierValue robot_barrier_grad(const VecX& x, int i, const Obstacle& obs,
                                std::span<const ContactConfig> contacts);

/// Constraint value with gradients in the planner state/input coordinates.
struct ConstraintValue {
  double h = 0.0;
  VecX dh_dx;
  VecX dh_du;
};

/// Degree-2 barrier condition for object-obstacle clearance. Affine in u
/// through the acceleration of the adapted dynamics.
/// Throws std::domain_error if the object sits on the obstacle center.
double ecbf_object(const AdaptiveModel& model, const VecX& x, const VecX& u,
                   const Vec4& psi, const Obstacle& obs, const CbfGains& gains);
ConstraintValue ecbf_object_grad(const AdaptiveModel& model, const VecX& x,
                                 const VecX& u, const Vec4& psi, const Obstacle& obs,
                                 const CbfGains& gains);

/// Degree-1 barrier condition for agent-obstacle clearance; the slide rate
/// enters directly.
double cbf_robot(const AdaptiveModel& model, const VecX& x, const VecX& u, int i,
                 const Obstacle& obs, const CbfGains& gains);
ConstraintValue cbf_robot_grad(const AdaptiveModel& model, const VecX& x,
                               const VecX& u, int i, const Obstacle& obs,
                               const CbfGains& gains);

/// Stability constraint: positive when the commanded wrench certifies decrease
/// of the tracking Lyapunov function at rate s'*K_D*s / 2.
double clf_constraint(const AdaptiveModel& model, const VecX& x, const VecX& u,
                      const Vec4& psi, const TrackingReference& ref, const Mat3& k_d);
ConstraintValue clf_constraint_grad(const AdaptiveModel& model, const VecX& x,
                                    const VecX& u, const Vec4& psi,
                                    const TrackingReference& ref, const Mat3& k_d);

/// Box constraints, six per agent:
/// [f_i, f_max - f_i, d_i - d_lower, d_upper - d_i, v_max - ddot_i, v_max + ddot_i].
VecX bound_constraints(const VecX& x, const VecX& u, const Limits& lim,
                       std::span<const ContactConfig> contacts);

/// Relaxed log-barrier penalty: -rho*ln(h) for h >= eps, quadratic
/// continuation below. Value, first, and second derivative.
struct PenaltyEval {
  double value = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
};
PenaltyEval penalty(double h, const PenaltyParams& p);

}  // namespace copush
