#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <span>
#include <vector>

namespace copush {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;
using RegressorMat = Eigen::Matrix<double, 3, 4>;

/// z component of the planar cross product a x b.
inline double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

/// Rotates a planar vector by +90 degrees.
inline Vec2 perp(const Vec2& v) { return {-v.y(), v.x()}; }

/// Wraps an angle to (-pi, pi].
double wrap_angle(double a);

/// Inertial properties of the manipulated object, written about the body
/// reference point p (not the center of mass).
struct ObjectParams {
  double mass = 1.0;       // kg
  double inertia_p = 1.0;  // kg m^2, about p
  // Body-frame vector COM -> p: the COM sits at -com_offset relative to the
  // reference point. Matches the coupling blocks of the inertia matrix.
  Vec2 com_offset = Vec2::Zero();
  Vec2 half_extents = Vec2::Ones();  // rectangular footprint

  bool valid() const;
};

/// Planar pose and twist of the object; q = (x_p, y_p, theta).
/// theta accumulates continuously within a run (no modular jumps).
struct ObjectState {
  Vec3 q = Vec3::Zero();
  Vec3 qdot = Vec3::Zero();

  Vec2 position() const { return q.head<2>(); }
  double heading() const { return q.z(); }
};

/// Contact frame of one agent on the object boundary, body coordinates.
/// The agent pushes along `normal` (into the object) and slides along
/// `tangent`; the slide coordinate d is measured from `origin`.
struct ContactConfig {
  Vec2 origin = Vec2::Zero();
  Vec2 normal = Vec2::UnitX();
  Vec2 tangent = Vec2::UnitY();
  double d_lower = -1.0;
  double d_upper = 1.0;
  double standoff = 0.35;  // contact point -> agent body center, along -normal

  bool valid() const;

  /// Contact point in body coordinates at slide coordinate d.
  Vec2 contact_point(double d) const { return origin + d * tangent; }
};

/// Planner state: object pose/twist plus one slide coordinate per agent.
struct PlannerState {
  ObjectState object;
  VecX d;

  VecX to_vector() const;
  static PlannerState from_vector(const VecX& x, int num_agents);
};

/// Planner input: one force magnitude and one slide rate per agent.
struct PlannerInput {
  VecX force;
  VecX slide_rate;

  VecX to_vector() const;
  static PlannerInput from_vector(const VecX& u, int num_agents);
  static PlannerInput zero(int num_agents);
};

/// World-frame force and moment about the reference point.
struct Wrench {
  Vec2 force = Vec2::Zero();
  double moment = 0.0;
};

/// Actuation limits shared by all agents.
struct Limits {
  double f_max = 40.0;  // N
  double v_max = 1.0;   // m/s slide rate
};

}  // namespace copush
