#pragma once

#include "copush/safety.hpp"
#include "copush/types.hpp"

#include <limits>
#include <utility>
#include <vector>

namespace copush {

/// Ground-truth plant. `coulomb` applies regularized Coulomb friction at the
/// true COM; `matched` runs the nominal model plus the regressor error for a
/// fixed parameter vector (used by the adaptation regression tests).
struct TruePlant {
  enum class Kind { coulomb, matched };
  Kind kind = Kind::coulomb;

  ObjectParams params;  // true mass, inertia, COM offset
  double mu = 0.4;
  double rot_friction = 0.0;  // N m, rotational resistance scale
  double gravity = 9.81;
  double v_stop = 0.01;  // m/s, static-friction velocity threshold

  ObjectParams nominal;  // matched plant only
  Vec4 psi_true = Vec4::Zero();
  double v_eps = 0.01;
};

/// Time derivative of (q, qdot) under the applied wrench.
Vec6 true_dynamics(const ObjectState& state, const Wrench& tau, const TruePlant& plant);

/// One classical RK4 step with the wrench held constant.
ObjectState integrate(const ObjectState& state, const Wrench& tau,
                      const TruePlant& plant, double dt);

/// Obstacle with an optional piecewise-linear waypoint script (t, position).
struct ObstacleScript {
  Obstacle base;
  std::vector<std::pair<double, Vec2>> waypoints;
};

/// Obstacle state at time t: interpolated position, segment-slope velocity,
/// clamped to the script endpoints.
Obstacle obstacle_update(const ObstacleScript& script, double t);

/// Saturated actuation: forces clamped to [0, f_max], slide rates to
/// [-v_max, v_max], slide coordinates advanced by dt and kept in range.
struct AgentOutcome {
  PlannerInput realized;
  VecX d_next;
};
AgentOutcome apply_agents(const PlannerInput& u, const VecX& d, const Limits& lim,
                          std::span<const ContactConfig> contacts, double dt);

/// One control-period sample of the closed loop.
struct TickRecord {
  double t = 0.0;
  ObjectState object;
  VecX d;
  VecX force;       // realized, clamped
  VecX slide_rate;  // realized, clamped
  VecX barrier_object;  // per obstacle
  VecX barrier_robot;   // agent-major: index i * num_obstacles + j
  double h_clf = 0.0;
  Vec4 psi = Vec4::Zero();
  Vec3 s = Vec3::Zero();
  double lyapunov_proxy = 0.0;  // s' * H_nominal * s / 2
  int sqp_iters = 0;
  double merit = 0.0;
  double kkt_residual = 0.0;
  double solve_ms = 0.0;
  bool solver_ok = true;
};

struct TrajectoryLog {
  int num_agents = 0;
  int num_obstacles = 0;
  double control_period = 0.02;
  Vec2 start_position = Vec2::Zero();
  Vec2 goal_position = Vec2::Zero();
  double goal_theta = 0.0;
  std::vector<TickRecord> ticks;
  bool success = false;
  bool solver_failure = false;
  double time_to_goal = std::numeric_limits<double>::quiet_NaN();
};

/// Aggregate run metrics.
struct Summary {
  bool success = false;
  bool solver_failure = false;
  double duration = 0.0;
  double time_to_goal = std::numeric_limits<double>::quiet_NaN();
  double final_position_error = 0.0;
  double final_heading_error = 0.0;
  double path_length = 0.0;
  double peak_force = 0.0;
  double mean_solve_ms = 0.0;
  double max_solve_ms = 0.0;
  double min_object_barrier = std::numeric_limits<double>::infinity();
  double min_robot_barrier = std::numeric_limits<double>::infinity();
  double min_h_clf = std::numeric_limits<double>::infinity();
  double mean_signed_offset = 0.0;  // mean lateral offset from the start-goal line
  int ticks = 0;
};

/// Throws std::invalid_argument on an empty log.
Summary metrics(const TrajectoryLog& log);

}  // namespace copush
