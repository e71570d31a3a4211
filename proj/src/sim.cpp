#include "copush/sim.hpp"

#include "copush/model.hpp"

#include <stdexcept>

namespace copush {

namespace {

Vec6 pack(const ObjectState& s) {
  Vec6 y;
  y << s.q, s.qdot;
  return y;
}

ObjectState unpack(const Vec6& y) {
  ObjectState s;
  s.q = y.head<3>();
  s.qdot = y.tail<3>();
  return s;
}

Vec3 coulomb_acceleration(const ObjectState& s, const Wrench& tau,
                          const TruePlant& plant) {
  const double theta = s.heading();
  const Mat3 h = mass_matrix(plant.params, theta);
  const Mat3 c = coriolis_matrix(plant.params, theta, s.qdot.z());

  // com_offset points COM -> reference point, so the COM sits at -R*r_p.
  const Vec2 arm = -(rotation2(theta) * plant.params.com_offset);
  const Vec2 v_com = s.qdot.head<2>() + s.qdot.z() * perp(arm);
  const double speed = std::max(v_com.norm(), plant.v_stop);
  const Vec2 f_fric = -plant.mu * plant.params.mass * plant.gravity * v_com / speed;
  const double m_fric = cross2(arm, f_fric) -
                        plant.rot_friction * s.qdot.z() /
                            std::max(std::abs(s.qdot.z()), plant.v_stop);

  Vec3 rhs;
  rhs << tau.force + f_fric, tau.moment + m_fric;
  rhs -= c * s.qdot;
  return h.ldlt().solve(rhs);
}

Vec3 matched_acceleration(const ObjectState& s, const Wrench& tau,
                          const TruePlant& plant) {
  const double theta = s.heading();
  Mat3 h = mass_matrix(plant.nominal, theta);
  h(0, 0) += plant.psi_true(0);
  h(1, 1) += plant.psi_true(0);
  h(2, 2) += plant.psi_true(1);
  const Mat3 c = coriolis_matrix(plant.nominal, theta, s.qdot.z());
  const Vec3 fric(plant.psi_true(2) * smooth_sign(s.qdot.x(), plant.v_eps),
                  plant.psi_true(2) * smooth_sign(s.qdot.y(), plant.v_eps),
                  plant.psi_true(3) * smooth_sign(s.qdot.z(), plant.v_eps));
  Vec3 rhs;
  rhs << tau.force, tau.moment;
  rhs -= c * s.qdot + fric;
  return h.ldlt().solve(rhs);
}

}  // namespace

Vec6 true_dynamics(const ObjectState& state, const Wrench& tau, const TruePlant& plant) {
  Vec6 dy;
  dy.head<3>() = state.qdot;
  dy.tail<3>() = plant.kind == TruePlant::Kind::matched
                     ? matched_acceleration(state, tau, plant)
                     : coulomb_acceleration(state, tau, plant);
  return dy;
}

ObjectState integrate(const ObjectState& state, const Wrench& tau,
                      const TruePlant& plant, double dt) {
  const auto f = [&](const Vec6& y) { return true_dynamics(unpack(y), tau, plant); };
  const Vec6 y0 = pack(state);
  const Vec6 k1 = f(y0);
  const Vec6 k2 = f(y0 + 0.5 * dt * k1);
  const Vec6 k3 = f(y0 + 0.5 * dt * k2);
  const Vec6 k4 = f(y0 + dt * k3);
  return unpack(y0 + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
}

Obstacle obstacle_update(const ObstacleScript& script, double t) {
  Obstacle obs = script.base;
  obs.velocity.setZero();
  const auto& wp = script.waypoints;
  if (wp.empty()) return obs;
  if (t <= wp.front().first) {
    obs.center = wp.front().second;
    return obs;
  }
  for (size_t k = 0; k + 1 < wp.size(); ++k) {
    const auto& [t0, p0] = wp[k];
    const auto& [t1, p1] = wp[k + 1];
    if (t <= t1) {
      const double span = t1 - t0;
      if (span <= 0.0) {
        obs.center = p1;
        return obs;
      }
      const Vec2 vel = (p1 - p0) / span;
      obs.center = p0 + (t - t0) * vel;
      obs.velocity = vel;
      return obs;
    }
  }
  obs.center = wp.back().second;
  return obs;
}

AgentOutcome apply_agents(const PlannerInput& u, const VecX& d, const Limits& lim,
                          std::span<const ContactConfig> contacts, double dt) {
  const int n = static_cast<int>(contacts.size());
  AgentOutcome out;
  out.realized = PlannerInput::zero(n);
  out.d_next = d;
  for (int i = 0; i < n; ++i) {
    const ContactConfig& c = contacts[static_cast<size_t>(i)];
    out.realized.force(i) = std::clamp(u.force(i), 0.0, lim.f_max);
    out.realized.slide_rate(i) = std::clamp(u.slide_rate(i), -lim.v_max, lim.v_max);
    out.d_next(i) =
        std::clamp(d(i) + dt * out.realized.slide_rate(i), c.d_lower, c.d_upper);
  }
  return out;
}

Summary metrics(const TrajectoryLog& log) {
  if (log.ticks.empty()) {
    throw std::invalid_argument("metrics: empty trajectory log");
  }

  Summary m;
  m.success = log.success;
  m.solver_failure = log.solver_failure;
  m.time_to_goal = log.time_to_goal;
  m.ticks = static_cast<int>(log.ticks.size());
  m.duration = log.ticks.back().t;

  const TickRecord& last = log.ticks.back();
  m.final_position_error = (last.object.position() - log.goal_position).norm();
  m.final_heading_error = std::abs(wrap_angle(last.object.heading() - log.goal_theta));

  const Vec2 span = log.goal_position - log.start_position;
  const bool has_line = span.norm() > 1e-12;
  const Vec2 dir = has_line ? Vec2(span / span.norm()) : Vec2::Zero();

  double solve_sum = 0.0;
  double offset_sum = 0.0;
  for (size_t k = 0; k < log.ticks.size(); ++k) {
    const TickRecord& tick = log.ticks[k];
    if (k > 0) {
      m.path_length +=
          (tick.object.position() - log.ticks[k - 1].object.position()).norm();
    }
    if (tick.force.size() > 0) {
      m.peak_force = std::max(m.peak_force, tick.force.maxCoeff());
    }
    for (int j = 0; j < tick.barrier_object.size(); ++j) {
      m.min_object_barrier = std::min(m.min_object_barrier, tick.barrier_object(j));
    }
    for (int j = 0; j < tick.barrier_robot.size(); ++j) {
      m.min_robot_barrier = std::min(m.min_robot_barrier, tick.barrier_robot(j));
    }
    m.min_h_clf = std::min(m.min_h_clf, tick.h_clf);
    solve_sum += tick.solve_ms;
    m.max_solve_ms = std::max(m.max_solve_ms, tick.solve_ms);
    if (has_line) {
      offset_sum += cross2(dir, Vec2(tick.object.position() - log.start_position));
    }
  }
  m.mean_solve_ms = solve_sum / static_cast<double>(log.ticks.size());
  m.mean_signed_offset = offset_sum / static_cast<double>(log.ticks.size());
  return m;
}

}  // namespace copush
