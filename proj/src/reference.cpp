#include "copush/reference.hpp"

namespace copush {

double time_to_goal(const ObjectState& x, const Goal& g) {
  const double t_v = (x.position() - g.position).norm() / g.v_avg;
  const double t_w = std::abs(wrap_angle(g.theta - x.heading())) / g.omega_avg;
  return std::max(t_v, t_w);
}

std::vector<RefPoint> subgoals(const ObjectState& x, const Goal& g, double dt,
                               int horizon_steps) {
  const double t_avg = time_to_goal(x, g);
  const Vec2 start = x.position();
  const Vec2 delta_p = g.position - start;
  const double delta_theta = wrap_angle(g.theta - x.heading());
  const double theta_goal = x.heading() + delta_theta;

  std::vector<RefPoint> refs(static_cast<size_t>(horizon_steps) + 1);
  if (t_avg <= 0.0) {
    for (auto& r : refs) {
      r.q << g.position, theta_goal;
      r.qdot.setZero();
    }
    return refs;
  }

  const Vec2 vel_p = delta_p / t_avg;
  const double vel_theta = delta_theta / t_avg;
  for (int k = 0; k <= horizon_steps; ++k) {
    const double t = k * dt;
    auto& r = refs[static_cast<size_t>(k)];
    if (t < t_avg) {
      r.q << start + t * vel_p, x.heading() + t * vel_theta;
      r.qdot << vel_p, vel_theta;
    } else {
      r.q << g.position, theta_goal;
      r.qdot.setZero();
    }
  }
  return refs;
}

}  // namespace copush
