#pragma once

#include "copush/types.hpp"

#include <vector>

namespace copush {

/// User goal pose with the average rates used to pace the reference.
struct Goal {
  Vec2 position = Vec2::Zero();
  double theta = 0.0;
  double v_avg = 0.5;      // m/s
  double omega_avg = 0.8;  // rad/s

  bool valid() const { return v_avg > 0.0 && omega_avg > 0.0; }
};

/// Estimated time to reach the goal at the average rates: translation and
/// rotation are paced independently and the slower one governs.
double time_to_goal(const ObjectState& x, const Goal& g);

struct RefPoint {
  Vec3 q = Vec3::Zero();
  Vec3 qdot = Vec3::Zero();
};

/// Subgoal trajectory over the planning horizon: straight-line position and
/// shortest-arc heading from the current state toward the goal, both paced to
/// arrive together, clamped at the goal afterwards. Returns horizon_steps + 1
/// samples spaced dt apart; velocities are the segment slopes (zero once the
/// goal is reached).
std::vector<RefPoint> subgoals(const ObjectState& x, const Goal& g, double dt,
                               int horizon_steps);

}  // namespace copush
