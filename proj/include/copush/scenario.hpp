#pragma once

#include "copush/adaptive.hpp"
#include "copush/nmpc.hpp"
#include "copush/reference.hpp"
#include "copush/sim.hpp"
#include "copush/types.hpp"

#include <string>
#include <vector>

namespace copush {

struct AgentSpec {
  ContactConfig contact;
  double d_init = 0.0;
};

struct SimSettings {
  double dt = 1e-3;
  double time_limit = 120.0;
  double control_hz = 50.0;
  double success_pos_tol = 0.1;
  double success_theta_tol = 0.1;
  double success_hold = 1.0;
  // Every refresh_ticks control steps a cold-started solve competes with the
  // warm-shifted one; the cheaper solution wins. Keeps the receding-horizon
  // chain from staying committed to a stale local basin. 0 disables.
  int refresh_ticks = 0;
};

struct AblationFlags {
  bool adaptive_enabled = true;
  bool robot_cbf_enabled = true;
};

/// Complete description of one closed-loop run.
struct Scenario {
  int schema_version = 1;
  std::string name;

  ObjectParams nominal;  // planner-side model, COM at the reference point
  TruePlant plant;       // simulator-side truth

  std::vector<AgentSpec> agents;
  std::vector<ObstacleScript> obstacles;
  Goal goal;

  OcpWeights weights;
  PenaltyParams pen_cbf{0.8, 0.5};
  PenaltyParams pen_clf{1.0, 0.5};
  PenaltyParams pen_bound{0.1, 0.01};
  CbfGains gains;
  Limits limits;
  double lambda = 3.0;
  Vec3 k_d_diag = Vec3(3.0, 3.0, 3.0);
  UncertaintyEstimate uncertainty;
  double v_eps = 0.01;

  SolverSettings solver;
  SimSettings sim;
  ObjectState initial;
  AblationFlags ablation;

  int num_agents() const { return static_cast<int>(agents.size()); }

  /// Planner model assembled from the nominal parameters and contacts.
  AdaptiveModel planner_model() const;

  /// Planner setup at a given set of current obstacle states.
  MpcSetup mpc_setup(const std::vector<Obstacle>& current_obstacles) const;
};

/// Parses and validates a scenario file. Defaults are applied for omitted
/// gains and weights. Throws std::runtime_error with the offending field name
/// on malformed or invalid input.
Scenario parse_scenario(const std::string& path);
Scenario parse_scenario_text(const std::string& text, const std::string& origin);

/// Serializes a scenario back to its file form (stable key order).
std::string serialize_scenario(const Scenario& s);

/// Validates invariants (gain roots, radii, limits...); throws on violation.
void validate_scenario(const Scenario& s);

}  // namespace copush
