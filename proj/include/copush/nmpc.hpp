#pragma once

#include "copush/adaptive.hpp"
#include "copush/model.hpp"
#include "copush/reference.hpp"
#include "copush/safety.hpp"
#include "copush/types.hpp"

#include <Eigen/SparseCore>

#include <functional>
#include <vector>

namespace copush {

/// Diagonal cost weights of the optimal control problem. State order is
/// (x_p, y_p, theta, xdot_p, ydot_p, thetadot).
struct OcpWeights {
  Vec6 q_f = (Vec6() << 150.0, 150.0, 3.0, 3.0, 3.0, 8.0).finished();
  Vec6 q_xb = (Vec6() << 2.0, 2.2, 0.2, 0.3, 0.3, 0.1).finished();
  VecX q_d;  // per agent, contact-drift weight
  VecX r_u;  // per input entry

  static OcpWeights defaults(int num_agents);
};

struct SolverSettings {
  int horizon_steps = 50;
  double dt = 0.1;
  int max_sqp_iters = 3;
  int max_sqp_iters_cold = 60;
  double kkt_regularization = 1e-8;  // first fallback on factorization failure
  double merit_penalty_weight = 1500.0;
  double initial_damping = 0.0;  // Levenberg level carried in from the caller
  double warm_defect_reset = 2.0;  // defect above which a shifted chain is discarded
  double linesearch_shrink = 0.5;
  int linesearch_max_trials = 10;
  double step_tolerance = 1e-8;
};

struct SolveStats {
  int iterations = 0;
  std::vector<double> merit_history;
  double kkt_residual = 0.0;
  double regularization = 0.0;
  double final_cost = 0.0;
  double final_defect = 0.0;   // l1 norm of the dynamics defects
  double final_damping = 0.0;  // Levenberg level at exit
  double solve_ms = 0.0;
  bool converged = false;
  bool failed = false;
};

/// Optimized horizon: states (6+N) x (N_T+1), inputs 2N x N_T.
struct HorizonSolution {
  MatX states;
  MatX inputs;
  SolveStats stats;

  bool empty() const { return states.size() == 0; }
};

/// One RK2 (midpoint) prediction step of the adapted dynamics, input held
/// constant over the step.
VecX step_dynamics(const AdaptiveModel& model, const VecX& x, const VecX& u,
                   const Vec4& psi, double dt);
void step_dynamics_jacobians(const AdaptiveModel& model, const VecX& x, const VecX& u,
                             const Vec4& psi, double dt, MatX& dx_next_dx,
                             MatX& dx_next_du);

/// Equality-constrained NLP over the stacked decision vector [X; U]:
/// minimize cost(Z) subject to equality_residual(Z) = 0.
struct NlpProblem {
  int num_vars = 0;
  int num_eq = 0;
  std::function<double(const VecX&)> cost;
  /// Gradient and Gauss-Newton Hessian (as triplets) of the cost.
  std::function<void(const VecX&, VecX&, std::vector<Eigen::Triplet<double>>&)>
      cost_quadratic_model;
  std::function<VecX(const VecX&)> equality_residual;
  /// Jacobian triplets, row = constraint index, col = variable index.
  std::function<void(const VecX&, std::vector<Eigen::Triplet<double>>&)>
      equality_jacobian;
};

/// Everything the transcription needs besides the initial condition.
struct MpcSetup {
  AdaptiveModel model;
  std::vector<Obstacle> obstacles;
  bool robot_cbf_enabled = true;
  OcpWeights weights;
  PenaltyParams pen_cbf{0.8, 0.5};
  PenaltyParams pen_clf{1.0, 0.5};
  PenaltyParams pen_bound{0.1, 0.01};
  CbfGains gains;
  Limits limits;
  double lambda = 3.0;
  Vec3 k_d_diag = Vec3(3.0, 3.0, 3.0);
  SolverSettings settings;
};

/// Builds the horizon NLP: tracking/terminal/input/drift costs plus the
/// penalty terms of every inequality constraint; equality constraints are the
/// initial condition and the dynamics defects.
NlpProblem transcribe(const MpcSetup& setup, const VecX& x0, const Vec4& psi,
                      const std::vector<RefPoint>& refs, const VecX& d_prev);

struct QpStep {
  VecX dz;
  VecX multipliers;
  double kkt_residual = 0.0;
  double regularization = 0.0;
  double model_cost_decrease = 0.0;  // -(g'dz + dz'H dz / 2)
  bool ok = false;
};

/// Solves the equality-constrained QP model of the NLP at Z via one KKT
/// factorization, escalating symmetric regularization on failure. `damping`
/// adds a Levenberg shift to the Gauss-Newton Hessian.
QpStep qp_subproblem(const NlpProblem& nlp, const VecX& z,
                     const SolverSettings& settings, double damping = 0.0);

struct SqpResult {
  VecX solution;
  SolveStats stats;
};

/// SQP iteration with an l1 merit line search on the dynamics defects.
SqpResult sqp_solve(const NlpProblem& nlp, const VecX& warm_start,
                    const SolverSettings& settings);

struct MpcStepResult {
  PlannerInput input;
  HorizonSolution solution;
};

/// One receding-horizon update: builds references, warm-shifts the previous
/// solution, transcribes, solves, and returns the first input. On solver
/// failure the returned input is all zeros.
MpcStepResult mpc_step(const MpcSetup& setup, const PlannerState& state,
                       const Vec4& psi, const Goal& goal,
                       const HorizonSolution* previous);

}  // namespace copush
