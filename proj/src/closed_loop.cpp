#include "copush/closed_loop.hpp"

#include "copush/adaptive.hpp"
#include "copush/model.hpp"
#include "copush/nmpc.hpp"
#include "copush/reference.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>

namespace copush {

namespace {

// Instantaneous reference for the adaptation law, anchored at the current
// state. The commanded rate ramps down over the last second of approach so
// the composite error vanishes at the goal instead of jumping when the
// constant-rate profile saturates.
TrackingReference adaptation_reference(const ObjectState& x, const Scenario& scenario) {
  constexpr double kTaperTime = 1.0;  // s
  const std::vector<RefPoint> head = subgoals(x, scenario.goal, scenario.solver.dt, 1);
  const double t_rem = time_to_goal(x, scenario.goal);
  TrackingReference ref;
  ref.q_d = head[0].q;
  ref.qdot_d = head[0].qdot * std::min(1.0, t_rem / kTaperTime);
  ref.lambda = scenario.lambda;
  return ref;
}

struct SuccessTracker {
  double pos_tol;
  double theta_tol;
  int required_ticks;
  int streak = 0;
  double streak_start = std::numeric_limits<double>::quiet_NaN();

  bool update(const ObjectState& x, const Goal& goal, double t) {
    const bool at_goal =
        (x.position() - goal.position).norm() < pos_tol &&
        std::abs(wrap_angle(x.heading() - goal.theta)) < theta_tol;
    if (!at_goal) {
      streak = 0;
      return false;
    }
    if (streak == 0) streak_start = t;
    ++streak;
    return streak >= required_ticks;
  }
};

}  // namespace

TrajectoryLog run_closed_loop(const Scenario& scenario) {
  const int n = scenario.num_agents();
  const int num_obs = static_cast<int>(scenario.obstacles.size());
  const double period = 1.0 / scenario.sim.control_hz;
  const int fine_steps = std::max(1, static_cast<int>(std::llround(period / scenario.sim.dt)));
  const double fine_dt = period / fine_steps;

  const AdaptiveModel model = scenario.planner_model();
  const Mat3 k_d = scenario.k_d_diag.asDiagonal();

  TrajectoryLog log;
  log.num_agents = n;
  log.num_obstacles = num_obs;
  log.control_period = period;
  log.start_position = scenario.initial.q.head<2>();
  log.goal_position = scenario.goal.position;
  log.goal_theta = scenario.goal.theta;

  PlannerState state;
  state.object = scenario.initial;
  state.d = VecX(n);
  for (int i = 0; i < n; ++i) state.d(i) = scenario.agents[static_cast<size_t>(i)].d_init;

  UncertaintyEstimate estimate = scenario.uncertainty;
  HorizonSolution previous;
  SuccessTracker tracker{scenario.sim.success_pos_tol, scenario.sim.success_theta_tol,
                         std::max(1, static_cast<int>(std::ceil(
                                          scenario.sim.success_hold / period - 1e-9)))};

  const int max_ticks =
      static_cast<int>(std::ceil(scenario.sim.time_limit / period - 1e-9));

  auto record_tick = [&](double t, const PlannerInput& realized, double h_clf,
                         const Vec3& s, const Vec4& psi,
                         const std::vector<Obstacle>& obstacles,
                         const SolveStats& stats, bool solver_ok) {
    TickRecord rec;
    rec.t = t;
    rec.object = state.object;
    rec.d = state.d;
    rec.force = realized.force;
    rec.slide_rate = realized.slide_rate;
    rec.barrier_object = VecX(num_obs);
    rec.barrier_robot = VecX(n * num_obs);
    const VecX xv = state.to_vector();
    for (int jx = 0; jx < num_obs; ++jx) {
      rec.barrier_object(jx) = object_barrier(xv, obstacles[static_cast<size_t>(jx)]);
      for (int i = 0; i < n; ++i) {
        rec.barrier_robot(i * num_obs + jx) =
            robot_barrier(xv, i, obstacles[static_cast<size_t>(jx)], model.contacts);
      }
    }
    rec.h_clf = h_clf;
    rec.psi = psi;
    rec.s = s;
    rec.lyapunov_proxy =
        0.5 * s.dot(mass_matrix(scenario.nominal, state.object.heading()) * s);
    rec.sqp_iters = stats.iterations;
    rec.merit = stats.merit_history.empty() ? 0.0 : stats.merit_history.back();
    rec.kkt_residual = stats.kkt_residual;
    rec.solve_ms = stats.solve_ms;
    rec.solver_ok = solver_ok;
    log.ticks.push_back(std::move(rec));
  };

  for (int tick = 0; tick < max_ticks; ++tick) {
    const double t = tick * period;

    std::vector<Obstacle> obstacles_now;
    obstacles_now.reserve(scenario.obstacles.size());
    for (const ObstacleScript& script : scenario.obstacles) {
      obstacles_now.push_back(obstacle_update(script, t));
    }

    const TrackingReference ref0 = adaptation_reference(state.object, scenario);
    const Vec3 s = composite_error(state.object, ref0);
    if (scenario.ablation.adaptive_enabled) {
      const ReferenceMotion rm = reference_motion(state.object, ref0);
      const RegressorMat y = regressor(state.object.qdot, rm.qddot_r, scenario.v_eps);
      estimate = adaptation_step(estimate, y, s, period);
    }

    MpcSetup setup = scenario.mpc_setup(obstacles_now);
    MpcStepResult mpc = mpc_step(setup, state, estimate.psi, scenario.goal,
                                 previous.empty() ? nullptr : &previous);
    const bool refresh = scenario.sim.refresh_ticks > 0 && !previous.empty() &&
                         tick % scenario.sim.refresh_ticks == 0;
    if (refresh) {
      MpcStepResult cold = mpc_step(setup, state, estimate.psi, scenario.goal, nullptr);
      const auto score = [](const MpcStepResult& r) {
        return r.solution.stats.final_cost + 1e5 * r.solution.stats.final_defect;
      };
      if (!cold.solution.stats.failed &&
          (mpc.solution.stats.failed || score(cold) < score(mpc))) {
        mpc = std::move(cold);
      }
    }

    static const bool loop_trace = std::getenv("COPUSH_LOOP_TRACE") != nullptr;
    if (loop_trace && tick % 25 == 0) {
      double plan_min_obj = 1e9;
      double plan_min_rob = 1e9;
      for (int k = 0; k <= scenario.solver.horizon_steps; ++k) {
        const VecX xk = mpc.solution.states.col(k);
        for (size_t jx = 0; jx < obstacles_now.size(); ++jx) {
          const Obstacle at_k = obstacles_now[jx].predicted(k * scenario.solver.dt);
          plan_min_obj = std::min(plan_min_obj, object_barrier(xk, at_k));
          for (int i = 0; i < n; ++i) {
            plan_min_rob =
                std::min(plan_min_rob, robot_barrier(xk, i, at_k, model.contacts));
          }
        }
      }
      std::fprintf(stderr,
                   "[loop] t=%.2f pos(%.2f,%.2f) planBobj=%.3f planBrob=%.3f "
                   "u0=(%.1f,%.1f) defect=%.2e cost=%.1f\n",
                   t, state.object.q.x(), state.object.q.y(), plan_min_obj,
                   plan_min_rob, mpc.input.force(0), mpc.input.force(1),
                   mpc.solution.stats.final_defect, mpc.solution.stats.final_cost);
    }

    const AgentOutcome probe =
        apply_agents(mpc.input, state.d, scenario.limits, model.contacts, 0.0);
    const double h_clf =
        clf_constraint(model, state.to_vector(), probe.realized.to_vector(),
                       estimate.psi, ref0, k_d);

    const bool solver_ok = !mpc.solution.stats.failed;
    record_tick(t, probe.realized, h_clf, s, estimate.psi, obstacles_now,
                mpc.solution.stats, solver_ok);
    if (!solver_ok) {
      log.solver_failure = true;
      return log;
    }
    previous = mpc.solution;

    for (int step = 0; step < fine_steps; ++step) {
      const AgentOutcome out =
          apply_agents(mpc.input, state.d, scenario.limits, model.contacts, fine_dt);
      const Wrench tau = wrench_from_inputs(state, out.realized, model.contacts);
      state.object = integrate(state.object, tau, scenario.plant, fine_dt);
      state.d = out.d_next;
    }

    if (tracker.update(state.object, scenario.goal, (tick + 1) * period)) {
      log.success = true;
      log.time_to_goal = tracker.streak_start;
      break;
    }
  }

  // Terminal sample: the state the loop ended on, with idle inputs.
  {
    const double t_end = log.ticks.empty() ? 0.0 : log.ticks.back().t + period;
    std::vector<Obstacle> obstacles_now;
    for (const ObstacleScript& script : scenario.obstacles) {
      obstacles_now.push_back(obstacle_update(script, t_end));
    }
    const TrackingReference ref0 = adaptation_reference(state.object, scenario);
    const Vec3 s = composite_error(state.object, ref0);
    const PlannerInput idle = PlannerInput::zero(n);
    const double h_clf = clf_constraint(model, state.to_vector(), idle.to_vector(),
                                        estimate.psi, ref0, k_d);
    record_tick(t_end, idle, h_clf, s, estimate.psi, obstacles_now, SolveStats{}, true);
  }
  return log;
}

}  // namespace copush
