#include "copush/nmpc.hpp"

#include <Eigen/SparseLU>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <memory>
#include <stdexcept>

namespace copush {

OcpWeights OcpWeights::defaults(int num_agents) {
  OcpWeights w;
  w.q_d = VecX::Constant(num_agents, 0.1);
  w.r_u = VecX::Constant(2 * num_agents, 0.01);
  return w;
}

VecX step_dynamics(const AdaptiveModel& model, const VecX& x, const VecX& u,
                   const Vec4& psi, double dt) {
  const VecX k1 = model.dynamics(x, u, psi);
  const VecX k2 = model.dynamics(x + 0.5 * dt * k1, u, psi);
  return x + dt * k2;
}

void step_dynamics_jacobians(const AdaptiveModel& model, const VecX& x, const VecX& u,
                             const Vec4& psi, double dt, MatX& dx_next_dx,
                             MatX& dx_next_du) {
  const int nx = model.state_dim();
  MatX f1x, f1u, f2x, f2u;
  const VecX k1 = model.dynamics(x, u, psi);
  model.dynamics_jacobians(x, u, psi, f1x, f1u);
  const VecX xm = x + 0.5 * dt * k1;
  model.dynamics_jacobians(xm, u, psi, f2x, f2u);

  dx_next_dx = MatX::Identity(nx, nx) + dt * (f2x * (MatX::Identity(nx, nx) + 0.5 * dt * f1x));
  dx_next_du = dt * (0.5 * dt * (f2x * f1u) + f2u);
}

namespace {

struct TranscriptionData {
  MpcSetup setup;
  VecX x0;
  Vec4 psi;
  std::vector<RefPoint> refs;
  VecX d_prev;
  Mat3 k_d;
  int nx = 0;
  int nu = 0;
  int horizon = 0;

  int x_index(int k) const { return k * nx; }
  int u_index(int k) const { return nx * (horizon + 1) + k * nu; }

  TrackingReference stage_reference(int k) const {
    TrackingReference ref;
    ref.q_d = refs[static_cast<size_t>(k)].q;
    ref.qdot_d = refs[static_cast<size_t>(k)].qdot;
    ref.qddot_d.setZero();
    ref.lambda = setup.lambda;
    return ref;
  }

  // The terminal state carries no input, so it is guarded by the plain
  // barrier distances; otherwise the terminal tracking pull can drag the
  // horizon tail through an obstacle unopposed.
  double terminal_safety_value(const VecX& xn) const {
    double total = 0.0;
    const double t_ahead = horizon * setup.settings.dt;
    for (const Obstacle& obs : setup.obstacles) {
      const Obstacle at_n = obs.predicted(t_ahead);
      total += penalty(object_barrier(xn, at_n), setup.pen_cbf).value;
      if (setup.robot_cbf_enabled) {
        for (int i = 0; i < setup.model.num_agents(); ++i) {
          total += penalty(robot_barrier(xn, i, at_n, setup.model.contacts),
                           setup.pen_cbf)
                       .value;
        }
      }
    }
    return total;
  }

  void terminal_safety_model(const VecX& xn, Eigen::Ref<VecX> grad_x,
                             MatX& hessian) const {
    const double t_ahead = horizon * setup.settings.dt;
    for (const Obstacle& obs : setup.obstacles) {
      const Obstacle at_n = obs.predicted(t_ahead);
      const BarrierValue ob = object_barrier_grad(xn, at_n, nx);
      const PenaltyEval pe = penalty(ob.b, setup.pen_cbf);
      grad_x += pe.d1 * ob.db_dx;
      hessian.noalias() += pe.d2 * (ob.db_dx * ob.db_dx.transpose());
      if (setup.robot_cbf_enabled) {
        for (int i = 0; i < setup.model.num_agents(); ++i) {
          const BarrierValue rb = robot_barrier_grad(xn, i, at_n, setup.model.contacts);
          const PenaltyEval pr = penalty(rb.b, setup.pen_cbf);
          grad_x += pr.d1 * rb.db_dx;
          hessian.noalias() += pr.d2 * (rb.db_dx * rb.db_dx.transpose());
        }
      }
    }
  }

  double stage_penalty_value(int k, const VecX& xk, const VecX& uk) const {
    const AdaptiveModel& model = setup.model;
    double total = 0.0;
    const VecX hb = bound_constraints(xk, uk, setup.limits, model.contacts);
    for (int c = 0; c < hb.size(); ++c) total += penalty(hb(c), setup.pen_bound).value;
    total += penalty(clf_constraint(model, xk, uk, psi, stage_reference(k), k_d),
                     setup.pen_clf)
                 .value;
    const double t_ahead = k * setup.settings.dt;
    for (const Obstacle& obs : setup.obstacles) {
      const Obstacle at_k = obs.predicted(t_ahead);
      total += penalty(ecbf_object(model, xk, uk, psi, at_k, setup.gains),
                       setup.pen_cbf)
                   .value;
      if (setup.robot_cbf_enabled) {
        for (int i = 0; i < model.num_agents(); ++i) {
          total += penalty(cbf_robot(model, xk, uk, i, at_k, setup.gains),
                           setup.pen_cbf)
                       .value;
        }
      }
    }
    return total;
  }

  // Accumulates d1 * dh into the gradient and d2 * dh * dh' into the stage
  // Gauss-Newton block (stage variable order: [x_k; u_k]).
  static void accumulate_penalty(const ConstraintValue& cv, const PenaltyEval& pen,
                                 Eigen::Ref<VecX> grad_x, Eigen::Ref<VecX> grad_u,
                                 MatX& stage_hessian) {
    const int nx = static_cast<int>(cv.dh_dx.size());
    const int nu = static_cast<int>(cv.dh_du.size());
    grad_x += pen.d1 * cv.dh_dx;
    grad_u += pen.d1 * cv.dh_du;
    VecX dh(nx + nu);
    dh << cv.dh_dx, cv.dh_du;
    stage_hessian.noalias() += pen.d2 * (dh * dh.transpose());
  }

  void stage_penalty_model(int k, const VecX& xk, const VecX& uk,
                           Eigen::Ref<VecX> grad_x, Eigen::Ref<VecX> grad_u,
                           MatX& stage_hessian) const {
    const AdaptiveModel& model = setup.model;
    const int n = model.num_agents();

    const VecX hb = bound_constraints(xk, uk, setup.limits, model.contacts);
    for (int i = 0; i < n; ++i) {
      // Gradients of the box constraints are unit vectors; handled inline.
      const PenaltyEval p_lo = penalty(hb(6 * i + 0), setup.pen_bound);
      const PenaltyEval p_hi = penalty(hb(6 * i + 1), setup.pen_bound);
      grad_u(i) += p_lo.d1 - p_hi.d1;
      stage_hessian(nx + i, nx + i) += p_lo.d2 + p_hi.d2;

      const PenaltyEval d_lo = penalty(hb(6 * i + 2), setup.pen_bound);
      const PenaltyEval d_hi = penalty(hb(6 * i + 3), setup.pen_bound);
      grad_x(6 + i) += d_lo.d1 - d_hi.d1;
      stage_hessian(6 + i, 6 + i) += d_lo.d2 + d_hi.d2;

      const PenaltyEval v_lo = penalty(hb(6 * i + 4), setup.pen_bound);
      const PenaltyEval v_hi = penalty(hb(6 * i + 5), setup.pen_bound);
      grad_u(n + i) += v_hi.d1 - v_lo.d1;
      stage_hessian(nx + n + i, nx + n + i) += v_lo.d2 + v_hi.d2;
    }

    const ConstraintValue clf =
        clf_constraint_grad(setup.model, xk, uk, psi, stage_reference(k), k_d);
    accumulate_penalty(clf, penalty(clf.h, setup.pen_clf), grad_x, grad_u,
                       stage_hessian);

    const double t_ahead = k * setup.settings.dt;
    for (const Obstacle& obs : setup.obstacles) {
      const Obstacle at_k = obs.predicted(t_ahead);
      const ConstraintValue eo =
          ecbf_object_grad(setup.model, xk, uk, psi, at_k, setup.gains);
      accumulate_penalty(eo, penalty(eo.h, setup.pen_cbf), grad_x, grad_u,
                         stage_hessian);
      if (setup.robot_cbf_enabled) {
        for (int i = 0; i < setup.model.num_agents(); ++i) {
          const ConstraintValue cr =
              cbf_robot_grad(setup.model, xk, uk, i, at_k, setup.gains);
          accumulate_penalty(cr, penalty(cr.h, setup.pen_cbf), grad_x, grad_u,
                             stage_hessian);
        }
      }
    }
  }
};

Vec6 stage_tracking_error(const TranscriptionData& d, const VecX& z, int k) {
  Vec6 e;
  e.head<3>() = z.segment<3>(d.x_index(k)) - d.refs[static_cast<size_t>(k)].q;
  e.tail<3>() = z.segment<3>(d.x_index(k) + 3) - d.refs[static_cast<size_t>(k)].qdot;
  return e;
}

}  // namespace

NlpProblem transcribe(const MpcSetup& setup, const VecX& x0, const Vec4& psi,
                      const std::vector<RefPoint>& refs, const VecX& d_prev) {
  auto data = std::make_shared<TranscriptionData>();
  data->setup = setup;
  data->x0 = x0;
  data->psi = psi;
  data->refs = refs;
  data->d_prev = d_prev;
  data->k_d = setup.k_d_diag.asDiagonal();
  data->nx = setup.model.state_dim();
  data->nu = setup.model.input_dim();
  data->horizon = setup.settings.horizon_steps;

  const int n = setup.model.num_agents();
  if (static_cast<int>(refs.size()) != data->horizon + 1) {
    throw std::invalid_argument("transcribe: reference length must be horizon_steps + 1");
  }
  if (x0.size() != data->nx || d_prev.size() != n) {
    throw std::invalid_argument("transcribe: state/d_prev dimension mismatch");
  }
  if (setup.weights.q_d.size() != n || setup.weights.r_u.size() != data->nu) {
    throw std::invalid_argument("transcribe: weight dimension mismatch");
  }

  NlpProblem nlp;
  nlp.num_vars = data->nx * (data->horizon + 1) + data->nu * data->horizon;
  nlp.num_eq = data->nx * (data->horizon + 1);

  nlp.cost = [data](const VecX& z) {
    const auto& w = data->setup.weights;
    double total = 0.0;
    for (int k = 0; k < data->horizon; ++k) {
      const Vec6 e6 = stage_tracking_error(*data, z, k + 1);
      total += 0.5 * e6.dot(w.q_xb.cwiseProduct(e6));
      const VecX ed =
          z.segment(data->x_index(k + 1) + 6, data->d_prev.size()) - data->d_prev;
      total += 0.5 * ed.dot(w.q_d.cwiseProduct(ed));
      const VecX uk = z.segment(data->u_index(k), data->nu);
      total += 0.5 * uk.dot(w.r_u.cwiseProduct(uk));
      total += data->stage_penalty_value(k, z.segment(data->x_index(k), data->nx), uk);
    }
    const Vec6 ef = stage_tracking_error(*data, z, data->horizon);
    total += 0.5 * ef.dot(w.q_f.cwiseProduct(ef));
    total += data->terminal_safety_value(
        z.segment(data->x_index(data->horizon), data->nx));
    return total;
  };

  nlp.cost_quadratic_model = [data](const VecX& z, VecX& grad,
                                    std::vector<Eigen::Triplet<double>>& hess) {
    const auto& w = data->setup.weights;
    const int nx = data->nx;
    const int nu = data->nu;
    const int nd = static_cast<int>(data->d_prev.size());
    grad = VecX::Zero(z.size());
    hess.clear();

    MatX stage_h(nx + nu, nx + nu);
    for (int k = 0; k < data->horizon; ++k) {
      const int ix1 = data->x_index(k + 1);
      const Vec6 e6 = stage_tracking_error(*data, z, k + 1);
      grad.segment<6>(ix1) += w.q_xb.cwiseProduct(e6);
      for (int j = 0; j < 6; ++j) hess.emplace_back(ix1 + j, ix1 + j, w.q_xb(j));

      const VecX ed = z.segment(ix1 + 6, nd) - data->d_prev;
      grad.segment(ix1 + 6, nd) += w.q_d.cwiseProduct(ed);
      for (int j = 0; j < nd; ++j)
        hess.emplace_back(ix1 + 6 + j, ix1 + 6 + j, w.q_d(j));

      const int iu = data->u_index(k);
      const VecX uk = z.segment(iu, nu);
      grad.segment(iu, nu) += w.r_u.cwiseProduct(uk);
      for (int j = 0; j < nu; ++j) hess.emplace_back(iu + j, iu + j, w.r_u(j));

      const int ix = data->x_index(k);
      stage_h.setZero();
      data->stage_penalty_model(k, z.segment(ix, nx), uk, grad.segment(ix, nx),
                                grad.segment(iu, nu), stage_h);
      for (int r = 0; r < nx + nu; ++r) {
        const int row = r < nx ? ix + r : iu + (r - nx);
        for (int c = 0; c < nx + nu; ++c) {
          const double v = stage_h(r, c);
          if (v == 0.0) continue;
          const int col = c < nx ? ix + c : iu + (c - nx);
          hess.emplace_back(row, col, v);
        }
      }
    }

    const int ixf = data->x_index(data->horizon);
    const Vec6 ef = stage_tracking_error(*data, z, data->horizon);
    grad.segment<6>(ixf) += w.q_f.cwiseProduct(ef);
    for (int j = 0; j < 6; ++j) hess.emplace_back(ixf + j, ixf + j, w.q_f(j));

    MatX terminal_h = MatX::Zero(nx, nx);
    data->terminal_safety_model(z.segment(ixf, nx), grad.segment(ixf, nx), terminal_h);
    for (int r = 0; r < nx; ++r) {
      for (int c = 0; c < nx; ++c) {
        if (terminal_h(r, c) != 0.0) hess.emplace_back(ixf + r, ixf + c, terminal_h(r, c));
      }
    }
  };

  nlp.equality_residual = [data](const VecX& z) {
    VecX f(data->nx * (data->horizon + 1));
    f.segment(0, data->nx) = z.segment(data->x_index(0), data->nx) - data->x0;
    for (int k = 0; k < data->horizon; ++k) {
      const VecX pred = step_dynamics(
          data->setup.model, z.segment(data->x_index(k), data->nx),
          z.segment(data->u_index(k), data->nu), data->psi, data->setup.settings.dt);
      f.segment(data->nx * (k + 1), data->nx) =
          z.segment(data->x_index(k + 1), data->nx) - pred;
    }
    return f;
  };

  nlp.equality_jacobian = [data](const VecX& z,
                                 std::vector<Eigen::Triplet<double>>& jac) {
    jac.clear();
    const int nx = data->nx;
    for (int j = 0; j < nx; ++j) jac.emplace_back(j, data->x_index(0) + j, 1.0);
    MatX a, b;
    for (int k = 0; k < data->horizon; ++k) {
      step_dynamics_jacobians(data->setup.model, z.segment(data->x_index(k), nx),
                              z.segment(data->u_index(k), data->nu), data->psi,
                              data->setup.settings.dt, a, b);
      const int row0 = nx * (k + 1);
      for (int r = 0; r < nx; ++r) {
        for (int c = 0; c < nx; ++c) {
          if (a(r, c) != 0.0) jac.emplace_back(row0 + r, data->x_index(k) + c, -a(r, c));
        }
        for (int c = 0; c < data->nu; ++c) {
          if (b(r, c) != 0.0) jac.emplace_back(row0 + r, data->u_index(k) + c, -b(r, c));
        }
        jac.emplace_back(row0 + r, data->x_index(k + 1) + r, 1.0);
      }
    }
  };

  return nlp;
}

QpStep qp_subproblem(const NlpProblem& nlp, const VecX& z,
                     const SolverSettings& settings, double damping) {
  const int n = nlp.num_vars;
  const int m = nlp.num_eq;

  VecX grad;
  std::vector<Eigen::Triplet<double>> triplets;
  nlp.cost_quadratic_model(z, grad, triplets);
  std::vector<Eigen::Triplet<double>> kkt_triplets = triplets;
  if (damping > 0.0) {
    for (int i = 0; i < n; ++i) kkt_triplets.emplace_back(i, i, damping);
  }

  std::vector<Eigen::Triplet<double>> jac;
  nlp.equality_jacobian(z, jac);
  for (const auto& t : jac) {
    kkt_triplets.emplace_back(n + t.row(), t.col(), t.value());
    kkt_triplets.emplace_back(t.col(), n + t.row(), t.value());
  }

  Eigen::SparseMatrix<double> kkt(n + m, n + m);
  kkt.setFromTriplets(kkt_triplets.begin(), kkt_triplets.end());

  VecX rhs(n + m);
  rhs.head(n) = -grad;
  rhs.tail(m) = -nlp.equality_residual(z);

  QpStep step;
  if (!rhs.allFinite()) return step;

  const double rhs_scale = std::max(1.0, rhs.lpNorm<Eigen::Infinity>());
  double reg = 0.0;
  while (true) {
    Eigen::SparseMatrix<double> sys = kkt;
    if (reg > 0.0) {
      Eigen::SparseMatrix<double> shift(n + m, n + m);
      std::vector<Eigen::Triplet<double>> st;
      st.reserve(static_cast<size_t>(n + m));
      for (int i = 0; i < n; ++i) st.emplace_back(i, i, reg);
      for (int i = n; i < n + m; ++i) st.emplace_back(i, i, -reg);
      shift.setFromTriplets(st.begin(), st.end());
      sys += shift;
    }

    Eigen::SparseLU<Eigen::SparseMatrix<double>> solver;
    solver.analyzePattern(sys);
    solver.factorize(sys);
    if (solver.info() == Eigen::Success) {
      VecX sol = solver.solve(rhs);
      // Two rounds of iterative refinement against the shifted system.
      for (int r = 0; r < 2 && sol.allFinite(); ++r) {
        sol += solver.solve(rhs - sys * sol);
      }
      if (sol.allFinite()) {
        const double residual =
            (rhs - sys * sol).lpNorm<Eigen::Infinity>() / rhs_scale;
        if (residual < 1e-8) {
          step.dz = sol.head(n);
          step.multipliers = sol.tail(m);
          step.kkt_residual = residual;
          step.regularization = reg;
          VecX h_dz = damping * step.dz;
          for (const auto& t : triplets) h_dz(t.row()) += t.value() * step.dz(t.col());
          step.model_cost_decrease = -(grad.dot(step.dz) + 0.5 * step.dz.dot(h_dz));
          step.ok = true;
          return step;
        }
      }
    }
    reg = (reg == 0.0) ? settings.kkt_regularization : reg * 10.0;
    if (reg > 1e2) return step;  // factorization failed at every level
  }
}

SqpResult sqp_solve(const NlpProblem& nlp, const VecX& warm_start,
                    const SolverSettings& settings) {
  const auto t_start = std::chrono::steady_clock::now();
  SqpResult res;
  res.solution = warm_start;

  // The defect weight starts at the configured value and rises whenever the
  // QP multipliers exceed it; an l1 penalty below the multiplier scale is not
  // exact and its steps stop being descent directions.
  double weight = settings.merit_penalty_weight;
  auto merit = [&](const VecX& z) {
    return nlp.cost(z) + weight * nlp.equality_residual(z).lpNorm<1>();
  };

  double current_merit = merit(warm_start);
  res.stats.merit_history.push_back(current_merit);
  if (!std::isfinite(current_merit)) {
    res.stats.failed = true;
    return res;
  }

  VecX z = warm_start;
  static const bool trace = std::getenv("COPUSH_SQP_TRACE") != nullptr;
  // Levenberg damping of the Gauss-Newton model: grown when full steps get
  // rejected, shrunk again once they are trusted.
  double damping = settings.initial_damping;
  for (int iter = 0; iter < settings.max_sqp_iters; ++iter) {
    const QpStep qp = qp_subproblem(nlp, z, settings, damping);
    res.stats.iterations = iter + 1;
    if (!qp.ok) {
      res.stats.failed = true;
      break;
    }
    res.stats.kkt_residual = qp.kkt_residual;
    res.stats.regularization = std::max(res.stats.regularization, qp.regularization);

    const double multiplier_norm =
        qp.multipliers.size() > 0 ? qp.multipliers.lpNorm<Eigen::Infinity>() : 0.0;
    if (weight < 1.2 * multiplier_norm) {
      weight = 2.0 * multiplier_norm;
      current_merit = merit(z);
      // Older entries measured a different functional.
      res.stats.merit_history.assign(1, current_merit);
    }
    const double defect_l1 = nlp.equality_residual(z).lpNorm<1>();
    const double predicted = qp.model_cost_decrease + weight * defect_l1;

    if (trace) {
      std::fprintf(stderr,
                   "[sqp] it=%d merit=%.6g pred=%.3g |dz|=%.3g damp=%.3g w=%.3g\n",
                   iter, current_merit, predicted, qp.dz.lpNorm<Eigen::Infinity>(),
                   damping, weight);
    }

    const double step_scale = settings.step_tolerance * (1.0 + z.lpNorm<Eigen::Infinity>());
    const double step_norm = qp.dz.lpNorm<Eigen::Infinity>();
    if (step_norm <= step_scale && damping <= 1e-6) {
      res.stats.converged = true;
      break;
    }
    // With the weight above the multiplier norm the model decrease is
    // nonnegative; once it is unresolvable in double precision we are
    // practically stationary.
    if (predicted <= 1e-9 * (1.0 + std::abs(current_merit))) {
      res.stats.converged = true;
      break;
    }

    const double previous_merit = current_merit;
    double gamma = 1.0;
    bool accepted = false;
    for (int trial = 0; trial < settings.linesearch_max_trials; ++trial) {
      const VecX z_trial = z + gamma * qp.dz;
      const double m_trial = merit(z_trial);
      if (std::isfinite(m_trial) && m_trial < current_merit) {
        z = z_trial;
        current_merit = m_trial;
        accepted = true;
        break;
      }
      gamma *= settings.linesearch_shrink;
    }

    if (!accepted) {
      damping = std::max(10.0 * damping, 1e-4);
      if (damping > 1e8) break;  // no usable step at any damping level
      continue;
    }
    if (current_merit > previous_merit - 1e-12 * (1.0 + std::abs(previous_merit))) {
      // Accepted but unmeasurably small progress; stop before noise takes over.
      res.stats.merit_history.push_back(current_merit);
      res.stats.converged = true;
      break;
    }
    const double actual = previous_merit - current_merit;
    res.stats.merit_history.push_back(current_merit);
    if (gamma >= 1.0 && actual >= 0.5 * predicted) {
      damping = damping <= 1e-12 ? 0.0 : 0.25 * damping;
    } else if (gamma < 1.0) {
      damping = std::max(2.0 * damping, 1e-6);
    }

    if (gamma * step_norm <= step_scale && damping <= 1e-6) {
      res.stats.converged = true;
      break;
    }
  }

  res.solution = z;
  res.stats.final_damping = damping;
  res.stats.final_cost = nlp.cost(z);
  res.stats.final_defect = nlp.equality_residual(z).lpNorm<1>();
  res.stats.solve_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                t_start)
          .count();
  return res;
}

MpcStepResult mpc_step(const MpcSetup& setup, const PlannerState& state,
                       const Vec4& psi, const Goal& goal,
                       const HorizonSolution* previous) {
  const int nx = setup.model.state_dim();
  const int nu = setup.model.input_dim();
  const int n = setup.model.num_agents();
  const int horizon = setup.settings.horizon_steps;

  MpcStepResult out;
  out.input = PlannerInput::zero(n);
  out.solution.states = MatX::Zero(nx, horizon + 1);
  out.solution.inputs = MatX::Zero(nu, horizon);

  const VecX x0 = state.to_vector();
  if (!x0.allFinite()) {
    out.solution.stats.failed = true;
    return out;
  }

  const std::vector<RefPoint> refs =
      subgoals(state.object, goal, setup.settings.dt, horizon);
  const NlpProblem nlp = transcribe(setup, x0, psi, refs, state.d);

  bool cold = previous == nullptr || previous->empty();
  VecX warm(nlp.num_vars);
  if (!cold) {
    // Multiple-shooting warm start: states and box-projected inputs shifted
    // by one step, the first state pinned to the measurement.
    for (int k = 0; k <= horizon; ++k) {
      warm.segment(k * nx, nx) = previous->states.col(std::min(k + 1, horizon));
    }
    warm.segment(0, nx) = x0;
    for (int k = 0; k < horizon; ++k) {
      VecX uk = previous->inputs.col(std::min(k + 1, horizon - 1));
      for (int i = 0; i < n; ++i) {
        uk(i) = std::clamp(uk(i), 0.0, setup.limits.f_max);
        uk(n + i) = std::clamp(uk(n + i), -setup.limits.v_max, setup.limits.v_max);
      }
      warm.segment(nx * (horizon + 1) + k * nu, nu) = uk;
    }
    // A poisoned chain is worse than no chain.
    if (!warm.allFinite() ||
        nlp.equality_residual(warm).lpNorm<1>() > setup.settings.warm_defect_reset) {
      cold = true;
    }
  }
  if (cold) {
    // Zero inputs and a coasting rollout: dynamically consistent and calm.
    warm.tail(nu * horizon).setZero();
    warm.segment(0, nx) = x0;
    for (int k = 0; k < horizon; ++k) {
      warm.segment(nx * (k + 1), nx) =
          step_dynamics(setup.model, warm.segment(nx * k, nx),
                        VecX::Zero(nu), psi, setup.settings.dt);
    }
  }

  SolverSettings local = setup.settings;
  if (cold) {
    local.max_sqp_iters = setup.settings.max_sqp_iters_cold;
  } else {
    local.initial_damping =
        std::min(0.25 * previous->stats.final_damping, 1e2);
  }
  const SqpResult res = sqp_solve(nlp, warm, local);

  out.solution.stats = res.stats;
  for (int k = 0; k <= horizon; ++k)
    out.solution.states.col(k) = res.solution.segment(k * nx, nx);
  for (int k = 0; k < horizon; ++k)
    out.solution.inputs.col(k) = res.solution.segment(nx * (horizon + 1) + k * nu, nu);

  if (!res.stats.failed) {
    out.input = PlannerInput::from_vector(out.solution.inputs.col(0), n);
  }
  return out;
}

}  // namespace copush
