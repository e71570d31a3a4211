#include "copush/nmpc.hpp"

#include "test_utils.hpp"

#include <doctest.h>

#include <Eigen/Dense>

#include <cstring>

using namespace copush;
using namespace copush::testutil;

namespace {

AdaptiveModel test_model() {
  AdaptiveModel m;
  m.nominal.mass = 6.0;
  m.nominal.inertia_p = 0.64;
  m.nominal.half_extents = Vec2(0.4, 0.4);
  ContactConfig a;
  a.origin = Vec2(-0.4, 0.2);
  a.normal = Vec2(1, 0);
  a.tangent = Vec2(0, 1);
  a.d_lower = -0.6;
  a.d_upper = 0.2;
  ContactConfig b;
  b.origin = Vec2(0.2, -0.4);
  b.normal = Vec2(0, 1);
  b.tangent = Vec2(1, 0);
  b.d_lower = -0.6;
  b.d_upper = 0.2;
  m.contacts = {a, b};
  return m;
}

MpcSetup test_setup(int horizon = 10) {
  MpcSetup s;
  s.model = test_model();
  s.weights = OcpWeights::defaults(2);
  s.limits.f_max = 40.0;
  s.limits.v_max = 1.0;
  s.settings.horizon_steps = horizon;
  s.settings.dt = 0.1;
  s.settings.max_sqp_iters = 30;
  s.settings.max_sqp_iters_cold = 30;
  s.settings.step_tolerance = 1e-9;
  return s;
}

std::vector<RefPoint> constant_refs(const Vec3& q, int horizon) {
  std::vector<RefPoint> refs(static_cast<size_t>(horizon) + 1);
  for (auto& r : refs) r.q = q;
  return refs;
}

VecX random_decision(const NlpProblem& nlp) {
  return uniform_vec(nlp.num_vars, -0.5, 0.5);
}

/// Small linear-quadratic instance: linear dynamics, quadratic cost, no
/// penalty terms. The exact optimum solves a single KKT system.
struct LinearInstance {
  int nx = 2, nu = 1, horizon = 4;
  MatX a, b;
  VecX x0;
  VecX q, r, qf;

  LinearInstance() {
    a = (MatX(2, 2) << 1.0, 0.1, 0.0, 1.0).finished();
    b = (MatX(2, 1) << 0.005, 0.1).finished();
    x0 = (VecX(2) << 1.0, 0.0).finished();
    q = (VecX(2) << 1.0, 0.1).finished();
    r = (VecX(1) << 0.01).finished();
    qf = (VecX(2) << 10.0, 1.0).finished();
  }

  int num_vars() const { return nx * (horizon + 1) + nu * horizon; }
  int num_eq() const { return nx * (horizon + 1); }
  int xi(int k) const { return k * nx; }
  int ui(int k) const { return nx * (horizon + 1) + k * nu; }

  NlpProblem nlp() const {
    NlpProblem p;
    p.num_vars = num_vars();
    p.num_eq = num_eq();
    p.cost = [*this](const VecX& z) {
      double total = 0.0;
      for (int k = 0; k < horizon; ++k) {
        const VecX xk1 = z.segment(xi(k + 1), nx);
        const VecX uk = z.segment(ui(k), nu);
        total += 0.5 * xk1.dot(q.cwiseProduct(xk1)) + 0.5 * uk.dot(r.cwiseProduct(uk));
      }
      const VecX xf = z.segment(xi(horizon), nx);
      return total + 0.5 * xf.dot(qf.cwiseProduct(xf));
    };
    p.cost_quadratic_model = [*this](const VecX& z, VecX& grad,
                                     std::vector<Eigen::Triplet<double>>& hess) {
      grad = VecX::Zero(z.size());
      hess.clear();
      for (int k = 0; k < horizon; ++k) {
        for (int j = 0; j < nx; ++j) {
          grad(xi(k + 1) + j) += q(j) * z(xi(k + 1) + j);
          hess.emplace_back(xi(k + 1) + j, xi(k + 1) + j, q(j));
        }
        for (int j = 0; j < nu; ++j) {
          grad(ui(k) + j) += r(j) * z(ui(k) + j);
          hess.emplace_back(ui(k) + j, ui(k) + j, r(j));
        }
      }
      for (int j = 0; j < nx; ++j) {
        grad(xi(horizon) + j) += qf(j) * z(xi(horizon) + j);
        hess.emplace_back(xi(horizon) + j, xi(horizon) + j, qf(j));
      }
    };
    p.equality_residual = [*this](const VecX& z) {
      VecX f(num_eq());
      f.head(nx) = z.segment(xi(0), nx) - x0;
      for (int k = 0; k < horizon; ++k) {
        f.segment(nx * (k + 1), nx) = z.segment(xi(k + 1), nx) -
                                      a * z.segment(xi(k), nx) -
                                      b * z.segment(ui(k), nu);
      }
      return f;
    };
    p.equality_jacobian = [*this](const VecX&,
                                  std::vector<Eigen::Triplet<double>>& jac) {
      jac.clear();
      for (int j = 0; j < nx; ++j) jac.emplace_back(j, xi(0) + j, 1.0);
      for (int k = 0; k < horizon; ++k) {
        const int row0 = nx * (k + 1);
        for (int rr = 0; rr < nx; ++rr) {
          for (int cc = 0; cc < nx; ++cc)
            jac.emplace_back(row0 + rr, xi(k) + cc, -a(rr, cc));
          for (int cc = 0; cc < nu; ++cc)
            jac.emplace_back(row0 + rr, ui(k) + cc, -b(rr, cc));
          jac.emplace_back(row0 + rr, xi(k + 1) + rr, 1.0);
        }
      }
    };
    return p;
  }

  /// Dense full-horizon KKT solve, assembled independently of the solver path.
  VecX direct_solution() const {
    const int n = num_vars();
    const int m = num_eq();
    MatX h = MatX::Zero(n, n);
    for (int k = 0; k < horizon; ++k) {
      for (int j = 0; j < nx; ++j) h(xi(k + 1) + j, xi(k + 1) + j) += q(j);
      for (int j = 0; j < nu; ++j) h(ui(k) + j, ui(k) + j) += r(j);
    }
    for (int j = 0; j < nx; ++j) h(xi(horizon) + j, xi(horizon) + j) += qf(j);

    MatX jmat = MatX::Zero(m, n);
    VecX rhs_eq = VecX::Zero(m);
    jmat.block(0, xi(0), nx, nx).setIdentity();
    rhs_eq.head(nx) = x0;
    for (int k = 0; k < horizon; ++k) {
      const int row0 = nx * (k + 1);
      jmat.block(row0, xi(k), nx, nx) = -a;
      jmat.block(row0, ui(k), nx, nu) = -b;
      jmat.block(row0, xi(k + 1), nx, nx).setIdentity();
    }

    MatX kkt = MatX::Zero(n + m, n + m);
    kkt.topLeftCorner(n, n) = h;
    kkt.topRightCorner(n, m) = jmat.transpose();
    kkt.bottomLeftCorner(m, n) = jmat;
    VecX rhs(n + m);
    rhs.head(n).setZero();
    rhs.tail(m) = rhs_eq;
    const VecX sol = kkt.fullPivLu().solve(rhs);
    return sol.head(n);
  }
};

}  // namespace

TEST_CASE("step dynamics") {
  const AdaptiveModel model = test_model();

  SUBCASE("fixed point") {
    const VecX x = VecX::Zero(8);
    const VecX u = VecX::Zero(4);
    CHECK((step_dynamics(model, x, u, Vec4::Zero(), 0.1) - x).norm() == 0.0);
  }

  SUBCASE("slide rate advances d exactly") {
    VecX x = VecX::Zero(8);
    VecX u = VecX::Zero(4);
    u(2) = 0.7;
    u(3) = -0.3;
    const VecX next = step_dynamics(model, x, u, Vec4::Zero(), 0.1);
    CHECK(next(6) == doctest::Approx(0.07).epsilon(1e-14));
    CHECK(next(7) == doctest::Approx(-0.03).epsilon(1e-14));
  }

  SUBCASE("constant push through the reference point") {
    AdaptiveModel single = model;
    ContactConfig c;
    c.origin = Vec2(-0.4, 0.0);
    c.normal = Vec2(1, 0);
    c.tangent = Vec2(0, 1);
    single.contacts = {c};
    VecX x = VecX::Zero(7);
    VecX u = VecX::Zero(2);
    u(0) = 3.0;
    const double dt = 0.1;
    const VecX next = step_dynamics(single, x, u, Vec4::Zero(), dt);
    // No rotation, so the acceleration is constant and the midpoint rule is exact.
    CHECK(next(0) == doctest::Approx(0.5 * (3.0 / 6.0) * dt * dt).epsilon(1e-12));
    CHECK(next(3) == doctest::Approx((3.0 / 6.0) * dt).epsilon(1e-12));
  }

  SUBCASE("discrete jacobians match finite differences") {
    for (int trial = 0; trial < 20; ++trial) {
      VecX x(8);
      x << uniform_vec(2, -1, 1), uniform(-2, 2), uniform_vec(3, -0.5, 0.5),
          uniform_vec(2, -0.3, 0.1);
      VecX u(4);
      u << uniform_vec(2, 0, 8), uniform_vec(2, -0.8, 0.8);
      const Vec4 psi(uniform(-1, 3), uniform(0, 0.2), uniform(0, 20), uniform(0, 5));
      MatX a, b;
      step_dynamics_jacobians(model, x, u, psi, 0.1, a, b);
      const MatX a_fd = finite_difference_jacobian(
          [&](const VecX& xx) { return step_dynamics(model, xx, u, psi, 0.1); }, x);
      const MatX b_fd = finite_difference_jacobian(
          [&](const VecX& uu) { return step_dynamics(model, x, uu, psi, 0.1); }, u);
      CHECK(relative_error(a, a_fd) < 1e-5);
      CHECK(relative_error(b, b_fd) < 1e-5);
    }
  }
}

TEST_CASE("transcription") {
  SUBCASE("decision dimension for a single step") {
    MpcSetup setup = test_setup(1);
    const VecX x0 = VecX::Zero(8);
    const NlpProblem nlp =
        transcribe(setup, x0, Vec4::Zero(), constant_refs(Vec3::Zero(), 1), VecX::Zero(2));
    CHECK(nlp.num_vars == 8 * 2 + 4);
    CHECK(nlp.num_eq == 8 * 2);
  }

  SUBCASE("cost at a resting warm start is the penalty floor") {
    MpcSetup setup = test_setup(5);
    const VecX x0 = VecX::Zero(8);
    const auto refs = constant_refs(Vec3::Zero(), 5);
    const NlpProblem nlp = transcribe(setup, x0, Vec4::Zero(), refs, VecX::Zero(2));

    VecX warm = VecX::Zero(nlp.num_vars);
    for (int k = 0; k <= 5; ++k) warm.segment(k * 8, 8) = x0;

    // Independent tally: at rest with zero inputs only the box and CLF
    // penalties contribute, identically per stage.
    const Limits& lim = setup.limits;
    double per_stage = 0.0;
    for (int i = 0; i < 2; ++i) {
      const ContactConfig& c = setup.model.contacts[static_cast<size_t>(i)];
      per_stage += penalty(0.0, setup.pen_bound).value;
      per_stage += penalty(lim.f_max, setup.pen_bound).value;
      per_stage += penalty(0.0 - c.d_lower, setup.pen_bound).value;
      per_stage += penalty(c.d_upper - 0.0, setup.pen_bound).value;
      per_stage += 2.0 * penalty(lim.v_max, setup.pen_bound).value;
    }
    per_stage += penalty(0.0, setup.pen_clf).value;
    CHECK(nlp.cost(warm) == doctest::Approx(5.0 * per_stage).epsilon(1e-12));
  }

  SUBCASE("cost gradient matches finite differences") {
    MpcSetup setup = test_setup(3);
    Obstacle obs;
    obs.center = Vec2(2.0, 0.5);
    obs.velocity = Vec2(-0.1, 0.05);
    obs.radius_object = 1.0;
    obs.radius_robot = 0.8;
    setup.obstacles = {obs};

    VecX x0(8);
    x0 << 0, 0, 0.1, 0.2, 0, 0, -0.1, 0.05;
    auto refs = constant_refs(Vec3(1.0, 0.5, 0.2), 3);
    const NlpProblem nlp = transcribe(setup, x0, Vec4(1, 0.1, 5, 1), refs, x0.tail(2));

    for (int trial = 0; trial < 5; ++trial) {
      VecX z = random_decision(nlp);
      // Keep slide coordinates approximately feasible so penalties stay smooth.
      VecX grad;
      std::vector<Eigen::Triplet<double>> hess;
      nlp.cost_quadratic_model(z, grad, hess);
      const VecX grad_fd = finite_difference_gradient(nlp.cost, z);
      CHECK(relative_error(grad, grad_fd) < 1e-5);
    }
  }

  SUBCASE("equality jacobian matches finite differences") {
    MpcSetup setup = test_setup(3);
    VecX x0(8);
    x0 << 0, 0, 0, 0, 0, 0, 0, 0;
    const NlpProblem nlp = transcribe(setup, x0, Vec4::Zero(),
                                      constant_refs(Vec3::Zero(), 3), VecX::Zero(2));
    const VecX z = random_decision(nlp);
    std::vector<Eigen::Triplet<double>> trips;
    nlp.equality_jacobian(z, trips);
    MatX jac = MatX::Zero(nlp.num_eq, nlp.num_vars);
    for (const auto& t : trips) jac(t.row(), t.col()) += t.value();
    const MatX jac_fd = finite_difference_jacobian(nlp.equality_residual, z);
    CHECK(relative_error(jac, jac_fd) < 1e-5);
  }

  SUBCASE("inconsistent reference length throws") {
    MpcSetup setup = test_setup(4);
    CHECK_THROWS_AS(transcribe(setup, VecX::Zero(8), Vec4::Zero(),
                               constant_refs(Vec3::Zero(), 3), VecX::Zero(2)),
                    std::invalid_argument);
  }

  SUBCASE("Gauss-Newton Hessian is symmetric PSD") {
    MpcSetup setup = test_setup(3);
    Obstacle obs;
    obs.center = Vec2(1.5, 0.2);
    obs.radius_object = 0.8;
    obs.radius_robot = 0.6;
    setup.obstacles = {obs};
    const NlpProblem nlp = transcribe(setup, VecX::Zero(8), Vec4::Zero(),
                                      constant_refs(Vec3(1, 0, 0), 3), VecX::Zero(2));
    for (int trial = 0; trial < 10; ++trial) {
      const VecX z = random_decision(nlp);
      VecX grad;
      std::vector<Eigen::Triplet<double>> trips;
      nlp.cost_quadratic_model(z, grad, trips);
      MatX h = MatX::Zero(nlp.num_vars, nlp.num_vars);
      for (const auto& t : trips) h(t.row(), t.col()) += t.value();
      CHECK((h - h.transpose()).cwiseAbs().maxCoeff() < 1e-9);
      Eigen::SelfAdjointEigenSolver<MatX> eig(h);
      CHECK(eig.eigenvalues().minCoeff() > -1e-9);
    }
  }
}

TEST_CASE("qp subproblem") {
  const LinearInstance lin;
  const NlpProblem nlp = lin.nlp();
  SolverSettings settings;
  settings.step_tolerance = 1e-10;

  SUBCASE("one step solves a linear-quadratic instance exactly") {
    const VecX z0 = VecX::Zero(nlp.num_vars);
    const QpStep step = qp_subproblem(nlp, z0, settings);
    REQUIRE(step.ok);
    CHECK(step.kkt_residual < 1e-8);
    const VecX direct = lin.direct_solution();
    CHECK((z0 + step.dz - direct).lpNorm<Eigen::Infinity>() < 1e-8);
  }

  SUBCASE("zero step at the optimum") {
    const VecX opt = lin.direct_solution();
    const QpStep step = qp_subproblem(nlp, opt, settings);
    REQUIRE(step.ok);
    CHECK(step.dz.lpNorm<Eigen::Infinity>() < 1e-8);
  }
}

TEST_CASE("sqp solve") {
  SUBCASE("warm start at the optimum returns in one iteration") {
    const LinearInstance lin;
    const NlpProblem nlp = lin.nlp();
    SolverSettings settings;
    settings.max_sqp_iters = 10;
    const SqpResult res = sqp_solve(nlp, lin.direct_solution(), settings);
    CHECK(res.stats.iterations == 1);
    CHECK(res.stats.converged);
  }

  SUBCASE("matches the direct KKT solution on the linear instance") {
    const LinearInstance lin;
    const NlpProblem nlp = lin.nlp();
    SolverSettings settings;
    settings.max_sqp_iters = 10;
    settings.step_tolerance = 1e-12;
    const SqpResult res = sqp_solve(nlp, VecX::Zero(nlp.num_vars), settings);
    CHECK((res.solution - lin.direct_solution()).lpNorm<Eigen::Infinity>() < 1e-8);
  }

  SUBCASE("merit is non-increasing across accepted iterates") {
    MpcSetup setup = test_setup(10);
    Obstacle obs;
    obs.center = Vec2(1.6, 0.3);
    obs.radius_object = 0.9;
    obs.radius_robot = 0.7;
    setup.obstacles = {obs};
    VecX x0 = VecX::Zero(8);
    auto refs = constant_refs(Vec3(3, 0, 0), 10);
    for (int k = 0; k <= 10; ++k) {
      refs[static_cast<size_t>(k)].q = Vec3(0.05 * k, 0, 0);
      refs[static_cast<size_t>(k)].qdot = Vec3(0.5, 0, 0);
    }
    const NlpProblem nlp = transcribe(setup, x0, Vec4::Zero(), refs, VecX::Zero(2));
    VecX warm(nlp.num_vars);
    for (int k = 0; k <= 10; ++k) warm.segment(k * 8, 8) = x0;
    warm.tail(4 * 10).setZero();
    SolverSettings settings = setup.settings;
    settings.max_sqp_iters = 80;
    const SqpResult res = sqp_solve(nlp, warm, settings);
    REQUIRE(res.stats.merit_history.size() > 2);
    for (size_t i = 1; i < res.stats.merit_history.size(); ++i) {
      CHECK(res.stats.merit_history[i] <= res.stats.merit_history[i - 1] + 1e-12);
    }
    CHECK_FALSE(res.stats.failed);

    // Converged horizons satisfy the dynamics defects tightly.
    CHECK(nlp.equality_residual(res.solution).lpNorm<Eigen::Infinity>() < 1e-6);
  }

  SUBCASE("bit-for-bit determinism") {
    MpcSetup setup = test_setup(6);
    const NlpProblem nlp = transcribe(setup, VecX::Zero(8), Vec4::Zero(),
                                      constant_refs(Vec3(1, 1, 0), 6), VecX::Zero(2));
    VecX warm = VecX::Zero(nlp.num_vars);
    const SqpResult a = sqp_solve(nlp, warm, setup.settings);
    const SqpResult b = sqp_solve(nlp, warm, setup.settings);
    REQUIRE(a.solution.size() == b.solution.size());
    CHECK(std::memcmp(a.solution.data(), b.solution.data(),
                      sizeof(double) * static_cast<size_t>(a.solution.size())) == 0);
  }
}

TEST_CASE("mpc step") {
  SUBCASE("goal reach on an obstacle-free instance") {
    MpcSetup setup = test_setup(50);
    setup.settings.max_sqp_iters_cold = 60;
    // Feather-weight box penalty: this probes tracking quality, so keep the
    // barrier's interior bias out of the optimum.
    setup.pen_bound = PenaltyParams{1e-6, 0.01};
    PlannerState state;
    state.d = VecX::Zero(2);
    Goal goal;
    goal.position = Vec2(1.2, 0.4);
    goal.theta = 0.0;
    const double initial_err = goal.position.norm();
    const MpcStepResult res = mpc_step(setup, state, Vec4::Zero(), goal, nullptr);
    REQUIRE_FALSE(res.solution.stats.failed);
    const Vec2 final_pos = res.solution.states.col(50).head<2>();
    CHECK((final_pos - goal.position).norm() < 0.1 * initial_err);
  }

  SUBCASE("near-zero input when already at the goal") {
    // Fixture with a strong input cost and a feather-weight box penalty, so
    // the interior bias of the relaxed barrier stays below the tolerance.
    MpcSetup setup = test_setup(20);
    setup.weights.r_u = VecX::Constant(4, 1.0);
    setup.pen_bound = PenaltyParams{1e-6, 0.01};
    setup.settings.max_sqp_iters_cold = 60;
    setup.settings.step_tolerance = 1e-12;

    PlannerState state;
    state.d = VecX::Zero(2);
    Goal goal;
    goal.position = Vec2::Zero();
    goal.theta = 0.0;
    const MpcStepResult res = mpc_step(setup, state, Vec4::Zero(), goal, nullptr);
    REQUIRE_FALSE(res.solution.stats.failed);
    CHECK(res.input.force.lpNorm<Eigen::Infinity>() >= 0.0);
    CHECK(res.solution.inputs.col(0).lpNorm<Eigen::Infinity>() <= 1e-3);
  }

  SUBCASE("warm-shifted resolve takes fewer iterations than a cold start") {
    // Stationary regime: parked near the goal, repeated solves of the same
    // problem. The shifted previous solution is almost the new optimum.
    MpcSetup setup = test_setup(10);
    setup.settings.max_sqp_iters = 400;
    setup.settings.max_sqp_iters_cold = 400;
    setup.settings.step_tolerance = 1e-7;
    PlannerState state;
    state.d = VecX::Zero(2);
    Goal goal;
    goal.position = Vec2::Zero();

    const MpcStepResult cold = mpc_step(setup, state, Vec4::Zero(), goal, nullptr);
    REQUIRE_FALSE(cold.solution.stats.failed);
    REQUIRE(cold.solution.stats.converged);
    const MpcStepResult warm =
        mpc_step(setup, state, Vec4::Zero(), goal, &cold.solution);
    REQUIRE_FALSE(warm.solution.stats.failed);
    REQUIRE(warm.solution.stats.converged);
    CHECK(warm.solution.stats.iterations < cold.solution.stats.iterations);
  }

  SUBCASE("non-finite state triggers the safe stop") {
    MpcSetup setup = test_setup(5);
    PlannerState state;
    state.d = VecX::Zero(2);
    state.object.q.x() = std::numeric_limits<double>::quiet_NaN();
    Goal goal;
    goal.position = Vec2(1, 0);
    const MpcStepResult res = mpc_step(setup, state, Vec4::Zero(), goal, nullptr);
    CHECK(res.solution.stats.failed);
    CHECK(res.input.force.norm() == 0.0);
    CHECK(res.input.slide_rate.norm() == 0.0);
  }
}
