#include "copush/scenario.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace copush {

namespace {

using Json = nlohmann::ordered_json;

[[noreturn]] void fail(const std::string& msg) {
  throw std::runtime_error("scenario: " + msg);
}

const Json& require(const Json& j, const std::string& key, const std::string& ctx) {
  if (!j.contains(key)) {
    fail("missing field '" + (ctx.empty() ? key : ctx + "." + key) + "'");
  }
  return j.at(key);
}

double number(const Json& j, const std::string& where) {
  if (!j.is_number()) fail("field '" + where + "' must be a number");
  return j.get<double>();
}

Vec2 vec2(const Json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2) fail("field '" + where + "' must be [x, y]");
  return {number(j[0], where), number(j[1], where)};
}

Vec3 vec3(const Json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3) fail("field '" + where + "' must have 3 entries");
  return {number(j[0], where), number(j[1], where), number(j[2], where)};
}

Vec4 vec4(const Json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 4) fail("field '" + where + "' must have 4 entries");
  return {number(j[0], where), number(j[1], where), number(j[2], where),
          number(j[3], where)};
}

Vec6 vec6(const Json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 6) fail("field '" + where + "' must have 6 entries");
  Vec6 v;
  for (int i = 0; i < 6; ++i) v(i) = number(j[static_cast<size_t>(i)], where);
  return v;
}

/// Scalar broadcast or explicit per-entry array.
VecX vecn(const Json& j, int n, const std::string& where) {
  if (j.is_number()) return VecX::Constant(n, j.get<double>());
  if (!j.is_array() || static_cast<int>(j.size()) != n) {
    fail("field '" + where + "' must be a scalar or an array of length " +
         std::to_string(n));
  }
  VecX v(n);
  for (int i = 0; i < n; ++i) v(i) = number(j[static_cast<size_t>(i)], where);
  return v;
}

double get_or(const Json& j, const std::string& key, double fallback) {
  return j.contains(key) ? j.at(key).get<double>() : fallback;
}

double box_inertia(double mass, const Vec2& half_extents) {
  const double w = 2.0 * half_extents.x();
  const double h = 2.0 * half_extents.y();
  return mass * (w * w + h * h) / 12.0;
}

Json to_json(const Vec2& v) { return Json::array({v.x(), v.y()}); }
Json to_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }
Json to_json(const Vec4& v) { return Json::array({v(0), v(1), v(2), v(3)}); }

Json to_json(const VecX& v) {
  Json a = Json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

}  // namespace

AdaptiveModel Scenario::planner_model() const {
  AdaptiveModel model;
  model.nominal = nominal;
  model.v_eps = v_eps;
  model.contacts.reserve(agents.size());
  for (const AgentSpec& a : agents) model.contacts.push_back(a.contact);
  return model;
}

MpcSetup Scenario::mpc_setup(const std::vector<Obstacle>& current_obstacles) const {
  MpcSetup setup;
  setup.model = planner_model();
  setup.obstacles = current_obstacles;
  setup.robot_cbf_enabled = ablation.robot_cbf_enabled;
  setup.weights = weights;
  setup.pen_cbf = pen_cbf;
  setup.pen_clf = pen_clf;
  setup.pen_bound = pen_bound;
  setup.gains = gains;
  setup.limits = limits;
  setup.lambda = lambda;
  setup.k_d_diag = k_d_diag;
  setup.settings = solver;
  return setup;
}

Scenario parse_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario_text(buf.str(), path);
}

Scenario parse_scenario_text(const std::string& text, const std::string& origin) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const std::exception& e) {
    fail("malformed file '" + origin + "': " + e.what());
  }

  Scenario s;
  s.schema_version = static_cast<int>(get_or(j, "schema_version", 1));
  s.name = require(j, "name", "").get<std::string>();

  const Json& obj = require(j, "object", "");
  s.nominal.half_extents =
      obj.contains("half_extents") ? vec2(obj.at("half_extents"), "object.half_extents")
                                   : Vec2(0.5, 0.5);
  const Json& nom = require(obj, "nominal", "object");
  s.nominal.mass = number(require(nom, "mass", "object.nominal"), "object.nominal.mass");
  s.nominal.inertia_p =
      get_or(nom, "inertia_p", box_inertia(s.nominal.mass, s.nominal.half_extents));
  s.nominal.com_offset = Vec2::Zero();

  s.plant.params = s.nominal;
  if (obj.contains("true")) {
    const Json& tru = obj.at("true");
    s.plant.params.mass = get_or(tru, "mass", s.nominal.mass);
    s.plant.params.com_offset = tru.contains("com_offset")
                                    ? vec2(tru.at("com_offset"), "object.true.com_offset")
                                    : Vec2::Zero();
    const double default_inertia =
        box_inertia(s.plant.params.mass, s.nominal.half_extents) +
        s.plant.params.mass * s.plant.params.com_offset.squaredNorm();
    s.plant.params.inertia_p = get_or(tru, "inertia_p", default_inertia);
  }

  if (j.contains("ground")) {
    const Json& g = j.at("ground");
    s.plant.mu = get_or(g, "mu", 0.4);
    s.plant.rot_friction = get_or(g, "rot_friction", 0.0);
    s.plant.v_stop = get_or(g, "v_stop", 0.01);
    s.plant.gravity = get_or(g, "gravity", 9.81);
  }

  if (j.contains("plant")) {
    const Json& p = j.at("plant");
    const std::string kind = p.contains("kind") ? p.at("kind").get<std::string>() : "coulomb";
    if (kind == "coulomb") {
      s.plant.kind = TruePlant::Kind::coulomb;
    } else if (kind == "matched") {
      s.plant.kind = TruePlant::Kind::matched;
      s.plant.psi_true = vec4(require(p, "psi_true", "plant"), "plant.psi_true");
    } else {
      fail("field 'plant.kind' must be 'coulomb' or 'matched'");
    }
  }

  const Json& agents = require(j, "agents", "");
  if (!agents.is_array() || agents.empty()) fail("field 'agents' must be a non-empty array");
  for (size_t i = 0; i < agents.size(); ++i) {
    const std::string ctx = "agents[" + std::to_string(i) + "]";
    const Json& a = agents[i];
    AgentSpec spec;
    spec.contact.origin = vec2(require(a, "origin", ctx), ctx + ".origin");
    spec.contact.normal = vec2(require(a, "normal", ctx), ctx + ".normal");
    spec.contact.tangent = a.contains("tangent")
                               ? vec2(a.at("tangent"), ctx + ".tangent")
                               : perp(spec.contact.normal);
    const Vec2 range = vec2(require(a, "d_range", ctx), ctx + ".d_range");
    spec.contact.d_lower = range.x();
    spec.contact.d_upper = range.y();
    spec.contact.standoff = get_or(a, "standoff", 0.35);
    spec.d_init = get_or(a, "d_init", 0.0);
    s.agents.push_back(spec);
  }

  if (j.contains("obstacles")) {
    const Json& obstacles = j.at("obstacles");
    if (!obstacles.is_array()) fail("field 'obstacles' must be an array");
    for (size_t i = 0; i < obstacles.size(); ++i) {
      const std::string ctx = "obstacles[" + std::to_string(i) + "]";
      const Json& o = obstacles[i];
      ObstacleScript script;
      script.base.center = vec2(require(o, "center", ctx), ctx + ".center");
      script.base.radius_object =
          number(require(o, "radius_object", ctx), ctx + ".radius_object");
      script.base.radius_robot = get_or(o, "radius_robot", script.base.radius_object);
      if (o.contains("waypoints")) {
        for (size_t w = 0; w < o.at("waypoints").size(); ++w) {
          const Json& wp = o.at("waypoints")[w];
          if (!wp.is_array() || wp.size() != 3) {
            fail("field '" + ctx + ".waypoints' entries must be [t, x, y]");
          }
          script.waypoints.emplace_back(wp[0].get<double>(),
                                        Vec2(wp[1].get<double>(), wp[2].get<double>()));
        }
      }
      s.obstacles.push_back(script);
    }
  }

  const Json& goal = require(j, "goal", "");
  s.goal.position = vec2(require(goal, "position", "goal"), "goal.position");
  s.goal.theta = get_or(goal, "theta", 0.0);
  s.goal.v_avg = get_or(goal, "v_avg", 0.5);
  s.goal.omega_avg = get_or(goal, "omega_avg", 0.8);

  if (j.contains("limits")) {
    s.limits.f_max = get_or(j.at("limits"), "f_max", 40.0);
    s.limits.v_max = get_or(j.at("limits"), "v_max", 1.0);
  }

  const Json gains = j.contains("gains") ? j.at("gains") : Json::object();
  s.lambda = get_or(gains, "lambda", 3.0);
  s.k_d_diag = gains.contains("k_d") ? vec3(gains.at("k_d"), "gains.k_d") : Vec3(3, 3, 3);
  s.v_eps = get_or(gains, "v_eps", 0.01);
  s.uncertainty.gain = gains.contains("gamma_psi")
                           ? vec4(gains.at("gamma_psi"), "gains.gamma_psi")
                           : Vec4(300, 200, 100, 100);
  s.uncertainty.psi = gains.contains("psi_0") ? vec4(gains.at("psi_0"), "gains.psi_0")
                                              : Vec4::Zero();
  // Default lower bounds keep the adapted inertia safely positive.
  const Vec4 psi_min_default(std::max(-20.0, -0.8 * s.nominal.mass),
                             std::max(-5.0, -0.8 * s.nominal.inertia_p), 0.0, 0.0);
  s.uncertainty.psi_min = gains.contains("psi_min")
                              ? vec4(gains.at("psi_min"), "gains.psi_min")
                              : psi_min_default;
  s.uncertainty.psi_max = gains.contains("psi_max")
                              ? vec4(gains.at("psi_max"), "gains.psi_max")
                              : Vec4(20, 5, 60, 20);
  if (gains.contains("cbf")) {
    const Json& cbf = gains.at("cbf");
    s.gains.alpha_object = get_or(cbf, "alpha_object", 4.0);
    s.gains.beta_object = get_or(cbf, "beta_object", 4.0);
    s.gains.alpha_robot = get_or(cbf, "alpha_robot", 4.0);
  }

  const int n = s.num_agents();
  s.weights = OcpWeights::defaults(n);
  if (j.contains("weights")) {
    const Json& w = j.at("weights");
    if (w.contains("q_f")) s.weights.q_f = vec6(w.at("q_f"), "weights.q_f");
    if (w.contains("q_xb")) s.weights.q_xb = vec6(w.at("q_xb"), "weights.q_xb");
    if (w.contains("q_d")) s.weights.q_d = vecn(w.at("q_d"), n, "weights.q_d");
    if (w.contains("r_u")) s.weights.r_u = vecn(w.at("r_u"), 2 * n, "weights.r_u");
  }

  if (j.contains("penalties")) {
    const Json& p = j.at("penalties");
    auto parse_pen = [&](const char* key, PenaltyParams fallback) {
      if (!p.contains(key)) return fallback;
      const Vec2 v = vec2(p.at(key), std::string("penalties.") + key);
      return PenaltyParams{v.x(), v.y()};
    };
    s.pen_cbf = parse_pen("cbf", s.pen_cbf);
    s.pen_clf = parse_pen("clf", s.pen_clf);
    s.pen_bound = parse_pen("bound", s.pen_bound);
  }

  if (j.contains("solver")) {
    const Json& so = j.at("solver");
    s.solver.horizon_steps = static_cast<int>(get_or(so, "horizon_steps", 50));
    s.solver.dt = get_or(so, "dt", 0.1);
    s.solver.max_sqp_iters = static_cast<int>(get_or(so, "max_sqp_iters", 3));
    s.solver.max_sqp_iters_cold =
        static_cast<int>(get_or(so, "max_sqp_iters_cold", 60));
    s.solver.kkt_regularization = get_or(so, "kkt_regularization", 1e-8);
    s.solver.merit_penalty_weight = get_or(so, "merit_weight", 1500.0);
    s.solver.linesearch_shrink = get_or(so, "linesearch_shrink", 0.5);
    s.solver.linesearch_max_trials =
        static_cast<int>(get_or(so, "linesearch_max_trials", 10));
    s.solver.step_tolerance = get_or(so, "step_tolerance", 1e-8);
  }

  if (j.contains("sim")) {
    const Json& si = j.at("sim");
    s.sim.dt = get_or(si, "dt", 1e-3);
    s.sim.time_limit = get_or(si, "time_limit", 120.0);
    s.sim.control_hz = get_or(si, "control_hz", 50.0);
    s.sim.success_pos_tol = get_or(si, "success_pos_tol", 0.1);
    s.sim.success_theta_tol = get_or(si, "success_theta_tol", 0.1);
    s.sim.success_hold = get_or(si, "success_hold", 1.0);
    s.sim.refresh_ticks = static_cast<int>(get_or(si, "refresh_ticks", 0));
  }

  if (j.contains("initial")) {
    const Json& init = j.at("initial");
    if (init.contains("q")) s.initial.q = vec3(init.at("q"), "initial.q");
    if (init.contains("qdot")) s.initial.qdot = vec3(init.at("qdot"), "initial.qdot");
  }

  if (j.contains("ablation")) {
    const Json& ab = j.at("ablation");
    if (ab.contains("adaptive_enabled"))
      s.ablation.adaptive_enabled = ab.at("adaptive_enabled").get<bool>();
    if (ab.contains("robot_cbf_enabled"))
      s.ablation.robot_cbf_enabled = ab.at("robot_cbf_enabled").get<bool>();
  }

  validate_scenario(s);
  return s;
}

void validate_scenario(const Scenario& s) {
  if (s.schema_version != 1) fail("field 'schema_version' must be 1");
  if (s.name.empty()) fail("field 'name' must be non-empty");
  if (!s.nominal.valid()) fail("field 'object.nominal' is not a valid rigid body");
  if (!s.plant.params.valid()) fail("field 'object.true' is not a valid rigid body");
  if (s.plant.mu < 0.0) fail("field 'ground.mu' must be >= 0");
  if (s.plant.v_stop <= 0.0) fail("field 'ground.v_stop' must be > 0");
  if (s.agents.empty()) fail("field 'agents' must contain at least one agent");
  for (size_t i = 0; i < s.agents.size(); ++i) {
    const AgentSpec& a = s.agents[i];
    const std::string ctx = "agents[" + std::to_string(i) + "]";
    if (!a.contact.valid()) {
      fail("field '" + ctx + "' has an invalid contact frame (unit vectors, orthogonality, ranges)");
    }
    if (a.d_init < a.contact.d_lower || a.d_init > a.contact.d_upper) {
      fail("field '" + ctx + ".d_init' outside d_range");
    }
  }
  for (size_t i = 0; i < s.obstacles.size(); ++i) {
    const std::string ctx = "obstacles[" + std::to_string(i) + "]";
    if (!s.obstacles[i].base.valid()) fail("field '" + ctx + "' radii must be > 0");
    const auto& wp = s.obstacles[i].waypoints;
    for (size_t k = 0; k + 1 < wp.size(); ++k) {
      if (wp[k + 1].first < wp[k].first) {
        fail("field '" + ctx + ".waypoints' times must be non-decreasing");
      }
    }
  }
  if (!s.goal.valid()) fail("field 'goal' rates v_avg/omega_avg must be > 0");
  if (!s.gains.valid()) {
    fail("field 'gains.cbf' must give negative real characteristic roots "
         "(alpha > 0, beta > 0, beta^2 >= 4*alpha) and alpha_robot > 0");
  }
  if (!s.pen_cbf.valid() || !s.pen_clf.valid() || !s.pen_bound.valid()) {
    fail("field 'penalties' entries must be positive [rho, eps]");
  }
  if (s.limits.f_max <= 0.0 || s.limits.v_max <= 0.0) {
    fail("field 'limits' must be positive");
  }
  if (s.lambda <= 0.0) fail("field 'gains.lambda' must be > 0");
  if (!(s.k_d_diag.array() >= 0.0).all()) fail("field 'gains.k_d' must be >= 0");
  if (!s.uncertainty.valid()) {
    fail("field 'gains' uncertainty bounds/gain invalid (gain > 0, psi_min <= psi_0 <= psi_max)");
  }
  if (s.nominal.mass + s.uncertainty.psi_min(0) <= 0.0) {
    fail("field 'gains.psi_min[0]' would allow a non-positive adapted mass");
  }
  if (s.nominal.inertia_p + s.uncertainty.psi_min(1) <= 0.0) {
    fail("field 'gains.psi_min[1]' would allow a non-positive adapted inertia");
  }
  if (s.v_eps <= 0.0) fail("field 'gains.v_eps' must be > 0");
  if (s.weights.q_d.size() != s.num_agents() ||
      s.weights.r_u.size() != 2 * s.num_agents()) {
    fail("field 'weights' q_d/r_u sized inconsistently with agents");
  }
  if ((s.weights.q_f.array() < 0.0).any() || (s.weights.q_xb.array() < 0.0).any() ||
      (s.weights.q_d.array() < 0.0).any() || !(s.weights.r_u.array() > 0.0).all()) {
    fail("field 'weights' must be nonnegative (r_u strictly positive)");
  }
  if (s.solver.horizon_steps < 1) fail("field 'solver.horizon_steps' must be >= 1");
  if (s.solver.dt <= 0.0) fail("field 'solver.dt' must be > 0");
  if (s.solver.max_sqp_iters < 1 || s.solver.max_sqp_iters_cold < 1) {
    fail("field 'solver.max_sqp_iters' must be >= 1");
  }
  if (s.solver.linesearch_shrink <= 0.0 || s.solver.linesearch_shrink >= 1.0) {
    fail("field 'solver.linesearch_shrink' must be in (0, 1)");
  }
  if (s.sim.dt <= 0.0 || s.sim.control_hz <= 0.0 || s.sim.time_limit <= 0.0) {
    fail("field 'sim' dt/control_hz/time_limit must be > 0");
  }
  if (1.0 / s.sim.control_hz < s.sim.dt - 1e-12) {
    fail("field 'sim.control_hz' period must be >= sim.dt");
  }
  if (s.sim.refresh_ticks < 0) fail("field 'sim.refresh_ticks' must be >= 0");
  if (!s.initial.q.allFinite() || !s.initial.qdot.allFinite()) {
    fail("field 'initial' must be finite");
  }
}

std::string serialize_scenario(const Scenario& s) {
  Json j;
  j["schema_version"] = s.schema_version;
  j["name"] = s.name;

  Json obj;
  obj["half_extents"] = to_json(s.nominal.half_extents);
  obj["nominal"] = {{"mass", s.nominal.mass}, {"inertia_p", s.nominal.inertia_p}};
  obj["true"] = {{"mass", s.plant.params.mass},
                 {"inertia_p", s.plant.params.inertia_p},
                 {"com_offset", to_json(s.plant.params.com_offset)}};
  j["object"] = obj;

  j["ground"] = {{"mu", s.plant.mu},
                 {"rot_friction", s.plant.rot_friction},
                 {"v_stop", s.plant.v_stop},
                 {"gravity", s.plant.gravity}};
  if (s.plant.kind == TruePlant::Kind::matched) {
    j["plant"] = {{"kind", "matched"}, {"psi_true", to_json(s.plant.psi_true)}};
  } else {
    j["plant"] = {{"kind", "coulomb"}};
  }

  Json agents = Json::array();
  for (const AgentSpec& a : s.agents) {
    Json e;
    e["origin"] = to_json(a.contact.origin);
    e["normal"] = to_json(a.contact.normal);
    e["tangent"] = to_json(a.contact.tangent);
    e["d_range"] = Json::array({a.contact.d_lower, a.contact.d_upper});
    e["standoff"] = a.contact.standoff;
    e["d_init"] = a.d_init;
    agents.push_back(e);
  }
  j["agents"] = agents;

  Json obstacles = Json::array();
  for (const ObstacleScript& o : s.obstacles) {
    Json e;
    e["center"] = to_json(o.base.center);
    e["radius_object"] = o.base.radius_object;
    e["radius_robot"] = o.base.radius_robot;
    if (!o.waypoints.empty()) {
      Json wps = Json::array();
      for (const auto& [t, p] : o.waypoints) wps.push_back(Json::array({t, p.x(), p.y()}));
      e["waypoints"] = wps;
    }
    obstacles.push_back(e);
  }
  j["obstacles"] = obstacles;

  j["goal"] = {{"position", to_json(s.goal.position)},
               {"theta", s.goal.theta},
               {"v_avg", s.goal.v_avg},
               {"omega_avg", s.goal.omega_avg}};
  j["limits"] = {{"f_max", s.limits.f_max}, {"v_max", s.limits.v_max}};
  j["gains"] = {{"lambda", s.lambda},
                {"k_d", to_json(s.k_d_diag)},
                {"gamma_psi", to_json(s.uncertainty.gain)},
                {"psi_0", to_json(s.uncertainty.psi)},
                {"psi_min", to_json(s.uncertainty.psi_min)},
                {"psi_max", to_json(s.uncertainty.psi_max)},
                {"v_eps", s.v_eps},
                {"cbf",
                 {{"alpha_object", s.gains.alpha_object},
                  {"beta_object", s.gains.beta_object},
                  {"alpha_robot", s.gains.alpha_robot}}}};
  j["weights"] = {{"q_f", to_json(VecX(s.weights.q_f))},
                  {"q_xb", to_json(VecX(s.weights.q_xb))},
                  {"q_d", to_json(s.weights.q_d)},
                  {"r_u", to_json(s.weights.r_u)}};
  j["penalties"] = {{"cbf", Json::array({s.pen_cbf.rho, s.pen_cbf.eps})},
                    {"clf", Json::array({s.pen_clf.rho, s.pen_clf.eps})},
                    {"bound", Json::array({s.pen_bound.rho, s.pen_bound.eps})}};
  j["solver"] = {{"horizon_steps", s.solver.horizon_steps},
                 {"dt", s.solver.dt},
                 {"max_sqp_iters", s.solver.max_sqp_iters},
                 {"max_sqp_iters_cold", s.solver.max_sqp_iters_cold},
                 {"kkt_regularization", s.solver.kkt_regularization},
                 {"merit_weight", s.solver.merit_penalty_weight},
                 {"linesearch_shrink", s.solver.linesearch_shrink},
                 {"linesearch_max_trials", s.solver.linesearch_max_trials},
                 {"step_tolerance", s.solver.step_tolerance}};
  j["sim"] = {{"dt", s.sim.dt},
              {"time_limit", s.sim.time_limit},
              {"control_hz", s.sim.control_hz},
              {"success_pos_tol", s.sim.success_pos_tol},
              {"success_theta_tol", s.sim.success_theta_tol},
              {"success_hold", s.sim.success_hold},
              {"refresh_ticks", s.sim.refresh_ticks}};
  j["initial"] = {{"q", to_json(s.initial.q)}, {"qdot", to_json(s.initial.qdot)}};
  j["ablation"] = {{"adaptive_enabled", s.ablation.adaptive_enabled},
                   {"robot_cbf_enabled", s.ablation.robot_cbf_enabled}};
  return j.dump(2) + "\n";
}

}  // namespace copush
