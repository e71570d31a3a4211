#include "copush/runner.hpp"

#include "copush/svg.hpp"

#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace copush {

namespace {

using Json = nlohmann::ordered_json;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

Json finite_or_null(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

Json metrics_json(const Summary& m) {
  Json j;
  j["success"] = m.success;
  j["solver_failure"] = m.solver_failure;
  j["duration_s"] = m.duration;
  j["time_to_goal_s"] = finite_or_null(m.time_to_goal);
  j["final_position_error_m"] = m.final_position_error;
  j["final_heading_error_rad"] = m.final_heading_error;
  j["path_length_m"] = m.path_length;
  j["peak_force_n"] = m.peak_force;
  j["mean_solve_ms"] = m.mean_solve_ms;
  j["max_solve_ms"] = m.max_solve_ms;
  j["min_object_barrier_m"] = finite_or_null(m.min_object_barrier);
  j["min_robot_barrier_m"] = finite_or_null(m.min_robot_barrier);
  j["min_h_clf"] = finite_or_null(m.min_h_clf);
  j["mean_signed_offset_m"] = m.mean_signed_offset;
  j["ticks"] = m.ticks;
  return j;
}

}  // namespace

void write_trajectory_csv(const TrajectoryLog& log, const std::string& path,
                          bool timing) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write trajectory csv: " + path);

  out << "t,x,y,theta,vx,vy,wz";
  for (int i = 1; i <= log.num_agents; ++i) out << ",d_" << i;
  for (int i = 1; i <= log.num_agents; ++i) out << ",f_" << i;
  for (int j = 1; j <= log.num_obstacles; ++j) out << ",B_obj_" << j;
  for (int i = 1; i <= log.num_agents; ++i) {
    for (int j = 1; j <= log.num_obstacles; ++j) out << ",B_r_" << i << "_" << j;
  }
  out << ",h_clf,psi_1,psi_2,psi_3,psi_4,sqp_iters,solve_ms\n";

  for (const TickRecord& tick : log.ticks) {
    out << fmt(tick.t) << ',' << fmt(tick.object.q.x()) << ',' << fmt(tick.object.q.y())
        << ',' << fmt(tick.object.q.z()) << ',' << fmt(tick.object.qdot.x()) << ','
        << fmt(tick.object.qdot.y()) << ',' << fmt(tick.object.qdot.z());
    for (int i = 0; i < log.num_agents; ++i) out << ',' << fmt(tick.d(i));
    for (int i = 0; i < log.num_agents; ++i) out << ',' << fmt(tick.force(i));
    for (int j = 0; j < log.num_obstacles; ++j) out << ',' << fmt(tick.barrier_object(j));
    for (int i = 0; i < log.num_agents; ++i) {
      for (int j = 0; j < log.num_obstacles; ++j) {
        out << ',' << fmt(tick.barrier_robot(i * log.num_obstacles + j));
      }
    }
    out << ',' << fmt(tick.h_clf);
    for (int k = 0; k < 4; ++k) out << ',' << fmt(tick.psi(k));
    out << ',' << tick.sqp_iters << ',' << fmt(timing ? tick.solve_ms : 0.0) << '\n';
  }
}

std::string summary_json_text(const Scenario& scenario, const RunOptions& options,
                              const RunSummary& result) {
  Json j;
  j["schema_version"] = 1;
  j["scenario"] = scenario.name;
  j["flags"] = {{"adaptive_enabled",
                 options.adaptive_override.value_or(scenario.ablation.adaptive_enabled)},
                {"robot_cbf_enabled",
                 options.robot_cbf_override.value_or(scenario.ablation.robot_cbf_enabled)},
                {"control_hz", options.control_hz_override.value_or(scenario.sim.control_hz)},
                {"seed", options.seed}};
  j["metrics"] = metrics_json(result.metrics);
  Json artifacts;
  for (const auto& [kind, path] : result.artifacts) artifacts[kind] = path;
  j["artifacts"] = artifacts;
  return j.dump(2) + "\n";
}

RunSummary run_scenario(const Scenario& scenario, const RunOptions& options) {
  Scenario sc = scenario;
  if (options.adaptive_override) sc.ablation.adaptive_enabled = *options.adaptive_override;
  if (options.robot_cbf_override) sc.ablation.robot_cbf_enabled = *options.robot_cbf_override;
  if (options.control_hz_override) sc.sim.control_hz = *options.control_hz_override;

  std::string out_dir = options.out_dir;
  if (out_dir.empty()) {
    const char* env = std::getenv("COPUSH_OUT_DIR");
    out_dir = (env != nullptr && *env != '\0') ? env : "runs";
    out_dir += "/" + sc.name;
  }
  std::filesystem::create_directories(out_dir);

  const TrajectoryLog log = run_closed_loop(sc);

  RunSummary result;
  result.metrics = metrics(log);
  result.success = result.metrics.success;

  const std::string csv_path = out_dir + "/trajectory.csv";
  write_trajectory_csv(log, csv_path, options.timing);
  result.artifacts["trajectory_csv"] = csv_path;

  if (options.svg) {
    const std::string svg_path = out_dir + "/overhead.svg";
    write_overhead_svg(sc, log, svg_path);
    result.artifacts["plot_svg"] = svg_path;
  }

  const std::string summary_path = out_dir + "/summary.json";
  result.artifacts["summary_json"] = summary_path;
  result.exit_code = (result.success && !result.metrics.solver_failure) ? 0 : 1;

  std::ofstream out(summary_path);
  if (!out) throw std::runtime_error("cannot write summary: " + summary_path);
  out << summary_json_text(sc, options, result);
  return result;
}

Comparison compare_summaries(const std::vector<std::string>& summary_paths) {
  if (summary_paths.size() < 2) {
    throw std::invalid_argument("compare: need at least two summary files");
  }

  std::vector<Json> summaries;
  std::vector<std::string> labels;
  for (const std::string& path : summary_paths) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("compare: cannot open " + path);
    summaries.push_back(Json::parse(in));
    labels.push_back(summaries.back().value("scenario", path));
  }

  Comparison cmp;
  for (size_t i = 1; i < labels.size(); ++i) {
    if (labels[i] != labels[0]) {
      cmp.warnings.push_back("compared runs come from different scenarios: '" +
                             labels[0] + "' vs '" + labels[i] + "'");
    }
  }

  const std::vector<std::string> keys = {
      "success",
      "solver_failure",
      "duration_s",
      "time_to_goal_s",
      "final_position_error_m",
      "final_heading_error_rad",
      "path_length_m",
      "peak_force_n",
      "mean_solve_ms",
      "min_object_barrier_m",
      "min_robot_barrier_m",
      "mean_signed_offset_m"};

  std::ostringstream text;
  std::ostringstream csv;
  text << "metric";
  csv << "metric";
  for (size_t c = 0; c < summaries.size(); ++c) {
    text << "\t" << labels[c] << "#" << c;
    csv << ',' << labels[c] << "#" << c;
  }
  text << '\n';
  csv << '\n';
  for (const std::string& key : keys) {
    text << key;
    csv << key;
    for (const Json& s : summaries) {
      std::string cell = "n/a";
      if (s.contains("metrics") && s.at("metrics").contains(key)) {
        const Json& v = s.at("metrics").at(key);
        cell = v.is_null() ? "null" : v.dump();
      }
      text << '\t' << cell;
      csv << ',' << cell;
    }
    text << '\n';
    csv << '\n';
  }
  cmp.text = text.str();
  cmp.csv = csv.str();
  return cmp;
}

}  // namespace copush
