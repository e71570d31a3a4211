#include "copush/runner.hpp"
#include "copush/scenario.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"copush: collaborative-pushing motion planner and simulator"};
  app.require_subcommand(1);

  std::string scenario_path;
  copush::RunOptions options;
  bool disable_adaptive = false;
  bool disable_robot_cbf = false;
  double control_hz = 0.0;

  CLI::App* run = app.add_subcommand("run", "Run a scenario closed-loop");
  run->add_option("scenario", scenario_path, "Scenario JSON file")->required();
  run->add_option("--out", options.out_dir, "Output directory (default $COPUSH_OUT_DIR/<name>)");
  run->add_flag("--disable-adaptive", disable_adaptive, "Freeze the uncertainty estimate");
  run->add_flag("--disable-robot-cbf", disable_robot_cbf,
                "Drop the per-agent obstacle constraints");
  run->add_option("--control-hz", control_hz, "Override the control rate");
  run->add_option("--seed", options.seed, "Recorded in the summary (runs are deterministic)");
  run->add_flag("--svg", options.svg, "Write an overhead SVG plot");
  run->add_flag("--timing", options.timing,
                "Write measured solve times into the CSV (breaks byte-reproducibility)");

  std::vector<std::string> summary_paths;
  std::string compare_csv;
  CLI::App* compare = app.add_subcommand("compare", "Tabulate two or more run summaries");
  compare->add_option("summaries", summary_paths, "summary.json files")->expected(-1);
  compare->add_option("--csv", compare_csv, "Also write the table as CSV");

  std::string validate_path;
  CLI::App* validate = app.add_subcommand("validate", "Check a scenario file");
  validate->add_option("scenario", validate_path, "Scenario JSON file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      if (disable_adaptive) options.adaptive_override = false;
      if (disable_robot_cbf) options.robot_cbf_override = false;
      if (control_hz > 0.0) options.control_hz_override = control_hz;

      const copush::Scenario scenario = copush::parse_scenario(scenario_path);
      const copush::RunSummary result = copush::run_scenario(scenario, options);
      std::cout << "scenario:   " << scenario.name << "\n"
                << "success:    " << (result.success ? "true" : "false") << "\n"
                << "final err:  " << result.metrics.final_position_error << " m, "
                << result.metrics.final_heading_error << " rad\n"
                << "min B obj:  " << result.metrics.min_object_barrier << "\n"
                << "min B rob:  " << result.metrics.min_robot_barrier << "\n"
                << "mean solve: " << result.metrics.mean_solve_ms << " ms\n";
      for (const auto& [kind, path] : result.artifacts) {
        std::cout << kind << ": " << path << "\n";
      }
      return result.exit_code;
    }
    if (compare->parsed()) {
      const copush::Comparison cmp = copush::compare_summaries(summary_paths);
      for (const std::string& w : cmp.warnings) std::cerr << "warning: " << w << "\n";
      std::cout << cmp.text;
      if (!compare_csv.empty()) {
        std::ofstream out(compare_csv);
        out << cmp.csv;
        std::cout << "csv: " << compare_csv << "\n";
      }
      return 0;
    }
    if (validate->parsed()) {
      copush::parse_scenario(validate_path);
      std::cout << "ok: " << validate_path << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
