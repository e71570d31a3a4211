#pragma once

#include "copush/closed_loop.hpp"
#include "copush/scenario.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace copush {

struct RunOptions {
  std::string out_dir;  // empty: "<COPUSH_OUT_DIR or runs>/<scenario name>"
  bool svg = false;
  bool timing = false;  // write measured per-step solve times into the CSV
  std::optional<bool> adaptive_override;
  std::optional<bool> robot_cbf_override;
  std::optional<double> control_hz_override;
  unsigned seed = 0;  // recorded in the summary; the pipeline is deterministic
};

struct RunSummary {
  bool success = false;
  Summary metrics;
  std::map<std::string, std::string> artifacts;  // kind -> path
  int exit_code = 1;
};

/// Runs a scenario and writes trajectory CSV + summary JSON (+ optional SVG).
RunSummary run_scenario(const Scenario& scenario, const RunOptions& options);

/// Stable-schema trajectory CSV. Per-step solve times are written as 0 unless
/// `timing` is set, keeping default logs byte-identical across repeated runs.
void write_trajectory_csv(const TrajectoryLog& log, const std::string& path,
                          bool timing);

std::string summary_json_text(const Scenario& scenario, const RunOptions& options,
                              const RunSummary& result);

struct Comparison {
  std::string text;
  std::string csv;
  std::vector<std::string> warnings;
};

/// Side-by-side metric table from two or more summary JSON files.
/// Throws std::invalid_argument when fewer than two paths are given.
Comparison compare_summaries(const std::vector<std::string>& summary_paths);

}  // namespace copush
