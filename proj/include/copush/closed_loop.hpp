#pragma once

#include "copush/scenario.hpp"
#include "copush/sim.hpp"

namespace copush {

/// Runs the full loop: adapt, plan, actuate, integrate. Samples one record
/// per control period. Terminates on the time limit, on a held success
/// condition, or on a hard solver failure (truncated log, failure flag).
TrajectoryLog run_closed_loop(const Scenario& scenario);

}  // namespace copush
