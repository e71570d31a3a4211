#pragma once

#include "copush/scenario.hpp"
#include "copush/sim.hpp"

#include <string>

namespace copush {

/// Static overhead plot: object and agent paths, obstacle barrier circles,
/// start and goal markers.
void write_overhead_svg(const Scenario& scenario, const TrajectoryLog& log,
                        const std::string& path);

}  // namespace copush
