#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dmpc/types.hpp"

namespace dmpc {

/// Everything logged for one sample time of a multi-agent run.
struct SampleRecord {
  double time = 0.0;
  std::vector<Vector> states;   // per agent, at `time`
  std::vector<Vector> inputs;   // first control applied over [time, time + dt)
  std::vector<double> gaps;     // per constraint, in problem order
  std::vector<std::uint8_t> flags;  // per (constraint, participant), participant-major within a constraint
  std::vector<double> residuals;    // per agent, scaled residual of the problem that moved it
  std::vector<int> gmres_iters;     // per agent
  std::vector<double> multiplier_errors;  // per agent, max |lambda - W_z/z^4| over its rows
  std::vector<double> wall_times;   // per agent [s]
  double wall_total = 0.0;          // all solves of the sample [s]
  std::vector<std::string> warnings;
};

}  // namespace dmpc
