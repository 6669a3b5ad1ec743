#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "dmpc/cgmres.hpp"
#include "dmpc/multi_agent.hpp"
#include "dmpc/scenario.hpp"
#include "dmpc/trajectory_log.hpp"

namespace dmpc {

enum class RunMode { centralized, decentralized };

std::string to_string(RunMode mode);
RunMode parse_run_mode(const std::string& text);

/// Vehicles, lane-keeping costs and one ellipse per pair (i < j), ids 1, 2, ...
/// in lexicographic pair order.
std::shared_ptr<const MultiAgentProblem> make_problem(const driving::ScenarioConfig& scenario);
SolverConfig solver_config(const driving::ScenarioConfig& scenario);

struct RunOptions {
  std::optional<double> duration;  // overrides the scenario (and thus its hash)
  int workers = 1;
  std::uint64_t seed = 0;
  std::string transcript_path;  // binary dump of every broadcast message
  std::function<void(const SampleRecord&)> on_sample;
};

/// Worker count from DMPC_WORKERS when set, else `fallback`.
int workers_from_env(int fallback);

TrajectoryLog centralized_solve_run(const driving::ScenarioConfig& scenario,
                                    const RunOptions& options = {});
TrajectoryLog decentralized_run(const driving::ScenarioConfig& scenario,
                                const RunOptions& options = {});
TrajectoryLog run_scenario(const driving::ScenarioConfig& scenario, RunMode mode,
                           const RunOptions& options = {});

/// Re-runs the scenario echoed in a log header with the same mode and seed.
TrajectoryLog replay(const TrajectoryLog& log, int workers = 1);

}  // namespace dmpc
