#include "dmpc/runner.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>

#include "dmpc/centralized.hpp"
#include "dmpc/decentral.hpp"
#include "dmpc/driving.hpp"
#include "dmpc/errors.hpp"

#ifndef DMPC_VERSION
#define DMPC_VERSION "0.0.0"
#endif

namespace dmpc {

using driving::ScenarioConfig;

std::string to_string(RunMode mode) {
  return mode == RunMode::centralized ? "centralized" : "decentralized";
}

RunMode parse_run_mode(const std::string& text) {
  if (text == "centralized") return RunMode::centralized;
  if (text == "decentralized") return RunMode::decentralized;
  throw ConfigError({"unknown mode '" + text + "' (expected centralized or decentralized)"});
}

std::shared_ptr<const MultiAgentProblem> make_problem(const ScenarioConfig& scenario) {
  scenario.validate();
  auto pb = std::make_shared<MultiAgentProblem>();
  const auto vehicle = std::make_shared<driving::VehicleModel>(scenario.road_curvature);
  const int n = static_cast<int>(scenario.agents.size());
  for (const auto& a : scenario.agents) {
    pb->dynamics.push_back(vehicle);
    pb->costs.push_back(std::make_shared<driving::LaneKeepCost>(a.cost, scenario.road_curvature));
    pb->initial_states.push_back(a.start.to_vector());
    pb->nominal_inputs.push_back(driving::trim_input(a.cost).to_vector());
  }
  int id = 1;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      pb->constraints.push_back(
          std::make_shared<driving::EllipseConstraint>(id++, i, j, scenario.ellipse));
  pb->grid = HorizonGrid(scenario.horizon_T, scenario.steps_M);
  pb->barrier_weight = scenario.wz;
  pb->activation_threshold = scenario.hlim;
  pb->hysteresis = scenario.hysteresis;
  pb->validate();
  return pb;
}

SolverConfig solver_config(const ScenarioConfig& scenario) {
  SolverConfig cfg = scenario.solver;
  cfg.sample_time = scenario.sample_dt;
  cfg.validate();
  return cfg;
}

int workers_from_env(int fallback) {
  const char* env = std::getenv("DMPC_WORKERS");
  if (env == nullptr || *env == '\0') return fallback;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (*end != '\0' || v < 1 || v > 1024)
    throw ConfigError({"DMPC_WORKERS must be an integer in [1, 1024], got '" + std::string(env) + "'"});
  return static_cast<int>(v);
}

namespace {

ScenarioConfig effective(const ScenarioConfig& scenario, const RunOptions& options) {
  ScenarioConfig cfg = scenario;
  if (options.duration) cfg.duration = *options.duration;
  cfg.validate();
  return cfg;
}

TrajectoryLog make_log(const ScenarioConfig& cfg, const MultiAgentProblem& pb, RunMode mode,
                       std::uint64_t seed) {
  TrajectoryLog log;
  auto& h = log.header;
  h.mode = to_string(mode);
  h.scenario_hash = cfg.hash();
  h.code_version = DMPC_VERSION;
  h.seed = mode == RunMode::decentralized ? seed : 0;
  h.sample_time = cfg.sample_dt;
  h.agent_count = pb.agent_count();
  h.state_names = {"s", "y", "theta"};
  h.input_names = {"v", "omega"};
  for (const auto& c : pb.constraints) h.constraints.emplace_back(c->id(), c->participants());
  h.config = cfg.to_json();
  return log;
}

void record(TrajectoryLog& log, SampleRecord rec, const RunOptions& options) {
  if (options.on_sample) options.on_sample(rec);
  log.samples.push_back(std::move(rec));
}

}  // namespace

TrajectoryLog centralized_solve_run(const ScenarioConfig& scenario, const RunOptions& options) {
  const ScenarioConfig cfg = effective(scenario, options);
  const auto pb = make_problem(cfg);
  const SolverConfig solver = solver_config(cfg);
  TrajectoryLog log = make_log(cfg, *pb, RunMode::centralized, options.seed);

  CentralizedController ctl(pb, solver);
  ctl.initialize(0.0);
  const long samples = cfg.sample_count();
  for (long k = 0; k < samples; ++k)
    record(log, ctl.step(static_cast<double>(k) * solver.sample_time), options);
  return log;
}

TrajectoryLog decentralized_run(const ScenarioConfig& scenario, const RunOptions& options) {
  const ScenarioConfig cfg = effective(scenario, options);
  const auto pb = make_problem(cfg);
  const SolverConfig solver = solver_config(cfg);
  TrajectoryLog log = make_log(cfg, *pb, RunMode::decentralized, options.seed);

  std::ofstream transcript;
  if (!options.transcript_path.empty()) {
    transcript.open(options.transcript_path, std::ios::binary);
    if (!transcript) throw IoError("cannot open transcript '" + options.transcript_path + "'");
  }
  auto dump = [&](const ProtocolRound& round) {
    if (!transcript.is_open()) return;
    for (const auto& [id, msg] : round.inbox) {
      const auto bytes = msg.encode();
      transcript.write(reinterpret_cast<const char*>(bytes.data()),
                       static_cast<std::streamsize>(bytes.size()));
    }
  };

  FleetStart start = initialize_fleet(pb, solver, 0.0, options.workers, options.seed);
  record(log, std::move(start.record), options);
  dump(start.round);
  LockstepBus bus;
  ProtocolRound round = std::move(start.round);
  const long samples = cfg.sample_count();
  for (long k = 1; k < samples; ++k) {
    RoundResult result = run_round(start.fleet, round, bus);
    record(log, std::move(result.record), options);
    round = std::move(result.round);
    dump(round);
  }
  return log;
}

TrajectoryLog run_scenario(const ScenarioConfig& scenario, RunMode mode, const RunOptions& options) {
  return mode == RunMode::centralized ? centralized_solve_run(scenario, options)
                                      : decentralized_run(scenario, options);
}

TrajectoryLog replay(const TrajectoryLog& log, int workers) {
  const ScenarioConfig cfg = driving::load_scenario(log.header.config);
  if (cfg.hash() != log.header.scenario_hash)
    throw ConfigError({"config echo hashes to " + cfg.hash() + ", log header says " +
                       log.header.scenario_hash});
  RunOptions options;
  options.workers = workers;
  options.seed = log.header.seed;
  return run_scenario(cfg, parse_run_mode(log.header.mode), options);
}

}  // namespace dmpc
