#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "dmpc/centralized.hpp"
#include "dmpc/cgmres.hpp"
#include "dmpc/multi_agent.hpp"
#include "dmpc/relaxation.hpp"
#include "dmpc/sample_record.hpp"

namespace dmpc {

inline constexpr std::uint16_t kMessageVersion = 1;

/// What an agent broadcasts at the end of a round.
///
/// Wire format (little endian): "DMPC", u16 version, u32 payload length, then
/// i32 agent_id, i64 round, f64 timestamp, and the length-prefixed fields
/// state, state_derivative (u32 n + n f64), u32 input_dim, u32 steps,
/// constraint_ids (u32 n + n i32), solution, solution_derivative (u32 n + n f64).
/// solution follows the flattening order of HorizonSolution.
struct AgentMessage {
  int agent_id = 0;
  long round = 0;
  double timestamp = 0.0;
  Vector state;
  Vector state_derivative;
  Index input_dim = 0;
  Index steps = 0;
  std::vector<int> constraint_ids;
  Vector solution;
  Vector solution_derivative;

  HorizonSolution unpack() const;  // derivative filled from solution_derivative
  void validate() const;

  std::vector<std::uint8_t> encode() const;
  static AgentMessage decode(std::span<const std::uint8_t> bytes);
};

/// Neighbour trajectory `elapsed` seconds after the message was sent:
/// x + xdot*elapsed rolled out under U + Udot*elapsed.
Matrix forecast_trajectory(const AgentMessage& msg, double elapsed, const DynamicsModel& dynamics,
                           const HorizonGrid& grid);

/// Predicted horizon state trajectories at t + dt of every message sender.
ExogenousStates predict_neighbors(const std::map<int, AgentMessage>& messages, double dt,
                                  const HorizonGrid& grid,
                                  std::span<const std::shared_ptr<const DynamicsModel>> dynamics);

/// Exogenous source built from the previous round's messages, valid around the round time.
class NeighborForecast final : public ExogenousSource {
 public:
  NeighborForecast(std::map<int, AgentMessage> messages, double round_time, double dt,
                   HorizonGrid grid, std::vector<std::shared_ptr<const DynamicsModel>> dynamics);
  ExogenousStates sample(double t) const override;

 private:
  std::map<int, AgentMessage> messages_;
  double round_time_;
  double dt_;
  HorizonGrid grid_;
  std::vector<std::shared_ptr<const DynamicsModel>> dynamics_;
};

struct SubproblemSpec {
  int owner = 0;
  std::vector<int> coupling_set;  // enforced constraint ids involving owner, ascending
  ExogenousStates exogenous;      // neighbour trajectories at the round time
  OcpDefinition definition;       // owner first, then neighbours ascending as data
};

/// P_i for `owner`: its own inputs plus a slack and multiplier per enforced coupling.
/// Without enforced couplings it is the single-agent problem with no exogenous data.
SubproblemSpec build_subproblem(const MultiAgentProblem& problem, int owner,
                                const ActivationSet& activation,
                                std::shared_ptr<const ExogenousSource> source, double t);

enum class RoundPhase { predict, solve, broadcast };

struct ProtocolRound {
  long index = 0;
  double time = 0.0;
  std::map<int, AgentMessage> inbox;  // messages sent at `time`
  RoundPhase phase = RoundPhase::broadcast;
};

/// In-process broadcast medium. Messages posted during a round are only
/// handed out by deliver(), after every agent finished.
class LockstepBus {
 public:
  void post(AgentMessage msg);
  std::map<int, AgentMessage> deliver();
  long posted() const;
  long delivered() const;

 private:
  mutable std::mutex mutex_;
  std::map<int, AgentMessage> pending_;
  long posted_ = 0;
  long delivered_ = 0;
};

struct AgentDiagnostics {
  double residual = 0.0;  // scaled
  int gmres_iters = 0;
  double wall_time = 0.0;
  double multiplier_error = 0.0;
  int consumed = 0;  // messages read this round
  std::vector<std::string> warnings;
};

struct AgentRuntime {
  int id = 0;
  Vector state;
  SolverState solver;            // rows: own inputs, then `enforced`
  std::vector<int> enforced;     // ascending
  ActivationSet activation;      // constraints involving this agent
  AgentDiagnostics last;
};

struct DecentralizedFleet {
  std::shared_ptr<const MultiAgentProblem> problem;
  SolverConfig cfg;
  std::vector<AgentRuntime> agents;
  int workers = 1;
  std::uint64_t order_seed = 0;
  double start_time = 0.0;  // round k runs at start_time + k * sample_time
  long messages_consumed = 0;
  long messages_produced = 0;
};

struct FleetStart {
  DecentralizedFleet fleet;
  ProtocolRound round;  // round 0: messages sent at t0
  SampleRecord record;  // sample at t0
};

/// Centralized Newton solve and one centralized step at t0, sliced per agent.
FleetStart initialize_fleet(std::shared_ptr<const MultiAgentProblem> problem,
                            const SolverConfig& cfg, double t0, int workers = 1,
                            std::uint64_t order_seed = 0);

struct RoundResult {
  ProtocolRound round;
  SampleRecord record;
};

/// One lockstep round at previous.time + dt. Agents run in a seeded order,
/// concurrently when fleet.workers > 1; the fleet is only modified when every
/// agent succeeded, otherwise RoundAborted names the failing agent.
RoundResult run_round(DecentralizedFleet& fleet, const ProtocolRound& previous,
                      LockstepBus& bus);

}  // namespace dmpc
