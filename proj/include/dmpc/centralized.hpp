#pragma once

#include <memory>
#include <vector>

#include "dmpc/cgmres.hpp"
#include "dmpc/multi_agent.hpp"
#include "dmpc/relaxation.hpp"
#include "dmpc/sample_record.hpp"

namespace dmpc {

/// Receding-horizon controller that optimizes every agent jointly.
///
/// Each sample the enforced set is refreshed from the current gaps and the
/// joint problem is advanced by one continuation step. Agents that share no
/// enforced constraint have a block-diagonal Jacobian, so each connected
/// group of agents is advanced as its own problem.
class CentralizedController {
 public:
  CentralizedController(std::shared_ptr<const MultiAgentProblem> problem, SolverConfig cfg);

  /// Activation from the initial gaps, then damped Newton on every group.
  void initialize(double t0);

  /// One sample: activation update, continuation step, plant advance by dt.
  /// The returned record describes the sample at `t` (pre-advance state).
  SampleRecord step(double t);

  const MultiAgentProblem& problem() const { return *problem_; }
  const SolverConfig& config() const { return cfg_; }
  const std::vector<Vector>& states() const { return states_; }
  const ActivationSet& activation() const { return activation_; }
  std::vector<int> enforced() const { return activation_.active_ids(); }

  /// Current joint solution; rows follow layout().
  const HorizonSolution& solution() const { return solution_; }
  SolutionLayout layout() const;

  /// Solution used at the last step (values before the update, derivative = Udot)
  /// and the state derivatives applied to the plant.
  const HorizonSolution& last_applied() const { return last_applied_; }
  const std::vector<Vector>& last_state_derivatives() const { return last_xdot_; }
  const std::vector<int>& last_enforced() const { return last_enforced_; }

 private:
  void refresh_activation(double t, SampleRecord& rec);

  std::shared_ptr<const MultiAgentProblem> problem_;
  SolverConfig cfg_;
  std::vector<int> all_agents_;
  std::vector<Vector> states_;
  ActivationSet activation_;
  HorizonSolution solution_;
  HorizonSolution last_applied_;
  std::vector<Vector> last_xdot_;
  std::vector<int> last_enforced_;
  bool initialized_ = false;
};

/// Constraint ids (ascending) among `enforced` whose participants all lie in `agents`.
std::vector<int> constraints_within(const MultiAgentProblem& problem, std::span<const int> agents,
                                    std::span<const int> enforced);

/// Max |lambda - W_z/z^4| over the rows of `layout` whose constraint involves `agent`.
double agent_multiplier_error(const MultiAgentProblem& problem, const HorizonSolution& solution,
                              std::span<const int> constraint_ids, int agent);

/// Activation flags in the per-(constraint, participant) order of SampleRecord::flags,
/// assuming every participant shares one activation set.
std::vector<std::uint8_t> shared_flags(const MultiAgentProblem& problem, const ActivationSet& set);

}  // namespace dmpc
