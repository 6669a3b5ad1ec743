#pragma once

#include <map>
#include <memory>
#include <span>
#include <vector>

#include "dmpc/ocp.hpp"
#include "dmpc/relaxation.hpp"

namespace dmpc {

/// N dynamically decoupled agents joined only through coupling constraints.
/// Agents are indexed 0..N-1; constraint ids are arbitrary but unique.
struct MultiAgentProblem {
  std::vector<std::shared_ptr<const DynamicsModel>> dynamics;
  std::vector<std::shared_ptr<const RunningCost>> costs;
  std::vector<std::shared_ptr<const CouplingConstraint>> constraints;  // ascending id
  HorizonGrid grid{2.0, 20};
  double barrier_weight = 7.0;
  double activation_threshold = 5e-7;
  double hysteresis = 1.0;
  std::vector<Vector> initial_states;
  std::vector<Vector> nominal_inputs;  // initial guess for the controls

  int agent_count() const { return static_cast<int>(dynamics.size()); }
  const CouplingConstraint& constraint(int id) const;
  /// Ids of every constraint that involves `agent`, ascending.
  std::vector<int> constraints_of(int agent) const;
  ActivationParams activation_params(double slack_floor) const;
  void validate() const;
};

/// Gap of one constraint given the state of every agent.
double constraint_gap(const CouplingConstraint& c, std::span<const Vector> agent_states);

/// Current gaps of the listed constraints.
std::map<int, double> current_gaps(const MultiAgentProblem& problem,
                                   std::span<const Vector> agent_states, std::span<const int> ids);

/// Problem over `agents` (all optimized, in the given order) enforcing `enforced`.
OcpDefinition joint_definition(const MultiAgentProblem& problem, std::span<const int> agents,
                               std::span<const int> enforced);

/// Groups of agents connected through enforced constraints, each sorted, ordered by first agent.
std::vector<std::vector<int>> coupling_components(const MultiAgentProblem& problem,
                                                  std::span<const int> enforced);

/// Row structure of a solution: whose inputs and which constraints it holds.
struct SolutionLayout {
  std::vector<int> agents;
  std::vector<int> constraint_ids;
};

/// Copies the rows of `part` out of a solution laid out as `whole` (values and rates).
HorizonSolution slice_solution(const MultiAgentProblem& problem, const HorizonSolution& source,
                               const SolutionLayout& whole, const SolutionLayout& part);

/// Writes the rows of `part_solution` into `target` (values and rates).
void scatter_solution(const MultiAgentProblem& problem, HorizonSolution& target,
                      const SolutionLayout& whole, const HorizonSolution& part_solution,
                      const SolutionLayout& part);

/// Initial guess: nominal inputs on every step and slacks/multipliers that zero
/// the slack and feasibility blocks along the predicted trajectory.
HorizonSolution nominal_guess(const MultiAgentProblem& problem, const OcpDefinition& def,
                              std::span<const int> agents, const Eigen::Ref<const Vector>& x0,
                              const ExogenousStates& exogenous, double slack_floor);

/// Largest |lambda - W_z / z^4| over all rows and steps; 0 without constraints.
double multiplier_identity_error(const HorizonSolution& solution, double barrier_weight);

Vector stack(std::span<const Vector> parts, std::span<const int> which);

}  // namespace dmpc
