#include "dmpc/multi_agent.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "dmpc/errors.hpp"

namespace dmpc {

const CouplingConstraint& MultiAgentProblem::constraint(int id) const {
  for (const auto& c : constraints)
    if (c->id() == id) return *c;
  throw LayoutError("unknown constraint id " + std::to_string(id));
}

std::vector<int> MultiAgentProblem::constraints_of(int agent) const {
  std::vector<int> ids;
  for (const auto& c : constraints)
    if (c->involves(agent)) ids.push_back(c->id());
  return ids;
}

ActivationParams MultiAgentProblem::activation_params(double slack_floor) const {
  return {barrier_weight, activation_threshold, hysteresis, slack_floor};
}

void MultiAgentProblem::validate() const {
  const auto n = dynamics.size();
  if (n == 0) throw LayoutError("problem has no agents");
  if (costs.size() != n || initial_states.size() != n || nominal_inputs.size() != n)
    throw LayoutError("per-agent problem data have inconsistent sizes");
  for (std::size_t i = 0; i < n; ++i) {
    if (!dynamics[i] || !costs[i]) throw LayoutError("agent without model");
    if (initial_states[i].size() != dynamics[i]->state_dim() ||
        nominal_inputs[i].size() != dynamics[i]->input_dim())
      throw LayoutError("agent " + std::to_string(i) + " has mis-sized initial data");
  }
  for (std::size_t j = 0; j < constraints.size(); ++j) {
    if (j > 0 && constraints[j]->id() <= constraints[j - 1]->id())
      throw LayoutError("constraint ids must be unique and ascending");
    for (int p : constraints[j]->participants())
      if (p < 0 || p >= static_cast<int>(n))
        throw LayoutError("constraint " + std::to_string(constraints[j]->id()) +
                          " references agent " + std::to_string(p));
  }
  if (!(barrier_weight > 0.0) || !(activation_threshold > 0.0))
    throw DomainError("barrier weight and activation threshold must be positive");
}

double constraint_gap(const CouplingConstraint& c, std::span<const Vector> agent_states) {
  std::vector<Vector> states;
  states.reserve(c.participants().size());
  for (int p : c.participants()) states.push_back(agent_states[p]);
  return c.evaluate(states);
}

std::map<int, double> current_gaps(const MultiAgentProblem& problem,
                                   std::span<const Vector> agent_states, std::span<const int> ids) {
  std::map<int, double> gaps;
  for (int id : ids) gaps[id] = constraint_gap(problem.constraint(id), agent_states);
  return gaps;
}

OcpDefinition joint_definition(const MultiAgentProblem& problem, std::span<const int> agents,
                               std::span<const int> enforced) {
  OcpDefinition def;
  def.grid = problem.grid;
  def.barrier_weight = problem.barrier_weight;
  def.activation_threshold = problem.activation_threshold;
  for (int a : agents) def.agents.push_back({a, problem.dynamics[a], problem.costs[a], true});
  for (int id : enforced) {
    const auto it = std::find_if(problem.constraints.begin(), problem.constraints.end(),
                                 [id](const auto& c) { return c->id() == id; });
    if (it == problem.constraints.end()) throw LayoutError("unknown constraint id " + std::to_string(id));
    for (int p : (*it)->participants())
      if (std::find(agents.begin(), agents.end(), p) == agents.end())
        throw LayoutError("constraint " + std::to_string(id) + " reaches outside the agent set");
    def.constraints.push_back(*it);
  }
  return def;
}

std::vector<std::vector<int>> coupling_components(const MultiAgentProblem& problem,
                                                  std::span<const int> enforced) {
  const int n = problem.agent_count();
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  };
  for (int id : enforced) {
    const auto& ps = problem.constraint(id).participants();
    for (std::size_t k = 1; k < ps.size(); ++k) {
      const int ra = find(ps[0]), rb = find(ps[k]);
      if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
    }
  }
  std::vector<std::vector<int>> groups;
  std::vector<int> group_of(n, -1);
  for (int a = 0; a < n; ++a) {
    const int r = find(a);
    if (group_of[r] < 0) {
      group_of[r] = static_cast<int>(groups.size());
      groups.emplace_back();
    }
    groups[group_of[r]].push_back(a);
  }
  return groups;
}

namespace {

struct RowMap {
  std::vector<Index> inputs;
  std::vector<Index> constraints;
};

RowMap row_map(const MultiAgentProblem& problem, const SolutionLayout& whole,
               const SolutionLayout& part) {
  RowMap rows;
  for (int a : part.agents) {
    Index offset = 0;
    bool found = false;
    for (int w : whole.agents) {
      if (w == a) {
        found = true;
        break;
      }
      offset += problem.dynamics[w]->input_dim();
    }
    if (!found) throw LayoutError("agent " + std::to_string(a) + " is not part of the layout");
    for (Index r = 0; r < problem.dynamics[a]->input_dim(); ++r) rows.inputs.push_back(offset + r);
  }
  for (int id : part.constraint_ids) {
    auto it = std::find(whole.constraint_ids.begin(), whole.constraint_ids.end(), id);
    if (it == whole.constraint_ids.end())
      throw LayoutError("constraint " + std::to_string(id) + " is not part of the layout");
    rows.constraints.push_back(it - whole.constraint_ids.begin());
  }
  return rows;
}

HorizonSolution rates_of(const HorizonSolution& s) {
  const Vector d = s.derivative.size() == s.dimension() ? s.derivative : Vector::Zero(s.dimension());
  return HorizonSolution::unflatten(d, s.input_dim(), s.constraint_count(), s.steps());
}

}  // namespace

HorizonSolution slice_solution(const MultiAgentProblem& problem, const HorizonSolution& source,
                               const SolutionLayout& whole, const SolutionLayout& part) {
  const RowMap rows = row_map(problem, whole, part);
  const HorizonSolution src_rates = rates_of(source);
  const Index steps = source.steps();
  HorizonSolution out(static_cast<Index>(rows.inputs.size()),
                      static_cast<Index>(rows.constraints.size()), steps);
  HorizonSolution rates = out;
  for (std::size_t r = 0; r < rows.inputs.size(); ++r) {
    out.controls.row(r) = source.controls.row(rows.inputs[r]);
    rates.controls.row(r) = src_rates.controls.row(rows.inputs[r]);
  }
  for (std::size_t r = 0; r < rows.constraints.size(); ++r) {
    out.slacks.row(r) = source.slacks.row(rows.constraints[r]);
    out.multipliers.row(r) = source.multipliers.row(rows.constraints[r]);
    rates.slacks.row(r) = src_rates.slacks.row(rows.constraints[r]);
    rates.multipliers.row(r) = src_rates.multipliers.row(rows.constraints[r]);
  }
  out.derivative = rates.flatten();
  return out;
}

void scatter_solution(const MultiAgentProblem& problem, HorizonSolution& target,
                      const SolutionLayout& whole, const HorizonSolution& part_solution,
                      const SolutionLayout& part) {
  const RowMap rows = row_map(problem, whole, part);
  HorizonSolution tgt_rates = rates_of(target);
  const HorizonSolution part_rates = rates_of(part_solution);
  for (std::size_t r = 0; r < rows.inputs.size(); ++r) {
    target.controls.row(rows.inputs[r]) = part_solution.controls.row(r);
    tgt_rates.controls.row(rows.inputs[r]) = part_rates.controls.row(r);
  }
  for (std::size_t r = 0; r < rows.constraints.size(); ++r) {
    target.slacks.row(rows.constraints[r]) = part_solution.slacks.row(r);
    target.multipliers.row(rows.constraints[r]) = part_solution.multipliers.row(r);
    tgt_rates.slacks.row(rows.constraints[r]) = part_rates.slacks.row(r);
    tgt_rates.multipliers.row(rows.constraints[r]) = part_rates.multipliers.row(r);
  }
  target.derivative = tgt_rates.flatten();
}

HorizonSolution nominal_guess(const MultiAgentProblem& problem, const OcpDefinition& def,
                              std::span<const int> agents, const Eigen::Ref<const Vector>& x0,
                              const ExogenousStates& exogenous, double slack_floor) {
  const Index steps = def.grid.steps();
  HorizonSolution guess(def.input_dim(), def.constraint_count(), steps);
  Index row = 0;
  for (int a : agents) {
    const Vector& u = problem.nominal_inputs[a];
    guess.controls.middleRows(row, u.size()) = u.replicate(1, steps);
    row += u.size();
  }
  if (def.constraint_count() > 0) {
    const Matrix gaps = horizon_gaps(def, x0, guess.controls, exogenous);
    for (Index j = 0; j < gaps.rows(); ++j)
      for (Index k = 0; k < steps; ++k)
        consistent_slack_multiplier(gaps(j, k), def.barrier_weight, slack_floor,
                                    guess.slacks(j, k), guess.multipliers(j, k));
  }
  guess.derivative = Vector::Zero(guess.dimension());
  return guess;
}

double multiplier_identity_error(const HorizonSolution& solution, double barrier_weight) {
  double worst = 0.0;
  for (Index j = 0; j < solution.constraint_count(); ++j)
    for (Index k = 0; k < solution.steps(); ++k) {
      const double z2 = solution.slacks(j, k) * solution.slacks(j, k);
      worst = std::max(worst, std::abs(solution.multipliers(j, k) - barrier_weight / (z2 * z2)));
    }
  return worst;
}

Vector stack(std::span<const Vector> parts, std::span<const int> which) {
  Index n = 0;
  for (int a : which) n += parts[a].size();
  Vector out(n);
  Index off = 0;
  for (int a : which) {
    out.segment(off, parts[a].size()) = parts[a];
    off += parts[a].size();
  }
  return out;
}

}  // namespace dmpc
