#include "dmpc/centralized.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dmpc/errors.hpp"

namespace dmpc {

std::vector<int> constraints_within(const MultiAgentProblem& problem, std::span<const int> agents,
                                    std::span<const int> enforced) {
  std::vector<int> ids;
  for (int id : enforced) {
    const auto& ps = problem.constraint(id).participants();
    if (std::all_of(ps.begin(), ps.end(), [&](int p) {
          return std::find(agents.begin(), agents.end(), p) != agents.end();
        }))
      ids.push_back(id);
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

double agent_multiplier_error(const MultiAgentProblem& problem, const HorizonSolution& solution,
                              std::span<const int> constraint_ids, int agent) {
  double worst = 0.0;
  for (std::size_t r = 0; r < constraint_ids.size(); ++r) {
    if (!problem.constraint(constraint_ids[r]).involves(agent)) continue;
    for (Index k = 0; k < solution.steps(); ++k) {
      const double z2 = solution.slacks(r, k) * solution.slacks(r, k);
      worst = std::max(worst,
                       std::abs(solution.multipliers(r, k) - problem.barrier_weight / (z2 * z2)));
    }
  }
  return worst;
}

std::vector<std::uint8_t> shared_flags(const MultiAgentProblem& problem, const ActivationSet& set) {
  std::vector<std::uint8_t> flags;
  for (const auto& c : problem.constraints)
    for (std::size_t p = 0; p < c->participants().size(); ++p)
      flags.push_back(set.active(c->id()) ? 1 : 0);
  return flags;
}

CentralizedController::CentralizedController(std::shared_ptr<const MultiAgentProblem> problem,
                                             SolverConfig cfg)
    : problem_(std::move(problem)), cfg_(cfg) {
  if (!problem_) throw LayoutError("centralized controller needs a problem");
  problem_->validate();
  cfg_.validate();
  all_agents_.resize(problem_->agent_count());
  for (int a = 0; a < problem_->agent_count(); ++a) all_agents_[a] = a;
}

SolutionLayout CentralizedController::layout() const {
  return {all_agents_, activation_.active_ids()};
}

void CentralizedController::initialize(double t0) {
  const auto& pb = *problem_;
  states_ = pb.initial_states;
  std::vector<int> ids;
  for (const auto& c : pb.constraints) ids.push_back(c->id());
  const auto update = activation_update(current_gaps(pb, states_, ids),
                                        pb.activation_params(cfg_.slack_floor), {}, t0);
  if (!update.violations.empty())
    throw InitializationError("initial configuration is infeasible: " + update.violations.front());
  activation_ = update.set;

  const std::vector<int> enforced = activation_.active_ids();
  Index input_dim = 0;
  for (const auto& d : pb.dynamics) input_dim += d->input_dim();
  solution_ = HorizonSolution(input_dim, static_cast<Index>(enforced.size()), pb.grid.steps());
  const SolutionLayout whole{all_agents_, enforced};
  for (const auto& group : coupling_components(pb, enforced)) {
    const auto cids = constraints_within(pb, group, enforced);
    const OcpDefinition def = joint_definition(pb, group, cids);
    const Vector x = stack(states_, group);
    SolverState st;
    try {
      st = newton_init(def, x, nominal_guess(pb, def, group, x, {}, cfg_.slack_floor), cfg_, t0);
    } catch (const NonConvergence& e) {
      throw InitializationError(std::string("initial solve failed: ") + e.what());
    }
    scatter_solution(pb, solution_, whole, st.solution, {group, cids});
  }
  solution_.derivative = Vector::Zero(solution_.dimension());
  last_enforced_ = enforced;
  initialized_ = true;
}

void CentralizedController::refresh_activation(double t, SampleRecord& rec) {
  const auto& pb = *problem_;
  std::vector<int> ids;
  for (const auto& c : pb.constraints) ids.push_back(c->id());
  const auto gaps = current_gaps(pb, states_, ids);
  for (const auto& c : pb.constraints) rec.gaps.push_back(gaps.at(c->id()));

  const std::vector<int> before = activation_.active_ids();
  auto update = activation_update(gaps, pb.activation_params(cfg_.slack_floor), activation_, t);
  for (auto& v : update.violations) rec.warnings.push_back(std::move(v));
  activation_ = std::move(update.set);
  const std::vector<int> after = activation_.active_ids();
  if (after == before) return;

  const OcpDefinition def = joint_definition(pb, all_agents_, after);
  const Matrix new_gaps = horizon_gaps(def, stack(states_, all_agents_), solution_.controls, {});
  solution_ = relayout_solution(solution_, before, after, new_gaps, pb.barrier_weight,
                                cfg_.slack_floor);
}

SampleRecord CentralizedController::step(double t) {
  if (!initialized_) throw LayoutError("centralized controller used before initialize()");
  const auto& pb = *problem_;
  const int n = pb.agent_count();
  SampleRecord rec;
  rec.time = t;
  rec.states = states_;
  refresh_activation(t, rec);

  const std::vector<int> enforced = activation_.active_ids();
  const SolutionLayout whole{all_agents_, enforced};

  std::vector<Vector> xdot(n);
  rec.inputs.resize(n);
  Index row = 0;
  for (int a = 0; a < n; ++a) {
    const Index m = pb.dynamics[a]->input_dim();
    rec.inputs[a] = solution_.controls.col(0).segment(row, m);
    xdot[a] = (*pb.dynamics[a])(states_[a], rec.inputs[a]);
    row += m;
  }

  rec.residuals.assign(n, 0.0);
  rec.gmres_iters.assign(n, 0);
  rec.multiplier_errors.assign(n, 0.0);
  rec.wall_times.assign(n, 0.0);

  HorizonSolution next = solution_;
  HorizonSolution applied = solution_;
  for (const auto& group : coupling_components(pb, enforced)) {
    const auto cids = constraints_within(pb, group, enforced);
    const SolutionLayout part{group, cids};
    const OcpDefinition def = joint_definition(pb, group, cids);
    SolverState st;
    st.solution = slice_solution(pb, solution_, whole, part);
    const SolverState res =
        continuation_step(def, st, stack(states_, group), stack(xdot, group), t, cfg_);
    scatter_solution(pb, next, whole, res.solution, part);
    HorizonSolution used = st.solution;
    used.derivative = res.solution.derivative;
    scatter_solution(pb, applied, whole, used, part);

    const double scaled = scaled_residual(res.residual_norm, def.unknown_dim());
    for (int a : group) {
      rec.residuals[a] = scaled;
      rec.gmres_iters[a] = res.last_gmres_iters;
      rec.wall_times[a] = res.wall_time_last_step;
      rec.multiplier_errors[a] = agent_multiplier_error(pb, st.solution, cids, a);
    }
    rec.wall_total += res.wall_time_last_step;
    if (!res.warning.empty()) rec.warnings.push_back(res.warning);
  }
  rec.flags = shared_flags(pb, activation_);

  for (int a = 0; a < n; ++a) states_[a] += cfg_.sample_time * xdot[a];
  solution_ = std::move(next);
  last_applied_ = std::move(applied);
  last_xdot_ = std::move(xdot);
  last_enforced_ = enforced;
  return rec;
}

}  // namespace dmpc
