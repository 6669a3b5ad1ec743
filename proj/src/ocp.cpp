#include "dmpc/ocp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "dmpc/errors.hpp"
#include "dmpc/models.hpp"

namespace dmpc {

bool CouplingConstraint::involves(int agent) const {
  return std::find(participants_.begin(), participants_.end(), agent) != participants_.end();
}

HorizonGrid::HorizonGrid(double horizon_length, int steps)
    : horizon_length_(horizon_length), steps_(steps) {
  if (!(horizon_length > 0.0) || !std::isfinite(horizon_length))
    throw DomainError("horizon length must be positive and finite");
  if (steps <= 0) throw DomainError("horizon must have at least one step");
}

Index OcpDefinition::state_dim() const {
  Index n = 0;
  for (const auto& a : agents)
    if (a.optimized) n += a.dynamics->state_dim();
  return n;
}

Index OcpDefinition::input_dim() const {
  Index m = 0;
  for (const auto& a : agents)
    if (a.optimized) m += a.dynamics->input_dim();
  return m;
}

std::vector<int> OcpDefinition::constraint_ids() const {
  std::vector<int> ids;
  ids.reserve(constraints.size());
  for (const auto& c : constraints) ids.push_back(c->id());
  return ids;
}

ExogenousStates OcpDefinition::exogenous_at(double t) const {
  return exogenous ? exogenous->sample(t) : ExogenousStates{};
}

void OcpDefinition::validate() const {
  if (!(barrier_weight > 0.0)) throw DomainError("barrier weight must be positive");
  if (!(activation_threshold > 0.0)) throw DomainError("activation threshold must be positive");
  bool any_optimized = false;
  for (const auto& a : agents) {
    if (!a.dynamics) throw LayoutError("agent " + std::to_string(a.id) + " has no dynamics");
    if (a.optimized && !a.cost)
      throw LayoutError("optimized agent " + std::to_string(a.id) + " has no running cost");
    any_optimized = any_optimized || a.optimized;
  }
  if (!any_optimized) throw LayoutError("problem has no optimized agent");
  for (const auto& c : constraints) {
    for (int p : c->participants()) {
      auto it = std::find_if(agents.begin(), agents.end(), [p](const AgentSlot& s) { return s.id == p; });
      if (it == agents.end())
        throw LayoutError("constraint " + std::to_string(c->id()) + " references unknown agent " +
                          std::to_string(p));
    }
  }
}

HorizonSolution::HorizonSolution(Index input_dim, Index constraints, Index steps)
    : controls(Matrix::Zero(input_dim, steps)),
      slacks(Matrix::Ones(constraints, steps)),
      multipliers(Matrix::Zero(constraints, steps)),
      derivative(Vector::Zero(steps * (input_dim + 2 * constraints))) {}

Vector HorizonSolution::flatten() const {
  const Index m = input_dim(), nc = constraint_count(), sd = step_dim();
  Vector flat(dimension());
  for (Index k = 0; k < steps(); ++k) {
    flat.segment(k * sd, m) = controls.col(k);
    flat.segment(k * sd + m, nc) = slacks.col(k);
    flat.segment(k * sd + m + nc, nc) = multipliers.col(k);
  }
  return flat;
}

void HorizonSolution::assign(const Eigen::Ref<const Vector>& flat) {
  if (flat.size() != dimension())
    throw LayoutError("flat vector has " + std::to_string(flat.size()) + " entries, expected " +
                      std::to_string(dimension()));
  const Index m = input_dim(), nc = constraint_count(), sd = step_dim();
  for (Index k = 0; k < steps(); ++k) {
    controls.col(k) = flat.segment(k * sd, m);
    slacks.col(k) = flat.segment(k * sd + m, nc);
    multipliers.col(k) = flat.segment(k * sd + m + nc, nc);
  }
}

HorizonSolution HorizonSolution::unflatten(const Eigen::Ref<const Vector>& flat, Index input_dim,
                                           Index constraints, Index steps) {
  HorizonSolution sol(input_dim, constraints, steps);
  sol.assign(flat);
  return sol;
}

double HorizonSolution::min_slack() const {
  return slacks.size() == 0 ? std::numeric_limits<double>::infinity() : slacks.minCoeff();
}

Matrix predict_horizon(const Eigen::Ref<const Vector>& x0, const Eigen::Ref<const Matrix>& controls,
                       const DynamicsModel& dynamics, const HorizonGrid& grid) {
  const Index n = dynamics.state_dim();
  if (x0.size() != n) throw LayoutError("initial state has wrong dimension");
  if (controls.rows() != dynamics.input_dim() || controls.cols() != grid.steps())
    throw LayoutError("control sequence does not match the horizon grid");
  if (!x0.allFinite()) throw RolloutDivergence(0, "initial state is not finite");

  const double dt = grid.step_size();
  Matrix states(n, grid.steps() + 1);
  states.col(0) = x0;
  Vector xdot(n);
  for (int k = 0; k < grid.steps(); ++k) {
    dynamics.evaluate(states.col(k), controls.col(k), xdot);
    states.col(k + 1) = states.col(k) + xdot * dt;
    if (!states.col(k + 1).allFinite())
      throw RolloutDivergence(k + 1, "rollout diverged at step " + std::to_string(k + 1));
  }
  return states;
}

namespace {

// Offsets of one agent inside the stacked state/input of a problem.
struct SlotLayout {
  const AgentSlot* slot = nullptr;
  Index state_offset = 0;
  Index state_dim = 0;
  Index input_offset = 0;
  Index input_dim = 0;
  const Matrix* exogenous = nullptr;
};

struct ConstraintLayout {
  const CouplingConstraint* constraint = nullptr;
  std::vector<int> slots;  // slot index per participant
  std::vector<Vector> states;
  std::vector<Vector> grads;
};

struct ProblemLayout {
  std::vector<SlotLayout> slots;
  std::vector<ConstraintLayout> constraints;
  Index state_dim = 0;
  Index input_dim = 0;
};

ProblemLayout make_layout(const OcpDefinition& def, const ExogenousStates& exogenous,
                          bool with_constraints = true) {
  ProblemLayout layout;
  const int steps = def.grid.steps();
  layout.slots.reserve(def.agents.size());
  for (const auto& a : def.agents) {
    SlotLayout s;
    s.slot = &a;
    s.state_dim = a.dynamics->state_dim();
    if (a.optimized) {
      s.state_offset = layout.state_dim;
      s.input_offset = layout.input_dim;
      s.input_dim = a.dynamics->input_dim();
      layout.state_dim += s.state_dim;
      layout.input_dim += s.input_dim;
    }
    layout.slots.push_back(s);
  }
  if (!with_constraints) return layout;
  layout.constraints.reserve(def.constraints.size());
  for (const auto& c : def.constraints) {
    ConstraintLayout cl;
    cl.constraint = c.get();
    for (int p : c->participants()) {
      auto it = std::find_if(layout.slots.begin(), layout.slots.end(),
                             [p](const SlotLayout& s) { return s.slot->id == p; });
      if (it == layout.slots.end())
        throw LayoutError("constraint " + std::to_string(c->id()) + " references unknown agent " +
                          std::to_string(p));
      if (!it->slot->optimized && it->exogenous == nullptr) {
        auto ex = exogenous.find(p);
        if (ex == exogenous.end() || ex->second.rows() != it->state_dim ||
            ex->second.cols() < steps)
          throw SubproblemError("no exogenous trajectory for agent " + std::to_string(p) +
                                " required by constraint " + std::to_string(c->id()));
        it->exogenous = &ex->second;
      }
      cl.slots.push_back(static_cast<int>(it - layout.slots.begin()));
      cl.states.emplace_back(it->state_dim);
      cl.grads.emplace_back(it->state_dim);
    }
    layout.constraints.push_back(std::move(cl));
  }
  return layout;
}

Matrix rollout(const OcpDefinition& def, const ProblemLayout& layout,
               const Eigen::Ref<const Vector>& x0, const Eigen::Ref<const Vector>& unknowns,
               Index step_dim) {
  const int steps = def.grid.steps();
  const double dt = def.grid.step_size();
  if (x0.size() != layout.state_dim) throw LayoutError("initial state has wrong dimension");
  if (!x0.allFinite()) throw RolloutDivergence(0, "initial state is not finite");
  Matrix states(layout.state_dim, steps + 1);
  states.col(0) = x0;
  Vector xdot;
  for (int k = 0; k < steps; ++k) {
    for (const auto& s : layout.slots) {
      if (!s.slot->optimized) continue;
      xdot.resize(s.state_dim);
      s.slot->dynamics->evaluate(states.col(k).segment(s.state_offset, s.state_dim),
                                 unknowns.segment(k * step_dim + s.input_offset, s.input_dim),
                                 xdot);
      states.col(k + 1).segment(s.state_offset, s.state_dim) =
          states.col(k).segment(s.state_offset, s.state_dim) + xdot * dt;
    }
    if (!states.col(k + 1).allFinite())
      throw RolloutDivergence(k + 1, "rollout diverged at step " + std::to_string(k + 1));
  }
  return states;
}

void gather_states(ConstraintLayout& cl, const ProblemLayout& layout, const Matrix& states,
                   Index k) {
  for (std::size_t p = 0; p < cl.slots.size(); ++p) {
    const auto& s = layout.slots[cl.slots[p]];
    if (s.slot->optimized)
      cl.states[p] = states.col(k).segment(s.state_offset, s.state_dim);
    else
      cl.states[p] = s.exogenous->col(k);
  }
}

Vector controls_as_unknowns(const Eigen::Ref<const Matrix>& controls) {
  return Eigen::Map<const Vector>(controls.data(), controls.size());
}

}  // namespace

Matrix predict_horizon(const OcpDefinition& def, const Eigen::Ref<const Vector>& x0,
                       const Eigen::Ref<const Matrix>& controls) {
  const ProblemLayout layout = make_layout(def, {}, false);
  if (controls.rows() != layout.input_dim || controls.cols() != def.grid.steps())
    throw LayoutError("control sequence does not match the problem");
  return rollout(def, layout, x0, controls_as_unknowns(controls), layout.input_dim);
}

Matrix horizon_gaps(const OcpDefinition& def, const Eigen::Ref<const Vector>& x0,
                    const Eigen::Ref<const Matrix>& controls, const ExogenousStates& exogenous) {
  ProblemLayout layout = make_layout(def, exogenous);
  if (controls.rows() != layout.input_dim || controls.cols() != def.grid.steps())
    throw LayoutError("control sequence does not match the problem");
  const Matrix states =
      rollout(def, layout, x0, controls_as_unknowns(controls), layout.input_dim);
  Matrix gaps(layout.constraints.size(), def.grid.steps());
  for (int k = 0; k < def.grid.steps(); ++k) {
    for (std::size_t j = 0; j < layout.constraints.size(); ++j) {
      auto& cl = layout.constraints[j];
      gather_states(cl, layout, states, k);
      gaps(static_cast<Index>(j), k) = cl.constraint->evaluate(cl.states);
    }
  }
  return gaps;
}

Vector kkt_residual(const OcpDefinition& def, const Eigen::Ref<const Vector>& x0,
                    const Eigen::Ref<const Vector>& unknowns, const ExogenousStates& exogenous,
                    double /*t*/) {
  ProblemLayout layout = make_layout(def, exogenous);
  const int steps = def.grid.steps();
  const double dt = def.grid.step_size();
  const double wz = def.barrier_weight;
  const Index m = layout.input_dim;
  const Index nc = static_cast<Index>(layout.constraints.size());
  const Index sd = m + 2 * nc;
  if (unknowns.size() != sd * steps)
    throw LayoutError("unknown vector has " + std::to_string(unknowns.size()) +
                      " entries, problem expects " + std::to_string(sd * steps));

  const Matrix states = rollout(def, layout, x0, unknowns, sd);

  Vector residual(unknowns.size());
  Vector psi = Vector::Zero(layout.state_dim);  // psi_{k+1} during step k
  Vector hx_total(layout.state_dim);
  Matrix fx, fu;
  Vector hx, hu;

  for (int k = steps - 1; k >= 0; --k) {
    const Index base = k * sd;
    const auto xk = states.col(k);

    for (const auto& s : layout.slots) {
      if (!s.slot->optimized) continue;
      fx.resize(s.state_dim, s.state_dim);
      fu.resize(s.state_dim, s.input_dim);
      hx.resize(s.state_dim);
      hu.resize(s.input_dim);
      const auto xs = xk.segment(s.state_offset, s.state_dim);
      const auto us = unknowns.segment(base + s.input_offset, s.input_dim);
      s.slot->dynamics->jacobians(xs, us, fx, fu);
      s.slot->cost->gradients(xs, us, hx, hu);
      const auto psi_s = psi.segment(s.state_offset, s.state_dim);
      residual.segment(base + s.input_offset, s.input_dim).noalias() = hu + fu.transpose() * psi_s;
      hx_total.segment(s.state_offset, s.state_dim).noalias() = hx + fx.transpose() * psi_s;
    }

    for (Index j = 0; j < nc; ++j) {
      auto& cl = layout.constraints[j];
      const double z = unknowns(base + m + j);
      const double lambda = unknowns(base + m + nc + j);
      if (!(z > 0.0))
        throw BarrierDomainError("slack of constraint " + std::to_string(cl.constraint->id()) +
                                 " left the barrier domain at step " + std::to_string(k));
      gather_states(cl, layout, states, k);
      const double gap = cl.constraint->evaluate(cl.states);
      cl.constraint->gradient(cl.states, cl.grads);
      for (std::size_t p = 0; p < cl.slots.size(); ++p) {
        const auto& s = layout.slots[cl.slots[p]];
        if (s.slot->optimized)
          hx_total.segment(s.state_offset, s.state_dim) -= lambda * cl.grads[p];
      }
      residual(base + m + j) = 2.0 * lambda * z - 2.0 * wz / (z * z * z);
      residual(base + m + nc + j) = gap - z * z;
    }

    psi += dt * hx_total;
  }
  return residual;
}

Vector kkt_residual(const OcpDefinition& def, const Eigen::Ref<const Vector>& x0,
                    const HorizonSolution& solution, const ExogenousStates& exogenous, double t) {
  if (solution.steps() != def.grid.steps() || solution.input_dim() != def.input_dim() ||
      solution.constraint_count() != def.constraint_count())
    throw LayoutError("solution layout does not match the problem");
  return kkt_residual(def, x0, solution.flatten(), exogenous, t);
}

ResidualBlockNorms residual_block_norms(const OcpDefinition& def,
                                        const Eigen::Ref<const Vector>& residual) {
  const Index m = def.input_dim(), nc = def.constraint_count(), sd = m + 2 * nc;
  if (residual.size() != sd * def.grid.steps()) throw LayoutError("residual size mismatch");
  double a = 0.0, b = 0.0, c = 0.0;
  for (int k = 0; k < def.grid.steps(); ++k) {
    a += residual.segment(k * sd, m).squaredNorm();
    b += residual.segment(k * sd + m, nc).squaredNorm();
    c += residual.segment(k * sd + m + nc, nc).squaredNorm();
  }
  return {std::sqrt(a), std::sqrt(b), std::sqrt(c)};
}

LinearDynamics::LinearDynamics(Matrix a, Matrix b) : a_(std::move(a)), b_(std::move(b)) {
  if (a_.rows() != a_.cols() || b_.rows() != a_.rows())
    throw LayoutError("linear dynamics matrices have inconsistent shapes");
}

void LinearDynamics::evaluate(const Eigen::Ref<const Vector>& x,
                              const Eigen::Ref<const Vector>& u, Eigen::Ref<Vector> xdot) const {
  xdot.noalias() = a_ * x;
  xdot.noalias() += b_ * u;
}

void LinearDynamics::jacobians(const Eigen::Ref<const Vector>&, const Eigen::Ref<const Vector>&,
                               Eigen::Ref<Matrix> fx, Eigen::Ref<Matrix> fu) const {
  fx = a_;
  fu = b_;
}

QuadraticCost::QuadraticCost(Matrix q, Matrix r) : q_(std::move(q)), r_(std::move(r)) {}

double QuadraticCost::evaluate(const Eigen::Ref<const Vector>& x,
                               const Eigen::Ref<const Vector>& u) const {
  return 0.5 * x.dot(q_ * x) + 0.5 * u.dot(r_ * u);
}

void QuadraticCost::gradients(const Eigen::Ref<const Vector>& x,
                              const Eigen::Ref<const Vector>& u, Eigen::Ref<Vector> hx,
                              Eigen::Ref<Vector> hu) const {
  hx.noalias() = q_ * x;
  hu.noalias() = r_ * u;
}

}  // namespace dmpc
