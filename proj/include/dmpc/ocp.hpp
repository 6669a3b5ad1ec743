#pragma once

#include <map>
#include <memory>
#include <span>
#include <vector>

#include "dmpc/types.hpp"

namespace dmpc {

/// Continuous-time agent dynamics xdot = f(x, u).
class DynamicsModel {
 public:
  virtual ~DynamicsModel() = default;

  virtual Index state_dim() const = 0;
  virtual Index input_dim() const = 0;

  virtual void evaluate(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& u,
                        Eigen::Ref<Vector> xdot) const = 0;

  /// fx is state_dim x state_dim, fu is state_dim x input_dim.
  virtual void jacobians(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& u,
                         Eigen::Ref<Matrix> fx, Eigen::Ref<Matrix> fu) const = 0;

  Vector operator()(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& u) const {
    Vector xdot(state_dim());
    evaluate(x, u, xdot);
    return xdot;
  }
};

/// Running cost rate h(x, u).
class RunningCost {
 public:
  virtual ~RunningCost() = default;

  virtual double evaluate(const Eigen::Ref<const Vector>& x,
                          const Eigen::Ref<const Vector>& u) const = 0;

  virtual void gradients(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& u,
                         Eigen::Ref<Vector> hx, Eigen::Ref<Vector> hu) const = 0;
};

/// Scalar feasibility constraint C_j(X) >= 0 over the states of a few agents.
///
/// `states[p]` always holds the state of `participants()[p]`. Implementations
/// must not read anything else, so that a subproblem can feed exogenous
/// neighbour states in place of optimized ones.
class CouplingConstraint {
 public:
  CouplingConstraint(int id, std::vector<int> participants)
      : id_(id), participants_(std::move(participants)) {}
  virtual ~CouplingConstraint() = default;

  int id() const noexcept { return id_; }
  const std::vector<int>& participants() const noexcept { return participants_; }
  bool involves(int agent) const;

  virtual double evaluate(std::span<const Vector> states) const = 0;
  /// grads[p] receives dC/dx for participant p; sizes are preset by the caller.
  virtual void gradient(std::span<const Vector> states, std::span<Vector> grads) const = 0;

 private:
  int id_;
  std::vector<int> participants_;
};

/// Uniform discretization of the prediction horizon [t, t + T].
class HorizonGrid {
 public:
  HorizonGrid(double horizon_length, int steps);

  double horizon_length() const noexcept { return horizon_length_; }
  int steps() const noexcept { return steps_; }
  double step_size() const noexcept { return horizon_length_ / steps_; }

 private:
  double horizon_length_;
  int steps_;
};

/// Predicted states for agents that enter a problem as data only.
/// Keyed by agent id; each matrix is state_dim x (steps + 1), one column per grid node.
using ExogenousStates = std::map<int, Matrix>;

/// Time-parameterised source of exogenous trajectories.
class ExogenousSource {
 public:
  virtual ~ExogenousSource() = default;
  virtual ExogenousStates sample(double t) const = 0;
};

struct AgentSlot {
  int id = 0;
  std::shared_ptr<const DynamicsModel> dynamics;
  std::shared_ptr<const RunningCost> cost;  // unused for exogenous slots
  bool optimized = true;
};

/// A finite-horizon problem with relaxed coupling constraints.
///
/// Optimized agents contribute states, inputs and running cost; exogenous agents
/// only supply states to the constraints. Every constraint in `constraints` is
/// enforced, i.e. owns one slack and one multiplier per grid step.
struct OcpDefinition {
  std::vector<AgentSlot> agents;
  std::vector<std::shared_ptr<const CouplingConstraint>> constraints;
  HorizonGrid grid{1.0, 1};
  double barrier_weight = 1.0;
  double activation_threshold = 1.0;
  std::shared_ptr<const ExogenousSource> exogenous;

  Index state_dim() const;  // optimized agents only
  Index input_dim() const;  // optimized agents only
  Index constraint_count() const { return static_cast<Index>(constraints.size()); }
  Index step_dim() const { return input_dim() + 2 * constraint_count(); }
  Index unknown_dim() const { return grid.steps() * step_dim(); }

  std::vector<int> constraint_ids() const;
  ExogenousStates exogenous_at(double t) const;

  /// Throws on non-positive weights or missing agents referenced by constraints.
  void validate() const;
};

/// Unknowns of the discretized relaxed problem over the horizon.
///
/// Flattening order: for each step k, the controls u_k, then the slacks z_k,
/// then the multipliers lambda_k.
struct HorizonSolution {
  Matrix controls;     // input_dim x steps
  Matrix slacks;       // constraints x steps
  Matrix multipliers;  // constraints x steps
  Vector derivative;   // d/dt of flatten(), same layout

  HorizonSolution() = default;
  HorizonSolution(Index input_dim, Index constraints, Index steps);

  Index steps() const { return controls.cols(); }
  Index input_dim() const { return controls.rows(); }
  Index constraint_count() const { return slacks.rows(); }
  Index step_dim() const { return input_dim() + 2 * constraint_count(); }
  Index dimension() const { return steps() * step_dim(); }

  Vector flatten() const;
  /// Overwrite the values (not the derivative) from a flat vector of matching size.
  void assign(const Eigen::Ref<const Vector>& flat);
  static HorizonSolution unflatten(const Eigen::Ref<const Vector>& flat, Index input_dim,
                                   Index constraints, Index steps);

  double min_slack() const;
};

/// Forward-Euler rollout x_{k+1} = x_k + f(x_k, u_k) * dt; returns state_dim x (M + 1).
Matrix predict_horizon(const Eigen::Ref<const Vector>& x0, const Eigen::Ref<const Matrix>& controls,
                       const DynamicsModel& dynamics, const HorizonGrid& grid);

/// Rollout of all optimized agents of `def` (stacked state).
Matrix predict_horizon(const OcpDefinition& def, const Eigen::Ref<const Vector>& x0,
                       const Eigen::Ref<const Matrix>& controls);

/// Gap C_j(X_k) for every constraint of `def` and step k = 0..M-1 (constraints x steps).
Matrix horizon_gaps(const OcpDefinition& def, const Eigen::Ref<const Vector>& x0,
                    const Eigen::Ref<const Matrix>& controls, const ExogenousStates& exogenous);

/// Stacked first-order necessary conditions of the discretized relaxed problem.
///
/// With H_k = h(x_k,u_k) + psi_{k+1}' f(x_k,u_k) + sum_j [W_z / z_jk^2 - lambda_jk (C_j(X_k) - z_jk^2)]
/// and psi_M = 0, psi_k = psi_{k+1} + dtau * dH_k/dx, the residual holds per step
///   dH_k/du_k,  2 lambda_jk z_jk - 2 W_z / z_jk^3,  C_j(X_k) - z_jk^2
/// in the flattening order of HorizonSolution. Multipliers are non-negative at
/// feasible optima and satisfy lambda = W_z / z^4 there.
Vector kkt_residual(const OcpDefinition& def, const Eigen::Ref<const Vector>& x0,
                    const Eigen::Ref<const Vector>& unknowns, const ExogenousStates& exogenous,
                    double t);

Vector kkt_residual(const OcpDefinition& def, const Eigen::Ref<const Vector>& x0,
                    const HorizonSolution& solution, const ExogenousStates& exogenous, double t);

/// Norms of the stationarity (a), slack (b) and feasibility (c) blocks of a residual.
struct ResidualBlockNorms {
  double control = 0.0;
  double slack = 0.0;
  double feasibility = 0.0;
};
ResidualBlockNorms residual_block_norms(const OcpDefinition& def,
                                        const Eigen::Ref<const Vector>& residual);

}  // namespace dmpc
