#pragma once

#include <string>

#include "dmpc/ocp.hpp"

namespace dmpc {

struct SolverConfig {
  int gmres_max_iters = 1000;  // clamped to the unknown dimension
  double gmres_tolerance = 1e-6;
  double stabilization_gain = 10.0;  // zeta [1/s]
  double fd_epsilon = 1e-6;
  double newton_tolerance = 1e-8;
  int newton_max_iters = 50;
  double sample_time = 0.02;  // [s]
  double slack_floor = 1e-6;

  /// Defaults with zeta = 0.2 / sample_time. Larger gains destabilize the
  /// decentralized exchange near an overtake decision.
  static SolverConfig for_sample_time(double sample_time);

  void validate() const;
};

struct SolverState {
  HorizonSolution solution;
  double residual_norm = 0.0;  // ||F|| at the start of the last step (or after Newton)
  int last_gmres_iters = 0;
  double gmres_relative_residual = 0.0;
  bool gmres_breakdown = false;
  double wall_time_last_step = 0.0;  // [s]
  bool degraded = false;             // a slack was clamped to the floor
  std::string warning;
};

/// Residual norm divided by sqrt(dimension); comparable across problem sizes.
double scaled_residual(double residual_norm, Index dimension);

/// Forward-difference directional derivative of kkt_residual along `direction`,
/// the product used inside the solvers. The perturbation has norm fd_epsilon.
Vector residual_directional_derivative(const OcpDefinition& def, const Eigen::Ref<const Vector>& x0,
                                       const Eigen::Ref<const Vector>& unknowns,
                                       const Eigen::Ref<const Vector>& base_residual,
                                       const Eigen::Ref<const Vector>& direction,
                                       const ExogenousStates& exogenous, double t,
                                       double fd_epsilon);

/// Damped Newton on the necessary conditions, Jacobian-vector products by
/// forward differences and inner solves by GMRES. Steps are halved until every
/// slack stays positive and the residual decreases.
SolverState newton_init(const OcpDefinition& def, const Eigen::Ref<const Vector>& x0,
                        HorizonSolution guess, const SolverConfig& cfg, double t0);

/// One continuation update: solves F_U Udot = -zeta F - F_x xdot - F_t with
/// matrix-free GMRES, then advances U by Udot * sample_time.
SolverState continuation_step(const OcpDefinition& def, const SolverState& state,
                              const Eigen::Ref<const Vector>& x0,
                              const Eigen::Ref<const Vector>& x0_dot, double t,
                              const SolverConfig& cfg);

}  // namespace dmpc
