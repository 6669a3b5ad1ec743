#include "dmpc/cgmres.hpp"

#include <chrono>
#include <cmath>
#include <string>

#include "dmpc/errors.hpp"
#include "dmpc/gmres.hpp"

namespace dmpc {

SolverConfig SolverConfig::for_sample_time(double sample_time) {
  SolverConfig cfg;
  cfg.sample_time = sample_time;
  cfg.stabilization_gain = 0.2 / sample_time;
  return cfg;
}

void SolverConfig::validate() const {
  if (gmres_max_iters <= 0) throw DomainError("gmres_max_iters must be positive");
  if (!(gmres_tolerance > 0.0)) throw DomainError("gmres_tolerance must be positive");
  if (!(stabilization_gain >= 0.0)) throw DomainError("stabilization gain must be >= 0");
  if (!(fd_epsilon > 0.0)) throw DomainError("fd_epsilon must be positive");
  if (!(newton_tolerance > 0.0)) throw DomainError("newton_tolerance must be positive");
  if (newton_max_iters <= 0) throw DomainError("newton_max_iters must be positive");
  if (!(sample_time > 0.0)) throw DomainError("sample_time must be positive");
  if (!(slack_floor > 0.0)) throw DomainError("slack_floor must be positive");
}

double scaled_residual(double residual_norm, Index dimension) {
  return dimension > 0 ? residual_norm / std::sqrt(static_cast<double>(dimension)) : 0.0;
}

Vector residual_directional_derivative(const OcpDefinition& def, const Eigen::Ref<const Vector>& x0,
                                       const Eigen::Ref<const Vector>& unknowns,
                                       const Eigen::Ref<const Vector>& base_residual,
                                       const Eigen::Ref<const Vector>& direction,
                                       const ExogenousStates& exogenous, double t,
                                       double fd_epsilon) {
  const double norm = direction.norm();
  if (norm == 0.0) return Vector::Zero(base_residual.size());
  const double h = fd_epsilon / norm;
  const Vector shifted = unknowns + h * direction;
  return (kkt_residual(def, x0, shifted, exogenous, t) - base_residual) / h;
}

namespace {

bool slacks_positive(const Vector& unknowns, Index input_dim, Index constraints, Index steps) {
  const Index sd = input_dim + 2 * constraints;
  for (Index k = 0; k < steps; ++k)
    for (Index j = 0; j < constraints; ++j)
      if (!(unknowns(k * sd + input_dim + j) > 0.0)) return false;
  return true;
}

using Clock = std::chrono::steady_clock;

}  // namespace

SolverState newton_init(const OcpDefinition& def, const Eigen::Ref<const Vector>& x0,
                        HorizonSolution guess, const SolverConfig& cfg, double t0) {
  cfg.validate();
  def.validate();
  if (guess.steps() != def.grid.steps() || guess.input_dim() != def.input_dim() ||
      guess.constraint_count() != def.constraint_count())
    throw LayoutError("initial guess does not match the problem layout");
  if (guess.constraint_count() > 0 && !(guess.min_slack() > 0.0))
    throw InitializationError("initial guess has non-positive slacks");

  const auto start = Clock::now();
  const ExogenousStates exo = def.exogenous_at(t0);
  const Index m = def.input_dim(), nc = def.constraint_count(), steps = def.grid.steps();

  Vector u = guess.flatten();
  Vector f = kkt_residual(def, x0, u, exo, t0);
  double fnorm = f.norm();
  int gmres_total = 0;

  int iter = 0;
  while (fnorm > cfg.newton_tolerance) {
    if (iter >= cfg.newton_max_iters)
      throw NonConvergence("newton_init did not converge in " + std::to_string(iter) +
                               " iterations (residual " + std::to_string(fnorm) + ")",
                           fnorm);
    ++iter;
    auto jac = [&](const Vector& v) {
      return residual_directional_derivative(def, x0, u, f, v, exo, t0, cfg.fd_epsilon);
    };
    const Vector rhs = -f;
    const auto lin = gmres_solve<double>(jac, rhs, Vector::Zero(u.size()),
                                         static_cast<int>(u.size()), 1e-10);
    gmres_total += lin.iterations;

    double alpha = 1.0;
    bool accepted = false;
    Vector best_u = u, best_f = f;
    double best_norm = fnorm;
    for (int halving = 0; halving < 40; ++halving, alpha *= 0.5) {
      Vector trial = u + alpha * lin.solution;
      if (!slacks_positive(trial, m, nc, steps)) continue;
      try {
        Vector ft = kkt_residual(def, x0, trial, exo, t0);
        const double nt = ft.norm();
        if (std::isfinite(nt) && nt < best_norm) {
          best_u = std::move(trial);
          best_f = std::move(ft);
          best_norm = nt;
          accepted = true;
          break;
        }
      } catch (const RolloutDivergence&) {
      } catch (const BarrierDomainError&) {
      }
    }
    if (!accepted)
      throw NonConvergence("newton_init stalled: no damped step reduces the residual (" +
                               std::to_string(fnorm) + ")",
                           fnorm);
    u = std::move(best_u);
    f = std::move(best_f);
    fnorm = best_norm;
  }

  SolverState state;
  state.solution = std::move(guess);
  state.solution.assign(u);
  state.solution.derivative = Vector::Zero(u.size());
  state.residual_norm = fnorm;
  state.last_gmres_iters = gmres_total;
  state.wall_time_last_step = std::chrono::duration<double>(Clock::now() - start).count();
  return state;
}

SolverState continuation_step(const OcpDefinition& def, const SolverState& state,
                              const Eigen::Ref<const Vector>& x0,
                              const Eigen::Ref<const Vector>& x0_dot, double t,
                              const SolverConfig& cfg) {
  const auto start = Clock::now();
  const HorizonSolution& sol = state.solution;
  if (sol.steps() != def.grid.steps() || sol.input_dim() != def.input_dim() ||
      sol.constraint_count() != def.constraint_count())
    throw LayoutError("solver state does not match the problem layout");
  if (x0_dot.size() != x0.size()) throw LayoutError("state derivative has wrong dimension");

  const double h = cfg.fd_epsilon;
  const Vector u = sol.flatten();
  const Vector x_shift = x0 + h * x0_dot;
  const ExogenousStates exo_now = def.exogenous_at(t);
  const ExogenousStates exo_next = def.exogenous ? def.exogenous_at(t + h) : ExogenousStates{};

  const Vector f0 = kkt_residual(def, x0, u, exo_now, t);
  const Vector f_shift = kkt_residual(def, x_shift, u, exo_next, t + h);
  const Vector rhs = -cfg.stabilization_gain * f0 - (f_shift - f0) / h;

  auto jac = [&](const Vector& v) {
    return residual_directional_derivative(def, x_shift, u, f_shift, v, exo_next, t + h,
                                           cfg.fd_epsilon);
  };
  Vector warm = sol.derivative.size() == u.size() ? sol.derivative : Vector::Zero(u.size());
  const int max_iters = static_cast<int>(std::min<Index>(cfg.gmres_max_iters, u.size()));
  const auto lin = gmres_solve<double>(jac, rhs, warm, max_iters, cfg.gmres_tolerance);

  SolverState next;
  next.solution = sol;
  next.solution.assign(u + cfg.sample_time * lin.solution);
  next.solution.derivative = lin.solution;
  next.residual_norm = f0.norm();
  next.last_gmres_iters = lin.iterations;
  next.gmres_relative_residual = lin.relative_residual;
  next.gmres_breakdown = lin.breakdown;

  if (next.solution.constraint_count() > 0 && next.solution.min_slack() < cfg.slack_floor) {
    next.solution.slacks = next.solution.slacks.cwiseMax(cfg.slack_floor);
    next.degraded = true;
    next.warning = "slack clamped to floor at t=" + std::to_string(t);
  }
  next.wall_time_last_step = std::chrono::duration<double>(Clock::now() - start).count();
  return next;
}

}  // namespace dmpc
