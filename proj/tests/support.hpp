#pragma once

#include <memory>
#include <random>

#include "dmpc/cgmres.hpp"
#include "dmpc/models.hpp"
#include "dmpc/ocp.hpp"

namespace support {

using dmpc::Matrix;
using dmpc::OcpDefinition;
using dmpc::Vector;

inline Matrix mat(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m(static_cast<Eigen::Index>(rows.size()),
           static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& r : rows) {
    Eigen::Index j = 0;
    for (double v : r) m(i, j++) = v;
    ++i;
  }
  return m;
}

inline Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

/// Single optimized agent xdot = A x + B u with h = 1/2 x'Qx + 1/2 u'Ru.
inline OcpDefinition lq_problem(Matrix a, Matrix b, Matrix q, Matrix r, double horizon,
                                int steps) {
  OcpDefinition def;
  def.grid = dmpc::HorizonGrid(horizon, steps);
  def.agents.push_back({0, std::make_shared<dmpc::LinearDynamics>(std::move(a), std::move(b)),
                        std::make_shared<dmpc::QuadraticCost>(std::move(q), std::move(r)), true});
  return def;
}

/// xdot = u, h = 1/2 (x^2 + u^2), M = 5, dtau = 0.1.
inline OcpDefinition scalar_integrator(int steps = 5, double dtau = 0.1) {
  return lq_problem(mat({{0.0}}), mat({{1.0}}), mat({{1.0}}), mat({{1.0}}), dtau * steps, steps);
}

/// Scalar agent kept above a floor: C(x) = x - floor.
inline std::shared_ptr<dmpc::FunctionConstraint> floor_constraint(int id, double floor) {
  return std::make_shared<dmpc::FunctionConstraint>(
      id, std::vector<int>{0},
      [floor](std::span<const Vector> s) { return s[0](0) - floor; },
      [](std::span<const Vector>, std::span<Vector> g) { g[0](0) = 1.0; });
}

inline dmpc::SolverConfig tight_config(double sample_time = 0.02) {
  dmpc::SolverConfig cfg = dmpc::SolverConfig::for_sample_time(sample_time);
  cfg.gmres_tolerance = 1e-10;
  cfg.newton_tolerance = 1e-10;
  return cfg;
}

inline Matrix random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = n(rng);
  return m;
}

}  // namespace support
