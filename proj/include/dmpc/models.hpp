#pragma once

#include <functional>

#include "dmpc/ocp.hpp"

namespace dmpc {

/// xdot = A x + B u.
class LinearDynamics final : public DynamicsModel {
 public:
  LinearDynamics(Matrix a, Matrix b);

  Index state_dim() const override { return a_.rows(); }
  Index input_dim() const override { return b_.cols(); }
  void evaluate(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& u,
                Eigen::Ref<Vector> xdot) const override;
  void jacobians(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& u,
                 Eigen::Ref<Matrix> fx, Eigen::Ref<Matrix> fu) const override;

  const Matrix& a() const { return a_; }
  const Matrix& b() const { return b_; }

 private:
  Matrix a_, b_;
};

/// h = 1/2 x'Qx + 1/2 u'Ru.
class QuadraticCost final : public RunningCost {
 public:
  QuadraticCost(Matrix q, Matrix r);

  double evaluate(const Eigen::Ref<const Vector>& x,
                  const Eigen::Ref<const Vector>& u) const override;
  void gradients(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& u,
                 Eigen::Ref<Vector> hx, Eigen::Ref<Vector> hu) const override;

 private:
  Matrix q_, r_;
};

/// Constraint assembled from callables; handy for small test problems.
class FunctionConstraint final : public CouplingConstraint {
 public:
  using EvalFn = std::function<double(std::span<const Vector>)>;
  using GradFn = std::function<void(std::span<const Vector>, std::span<Vector>)>;

  FunctionConstraint(int id, std::vector<int> participants, EvalFn eval, GradFn grad)
      : CouplingConstraint(id, std::move(participants)),
        eval_(std::move(eval)),
        grad_(std::move(grad)) {}

  double evaluate(std::span<const Vector> states) const override { return eval_(states); }
  void gradient(std::span<const Vector> states, std::span<Vector> grads) const override {
    grad_(states, grads);
  }

 private:
  EvalFn eval_;
  GradFn grad_;
};

/// Exogenous source that returns the same trajectories for every t.
class ConstantExogenous final : public ExogenousSource {
 public:
  explicit ConstantExogenous(ExogenousStates states) : states_(std::move(states)) {}
  ExogenousStates sample(double) const override { return states_; }

 private:
  ExogenousStates states_;
};

}  // namespace dmpc
