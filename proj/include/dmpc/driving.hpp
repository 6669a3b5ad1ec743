#pragma once

// Cooperative driving benchmark: point-mass vehicles in a curvilinear road
// frame (s along the mid-line, y lateral offset, theta relative heading),
// lane-keeping running cost and elliptical inter-vehicle constraints.

#include <cmath>

#include "dmpc/errors.hpp"
#include "dmpc/ocp.hpp"

namespace dmpc::driving {

enum StateIndex : Index { kS = 0, kY = 1, kTheta = 2 };
enum InputIndex : Index { kV = 0, kOmega = 1 };

constexpr Index kStateDim = 3;
constexpr Index kInputDim = 2;

template <typename Scalar>
using State = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Input = Eigen::Matrix<Scalar, 2, 1>;

struct VehicleState {
  double s = 0.0;      // [m]
  double y = 0.0;      // [m]
  double theta = 0.0;  // [rad]

  Vector to_vector() const { return (Vector(3) << s, y, theta).finished(); }
};

struct VehicleInput {
  double v = 0.0;      // [m/s]
  double omega = 0.0;  // [rad/s]

  Vector to_vector() const { return (Vector(2) << v, omega).finished(); }
};

struct LaneKeepCostParams {
  double w1 = 0.55;
  double w2 = 0.05;
  double w3 = 9.0;
  double w4 = 145.0;
  double y_target = 0.0;  // [m]
  double v_target = 0.0;  // [m/s]
};

struct EllipseParams {
  double l = 4.0;  // vehicle length [m]
  double w = 2.0;  // vehicle width [m]
};

/// 1 - y * kappa; throws when the curvilinear frame is singular.
template <typename Scalar>
Scalar frame_denominator(Scalar y, Scalar curvature) {
  const Scalar d = Scalar(1) - y * curvature;
  using std::abs;
  if (!(abs(d) > Scalar(1e-6))) throw DomainError("curvilinear frame singular: 1 - y*kappa ~ 0");
  return d;
}

/// (sdot, ydot, thetadot) = (v cos(theta) / (1 - y kappa), v sin(theta), omega).
template <typename DerivedX, typename DerivedU>
State<typename DerivedX::Scalar> vehicle_dynamics(const Eigen::MatrixBase<DerivedX>& x,
                                                  const Eigen::MatrixBase<DerivedU>& u,
                                                  typename DerivedX::Scalar curvature = 0) {
  using Scalar = typename DerivedX::Scalar;
  using std::cos;
  using std::sin;
  const Scalar d = frame_denominator(x(kY), curvature);
  return State<Scalar>(u(kV) * cos(x(kTheta)) / d, u(kV) * sin(x(kTheta)), u(kOmega));
}

/// W1 (y - y_t)^2 + W2 ydot^2 + W3 (sdot - v_t)^2 + W4 omega^2.
template <typename DerivedX, typename DerivedU>
typename DerivedX::Scalar lane_keep_cost(const Eigen::MatrixBase<DerivedX>& x,
                                         const Eigen::MatrixBase<DerivedU>& u,
                                         const LaneKeepCostParams& p,
                                         typename DerivedX::Scalar curvature = 0) {
  using Scalar = typename DerivedX::Scalar;
  const State<Scalar> xdot = vehicle_dynamics(x, u, curvature);
  const Scalar ey = x(kY) - Scalar(p.y_target);
  const Scalar ev = xdot(kS) - Scalar(p.v_target);
  return Scalar(p.w1) * ey * ey + Scalar(p.w2) * xdot(kY) * xdot(kY) + Scalar(p.w3) * ev * ev +
         Scalar(p.w4) * u(kOmega) * u(kOmega);
}

/// (s_i - s_j)^2 / (2 l) + (y_i - y_j)^2 / (2 w) - 1; negative inside the ellipse.
template <typename DerivedI, typename DerivedJ>
typename DerivedI::Scalar ellipse_gap(const Eigen::MatrixBase<DerivedI>& xi,
                                      const Eigen::MatrixBase<DerivedJ>& xj,
                                      const EllipseParams& e) {
  using Scalar = typename DerivedI::Scalar;
  const Scalar ds = xi(kS) - xj(kS);
  const Scalar dy = xi(kY) - xj(kY);
  return ds * ds / Scalar(2 * e.l) + dy * dy / Scalar(2 * e.w) - Scalar(1);
}

class VehicleModel final : public DynamicsModel {
 public:
  explicit VehicleModel(double curvature = 0.0) : curvature_(curvature) {}

  Index state_dim() const override { return kStateDim; }
  Index input_dim() const override { return kInputDim; }
  void evaluate(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& u,
                Eigen::Ref<Vector> xdot) const override;
  void jacobians(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& u,
                 Eigen::Ref<Matrix> fx, Eigen::Ref<Matrix> fu) const override;

  double curvature() const { return curvature_; }

 private:
  double curvature_;
};

class LaneKeepCost final : public RunningCost {
 public:
  LaneKeepCost(LaneKeepCostParams params, double curvature = 0.0)
      : params_(params), curvature_(curvature) {}

  double evaluate(const Eigen::Ref<const Vector>& x,
                  const Eigen::Ref<const Vector>& u) const override;
  void gradients(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& u,
                 Eigen::Ref<Vector> hx, Eigen::Ref<Vector> hu) const override;

  const LaneKeepCostParams& params() const { return params_; }

 private:
  LaneKeepCostParams params_;
  double curvature_;
};

/// Elliptical separation between agents `first` and `second`.
class EllipseConstraint final : public CouplingConstraint {
 public:
  EllipseConstraint(int id, int first, int second, EllipseParams params)
      : CouplingConstraint(id, {first, second}), params_(params) {}

  double evaluate(std::span<const Vector> states) const override;
  void gradient(std::span<const Vector> states, std::span<Vector> grads) const override;

 private:
  EllipseParams params_;
};

/// Inputs holding the lane at cruise speed on a straight road.
inline VehicleInput trim_input(const LaneKeepCostParams& p) { return {p.v_target, 0.0}; }

}  // namespace dmpc::driving
