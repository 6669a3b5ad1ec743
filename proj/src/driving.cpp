#include "dmpc/driving.hpp"

namespace dmpc::driving {

void VehicleModel::evaluate(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& u,
                            Eigen::Ref<Vector> xdot) const {
  xdot = vehicle_dynamics(x, u, curvature_);
}

void VehicleModel::jacobians(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& u,
                             Eigen::Ref<Matrix> fx, Eigen::Ref<Matrix> fu) const {
  const double d = frame_denominator(x(kY), curvature_);
  const double c = std::cos(x(kTheta)), s = std::sin(x(kTheta));
  const double v = u(kV);
  fx.setZero();
  fx(kS, kY) = v * c * curvature_ / (d * d);
  fx(kS, kTheta) = -v * s / d;
  fx(kY, kTheta) = v * c;
  fu.setZero();
  fu(kS, kV) = c / d;
  fu(kY, kV) = s;
  fu(kTheta, kOmega) = 1.0;
}

double LaneKeepCost::evaluate(const Eigen::Ref<const Vector>& x,
                              const Eigen::Ref<const Vector>& u) const {
  return lane_keep_cost(x, u, params_, curvature_);
}

void LaneKeepCost::gradients(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& u,
                             Eigen::Ref<Vector> hx, Eigen::Ref<Vector> hu) const {
  const auto& p = params_;
  const double d = frame_denominator(x(kY), curvature_);
  const double c = std::cos(x(kTheta)), s = std::sin(x(kTheta));
  const double v = u(kV);
  const double sdot = v * c / d;
  const double ydot = v * s;
  const double ev = sdot - p.v_target;

  // partials of sdot
  const double dsdot_dy = v * c * curvature_ / (d * d);
  const double dsdot_dtheta = -v * s / d;
  const double dsdot_dv = c / d;

  hx(kS) = 0.0;
  hx(kY) = 2.0 * p.w1 * (x(kY) - p.y_target) + 2.0 * p.w3 * ev * dsdot_dy;
  hx(kTheta) = 2.0 * p.w2 * ydot * v * c + 2.0 * p.w3 * ev * dsdot_dtheta;
  hu(kV) = 2.0 * p.w2 * ydot * s + 2.0 * p.w3 * ev * dsdot_dv;
  hu(kOmega) = 2.0 * p.w4 * u(kOmega);
}

double EllipseConstraint::evaluate(std::span<const Vector> states) const {
  return ellipse_gap(states[0], states[1], params_);
}

void EllipseConstraint::gradient(std::span<const Vector> states, std::span<Vector> grads) const {
  const double ds = states[0](kS) - states[1](kS);
  const double dy = states[0](kY) - states[1](kY);
  grads[0].setZero();
  grads[0](kS) = ds / params_.l;
  grads[0](kY) = dy / params_.w;
  grads[1] = -grads[0];
}

}  // namespace dmpc::driving
