#include "dmpc/relaxation.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dmpc/errors.hpp"

namespace dmpc {

double multiplier_from_gap(double gap, double barrier_weight) {
  if (!(gap > 0.0))
    throw DomainError("multiplier identity undefined for non-positive gap " + std::to_string(gap));
  return barrier_weight / (gap * gap);
}

MultiplierRegime kkt_switching_reference(double gap, double tol) {
  return std::abs(gap) <= tol ? MultiplierRegime::nonzero : MultiplierRegime::zero;
}

bool ActivationSet::active(int id) const {
  auto it = flags_.find(id);
  return it != flags_.end() && it->second;
}

std::vector<int> ActivationSet::active_ids() const {
  std::vector<int> ids;
  for (const auto& [id, flag] : flags_)
    if (flag) ids.push_back(id);
  return ids;
}

int ActivationSet::active_count() const {
  return static_cast<int>(std::count_if(flags_.begin(), flags_.end(),
                                        [](const auto& kv) { return kv.second; }));
}

void ActivationSet::set(int id, bool flag, double time) {
  const bool previous = active(id);
  flags_[id] = flag;
  if (previous != flag) history_.push_back({time, id, flag});
}

ActivationParams ActivationParams::from(const OcpDefinition& def, double hysteresis,
                                        double slack_floor) {
  return {def.barrier_weight, def.activation_threshold, hysteresis, slack_floor};
}

void consistent_slack_multiplier(double gap, double barrier_weight, double slack_floor,
                                 double& slack, double& multiplier) {
  slack = gap > slack_floor * slack_floor ? std::sqrt(gap) : slack_floor;
  const double z2 = slack * slack;
  multiplier = barrier_weight / (z2 * z2);
}

ActivationUpdate activation_update(const std::map<int, double>& gaps, const ActivationParams& params,
                                   const ActivationSet& current, double time) {
  if (!(params.barrier_weight > 0.0) || !(params.activation_threshold > 0.0))
    throw DomainError("barrier weight and activation threshold must be positive");
  ActivationUpdate out;
  out.set = current;
  const double limit = params.gap_squared_limit();
  for (const auto& [id, gap] : gaps) {
    if (!std::isfinite(gap))
      throw DomainError("gap of constraint " + std::to_string(id) + " is not finite");
    const bool was = current.active(id);
    bool now;
    if (gap <= 0.0) {
      now = true;
      out.violations.push_back("constraint " + std::to_string(id) + " violated (C=" +
                               std::to_string(gap) + ") at t=" + std::to_string(time));
    } else if (was) {
      now = gap * gap < params.hysteresis * limit;
    } else {
      now = gap * gap < limit;
    }
    if (now && !was) {
      ActivationEvent ev;
      ev.constraint_id = id;
      ev.gap = gap;
      ev.emergency = gap <= 0.0;
      consistent_slack_multiplier(gap, params.barrier_weight, params.slack_floor, ev.slack_init,
                                  ev.multiplier_init);
      out.activated.push_back(ev);
    } else if (!now && was) {
      out.deactivated.push_back(id);
    }
    out.set.set(id, now, time);
  }
  return out;
}

HorizonSolution relayout_solution(const HorizonSolution& old, std::span<const int> old_ids,
                                  std::span<const int> new_ids, const Matrix& new_gaps,
                                  double barrier_weight, double slack_floor) {
  if (static_cast<Index>(old_ids.size()) != old.constraint_count())
    throw LayoutError("relayout: old id list does not match the solution");
  const Index steps = old.steps();
  const Index nc = static_cast<Index>(new_ids.size());
  if (new_gaps.rows() != nc || (nc > 0 && new_gaps.cols() < steps))
    throw LayoutError("relayout: gap matrix does not cover the new constraint set");

  HorizonSolution old_rates = HorizonSolution::unflatten(
      old.derivative.size() == old.dimension() ? old.derivative : Vector::Zero(old.dimension()),
      old.input_dim(), old.constraint_count(), steps);

  HorizonSolution out(old.input_dim(), nc, steps);
  HorizonSolution rates(old.input_dim(), nc, steps);
  out.controls = old.controls;
  rates.controls = old_rates.controls;
  rates.slacks.setZero();
  for (Index j = 0; j < nc; ++j) {
    auto it = std::find(old_ids.begin(), old_ids.end(), new_ids[j]);
    if (it != old_ids.end()) {
      const Index r = it - old_ids.begin();
      out.slacks.row(j) = old.slacks.row(r);
      out.multipliers.row(j) = old.multipliers.row(r);
      rates.slacks.row(j) = old_rates.slacks.row(r);
      rates.multipliers.row(j) = old_rates.multipliers.row(r);
    } else {
      for (Index k = 0; k < steps; ++k)
        consistent_slack_multiplier(new_gaps(j, k), barrier_weight, slack_floor, out.slacks(j, k),
                                    out.multipliers(j, k));
    }
  }
  out.derivative = rates.flatten();
  return out;
}

}  // namespace dmpc
