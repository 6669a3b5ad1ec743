#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "dmpc/ocp.hpp"

namespace dmpc {

/// Multiplier of a relaxed constraint at its optimum, lambda = W_z / C^2.
/// Throws DomainError for gap <= 0, where the identity has no meaning.
double multiplier_from_gap(double gap, double barrier_weight);

enum class MultiplierRegime { zero, nonzero };

/// Strict complementarity switching: the multiplier may be nonzero only on
/// the constraint boundary. Diagnostic only; the solvers never use it.
MultiplierRegime kkt_switching_reference(double gap, double tol);

struct ActivationChange {
  double time = 0.0;
  int constraint_id = 0;
  bool flag = false;
};

/// Which coupling constraints are currently enforced, plus the change log.
class ActivationSet {
 public:
  bool active(int id) const;
  bool known(int id) const { return flags_.count(id) != 0; }
  const std::map<int, bool>& flags() const noexcept { return flags_; }
  const std::vector<ActivationChange>& history() const noexcept { return history_; }

  /// Ids of enforced constraints in ascending order.
  std::vector<int> active_ids() const;
  int active_count() const;

  /// Records a history entry when the flag changes (or is set for the first time to true).
  void set(int id, bool flag, double time);

 private:
  std::map<int, bool> flags_;
  std::vector<ActivationChange> history_;
};

struct ActivationParams {
  double barrier_weight = 7.0;          // W_z
  double activation_threshold = 5e-7;   // H_lim
  double hysteresis = 1.0;              // deactivate at C^2 >= hysteresis * W_z / H_lim
  double slack_floor = 1e-6;

  static ActivationParams from(const OcpDefinition& def, double hysteresis = 1.0,
                               double slack_floor = 1e-6);
  /// C^2 below which a constraint is enforced.
  double gap_squared_limit() const { return barrier_weight / activation_threshold; }
};

/// Initial values for the unknowns of a constraint that just became enforced.
struct ActivationEvent {
  int constraint_id = 0;
  double gap = 0.0;
  double slack_init = 0.0;       // sqrt(C)
  double multiplier_init = 0.0;  // W_z / C^2
  bool emergency = false;        // C <= 0: slack starts at the floor
};

struct ActivationUpdate {
  ActivationSet set;
  std::vector<ActivationEvent> activated;
  std::vector<int> deactivated;
  std::vector<std::string> violations;
};

/// Threshold rule on the current gaps: a constraint is enforced while
/// C^2 < W_z / H_lim and released once C^2 >= W_z / H_lim. Pure in `gaps`;
/// applying it twice with the same gaps changes nothing the second time.
ActivationUpdate activation_update(const std::map<int, double>& gaps, const ActivationParams& params,
                                   const ActivationSet& current, double time);

/// Slack and multiplier that make blocks (b) and (c) of the residual vanish for gap C.
/// Falls back to the floor (and the matching multiplier) when C <= floor^2.
void consistent_slack_multiplier(double gap, double barrier_weight, double slack_floor,
                                 double& slack, double& multiplier);

/// Re-shapes a solution after the enforced set changed from `old_ids` to `new_ids`.
///
/// Controls and kept constraints carry over, including their rates. A new
/// constraint row is initialised per horizon step from `new_gaps` (rows ordered
/// like `new_ids`) via consistent_slack_multiplier; its rates start at zero.
HorizonSolution relayout_solution(const HorizonSolution& old, std::span<const int> old_ids,
                                  std::span<const int> new_ids, const Matrix& new_gaps,
                                  double barrier_weight, double slack_floor);

}  // namespace dmpc
