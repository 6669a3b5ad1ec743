#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dmpc/errors.hpp"
#include "dmpc/trajectory_log.hpp"

namespace dmpc {

/// Raised when two logs cannot be compared.
class LogMismatch : public Error {
 public:
  using Error::Error;
};

struct TimingSummary {
  double mean = 0.0;  // [s]
  double max = 0.0;   // [s]
  long count = 0;
};

struct TimingBucket {
  int active_constraints = 0;
  TimingSummary wall;
};

/// Step time statistics of one log, ignoring sample 0 (initialization).
/// Centralized logs count the whole joint update of a sample; decentralized
/// logs count every agent's own update.
TimingSummary step_time_summary(const TrajectoryLog& log);

struct ComparisonReport {
  std::string hash;
  std::string mode_a, mode_b;
  double max_lateral_difference = 0.0;          // [m]
  double max_lateral_difference_percent = 0.0;  // of the reference run's max |y|
  double reference_max_lateral = 0.0;           // [m]
  double max_lateral_difference_time = 0.0;     // [s]
  std::vector<std::pair<double, double>> lateral_difference;  // time, max_i |y_i^a - y_i^b|
  TimingSummary timing_a, timing_b;
  std::vector<TimingBucket> buckets_a, buckets_b;  // decentralized logs only

  nlohmann::json to_json() const;
  void write_series_csv(std::ostream& out) const;
};

/// The reference for the percentage is the centralized log when there is one, else `a`.
ComparisonReport compare_logs(const TrajectoryLog& a, const TrajectoryLog& b);

struct TimingProfile {
  int agent = 0;
  std::vector<TimingBucket> buckets;  // ascending active count, populated only
  bool monotone = true;         // mean non-decreasing with the active count
  bool zero_is_minimum = true;  // bucket 0 (when present) has the smallest mean

  nlohmann::json to_json() const;
  void write_csv(std::ostream& out) const;
};

/// Wall time of `agent`'s updates grouped by how many of its constraints it enforced.
TimingProfile timing_profile(const TrajectoryLog& log, int agent);

/// Buckets pooled over all agents of a decentralized log.
std::vector<TimingBucket> pooled_buckets(const TrajectoryLog& log);

}  // namespace dmpc
