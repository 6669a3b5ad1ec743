#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dmpc/sample_record.hpp"

namespace dmpc {

inline constexpr int kLogFormatVersion = 1;

struct LogHeader {
  std::string mode;  // "centralized" or "decentralized"
  std::string scenario_hash;
  std::string code_version;
  std::uint64_t seed = 0;
  double sample_time = 0.0;
  int agent_count = 0;
  std::vector<std::string> state_names;
  std::vector<std::string> input_names;
  std::vector<std::pair<int, std::vector<int>>> constraints;  // id, 0-based participants
  nlohmann::json config;  // full scenario echo
};

/// A run's samples. CSV form: '#'-prefixed header lines, then one row per
/// sample with columns
///   time, <state_i>..., <input_i>... per agent i (1-based),
///   gap_c<id> per constraint, active_a<p>_c<id> per participant,
///   residual_a<i>, gmres_a<i>, lambda_err_a<i> per agent.
/// Wall times go to a sidecar "<log>.timing.csv" (time, wall_total, wall_a<i>)
/// so that the log itself is reproducible byte for byte.
struct TrajectoryLog {
  LogHeader header;
  std::vector<SampleRecord> samples;

  std::vector<std::string> column_names() const;
  std::vector<std::string> timing_column_names() const;

  void write_csv(std::ostream& out) const;
  void write_timing_csv(std::ostream& out) const;
  void save(const std::string& path) const;  // log and sidecar

  static TrajectoryLog read_csv(std::istream& in);
  /// Reads the log and, when present, its timing sidecar.
  static TrajectoryLog load(const std::string& path);

  /// Index of the constraint with the given id in header.constraints.
  std::size_t constraint_index(int id) const;
  /// Offset of (constraint, participant) in SampleRecord::flags.
  std::size_t flag_index(int id, int agent) const;
};

/// Shortest decimal representation that reads back to the same double.
std::string format_number(double v);

struct ActivationRecord {
  double time = 0.0;
  int constraint_id = 0;
  bool active = false;
};

/// Flag changes of every constraint involving `agent`, as seen by that agent.
std::vector<ActivationRecord> activation_history(const TrajectoryLog& log, int agent);
void write_activation_csv(std::ostream& out, const std::vector<ActivationRecord>& history);

}  // namespace dmpc
