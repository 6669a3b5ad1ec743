#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "dmpc/cgmres.hpp"
#include "dmpc/driving.hpp"

namespace dmpc::driving {

inline constexpr int kScenarioSchemaVersion = 1;

struct AgentConfig {
  LaneKeepCostParams cost;
  VehicleState start;
};

/// Complete description of a driving run. Field names in the JSON document
/// follow the coefficient symbols: w1..w4, wz, hlim, horizon_T, sample_dt,
/// y_target, v_target, s_start.
struct ScenarioConfig {
  int schema_version = kScenarioSchemaVersion;
  std::string name;
  std::vector<AgentConfig> agents;
  EllipseParams ellipse;
  double wz = 7.0;
  double hlim = 5e-7;
  double horizon_T = 2.0;   // [s]
  double sample_dt = 0.02;  // [s]
  int steps_M = 20;
  double duration = 10.0;   // [s]
  double road_curvature = 0.0;
  double hysteresis = 1.0;
  SolverConfig solver = SolverConfig::for_sample_time(0.02);

  /// Number of logged samples, duration / sample_dt + 1.
  long sample_count() const;

  /// Collects every violated invariant; empty when valid.
  std::vector<std::string> validation_errors() const;
  void validate() const;

  nlohmann::json to_json() const;
  /// 16 hex digits identifying the canonical JSON form.
  std::string hash() const;
};

/// Parses and validates a scenario document. Unknown keys are rejected and all
/// problems are reported together in a ConfigError.
ScenarioConfig load_scenario(const nlohmann::json& doc);
ScenarioConfig load_scenario_file(const std::string& path);
void save_scenario_file(const ScenarioConfig& cfg, const std::string& path);

/// Bundled scenarios: "two_agent", "five_agent", "worst_case", "separated_pair".
ScenarioConfig scenario_preset(std::string_view name);
std::vector<std::string> preset_names();

/// 64-bit FNV-1a digest as 16 hex characters.
std::string fnv1a_hex(std::string_view bytes);

}  // namespace dmpc::driving
