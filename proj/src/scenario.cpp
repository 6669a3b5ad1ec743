#include "dmpc/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace dmpc::driving {

using nlohmann::json;

long ScenarioConfig::sample_count() const {
  return std::lround(duration / sample_dt) + 1;
}

std::vector<std::string> ScenarioConfig::validation_errors() const {
  std::vector<std::string> issues;
  auto positive = [&](double v, const char* what) {
    if (!(v > 0.0) || !std::isfinite(v)) issues.push_back(std::string(what) + " must be positive");
  };
  if (schema_version != kScenarioSchemaVersion)
    issues.push_back("unsupported schema_version " + std::to_string(schema_version));
  if (agents.empty()) issues.push_back("agents: at least one agent is required");
  positive(wz, "wz");
  positive(hlim, "hlim");
  positive(horizon_T, "horizon_T");
  positive(sample_dt, "sample_dt");
  positive(ellipse.l, "ellipse.l");
  positive(ellipse.w, "ellipse.w");
  if (!(duration >= 0.0)) issues.push_back("duration must be non-negative");
  if (steps_M <= 0) issues.push_back("steps_M must be positive");
  if (!std::isfinite(road_curvature)) issues.push_back("road_curvature must be finite");
  if (!(hysteresis >= 1.0)) issues.push_back("hysteresis must be >= 1");
  if (sample_dt > 0.0 && duration >= 0.0) {
    const double n = duration / sample_dt;
    if (std::abs(n - std::round(n)) > 1e-9 * std::max(1.0, n))
      issues.push_back("duration must be a whole number of samples");
  }
  for (std::size_t i = 0; i < agents.size(); ++i) {
    const auto& a = agents[i];
    const std::string tag = "agents[" + std::to_string(i) + "]";
    for (double w : {a.cost.w1, a.cost.w2, a.cost.w3, a.cost.w4})
      if (!(w >= 0.0)) {
        issues.push_back(tag + ": weights must be non-negative");
        break;
      }
    if (!(a.cost.v_target > 0.0)) issues.push_back(tag + ": v_target must be positive");
    if (!(std::abs(a.start.theta) < 1.5707963267948966))
      issues.push_back(tag + ": |theta_start| must be below pi/2");
    if (std::abs(1.0 - a.start.y * road_curvature) <= 1e-6)
      issues.push_back(tag + ": y_start sits on the curvature singularity");
  }
  if (solver.gmres_max_iters <= 0) issues.push_back("solver.gmres_max_iters must be positive");
  if (!(solver.gmres_tolerance > 0.0)) issues.push_back("solver.gmres_tolerance must be positive");
  if (!(solver.stabilization_gain >= 0.0)) issues.push_back("solver.zeta must be >= 0");
  if (!(solver.fd_epsilon > 0.0)) issues.push_back("solver.fd_epsilon must be positive");
  if (!(solver.newton_tolerance > 0.0)) issues.push_back("solver.newton_tolerance must be positive");
  if (solver.newton_max_iters <= 0) issues.push_back("solver.newton_max_iters must be positive");
  if (!(solver.slack_floor > 0.0)) issues.push_back("solver.slack_floor must be positive");
  return issues;
}

void ScenarioConfig::validate() const {
  auto issues = validation_errors();
  if (!issues.empty()) throw ConfigError(std::move(issues));
}

json ScenarioConfig::to_json() const {
  json doc;
  doc["schema_version"] = schema_version;
  doc["name"] = name;
  const LaneKeepCostParams base = agents.empty() ? LaneKeepCostParams{} : agents.front().cost;
  doc["w1"] = base.w1;
  doc["w2"] = base.w2;
  doc["w3"] = base.w3;
  doc["w4"] = base.w4;
  doc["wz"] = wz;
  doc["hlim"] = hlim;
  doc["horizon_T"] = horizon_T;
  doc["sample_dt"] = sample_dt;
  doc["steps_M"] = steps_M;
  doc["duration"] = duration;
  doc["road_curvature"] = road_curvature;
  doc["hysteresis"] = hysteresis;
  doc["ellipse"] = {{"l", ellipse.l}, {"w", ellipse.w}};
  doc["solver"] = {{"gmres_max_iters", solver.gmres_max_iters},
                   {"gmres_tolerance", solver.gmres_tolerance},
                   {"zeta", solver.stabilization_gain},
                   {"fd_epsilon", solver.fd_epsilon},
                   {"newton_tolerance", solver.newton_tolerance},
                   {"newton_max_iters", solver.newton_max_iters},
                   {"slack_floor", solver.slack_floor}};
  json list = json::array();
  for (const auto& a : agents) {
    json entry = {{"y_target", a.cost.y_target},
                  {"v_target", a.cost.v_target},
                  {"s_start", a.start.s},
                  {"y_start", a.start.y},
                  {"theta_start", a.start.theta}};
    if (a.cost.w1 != base.w1) entry["w1"] = a.cost.w1;
    if (a.cost.w2 != base.w2) entry["w2"] = a.cost.w2;
    if (a.cost.w3 != base.w3) entry["w3"] = a.cost.w3;
    if (a.cost.w4 != base.w4) entry["w4"] = a.cost.w4;
    list.push_back(std::move(entry));
  }
  doc["agents"] = std::move(list);
  return doc;
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string ScenarioConfig::hash() const { return fnv1a_hex(to_json().dump()); }

namespace {

// Reads typed fields from one JSON object, remembering which keys were consumed.
class FieldReader {
 public:
  FieldReader(const json& obj, std::string path, std::vector<std::string>& issues)
      : obj_(obj), path_(std::move(path)), issues_(issues) {}

  template <typename T>
  T get(const std::string& key, T fallback, bool required) {
    allowed_.insert(key);
    if (!obj_.contains(key)) {
      if (required) issues_.push_back(where(key) + " is required");
      return fallback;
    }
    const json& v = obj_.at(key);
    if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) {
        issues_.push_back(where(key) + " must be a string");
        return fallback;
      }
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) {
        issues_.push_back(where(key) + " must be an integer");
        return fallback;
      }
    } else {
      if (!v.is_number()) {
        issues_.push_back(where(key) + " must be a number");
        return fallback;
      }
    }
    return v.get<T>();
  }

  const json* object(const std::string& key) {
    allowed_.insert(key);
    if (!obj_.contains(key)) return nullptr;
    if (!obj_.at(key).is_object()) {
      issues_.push_back(where(key) + " must be an object");
      return nullptr;
    }
    return &obj_.at(key);
  }

  const json* array(const std::string& key) {
    allowed_.insert(key);
    if (!obj_.contains(key)) {
      issues_.push_back(where(key) + " is required");
      return nullptr;
    }
    if (!obj_.at(key).is_array()) {
      issues_.push_back(where(key) + " must be an array");
      return nullptr;
    }
    return &obj_.at(key);
  }

  void reject_unknown() {
    for (const auto& [key, _] : obj_.items())
      if (!allowed_.count(key)) issues_.push_back(where(key) + ": unknown key");
  }

 private:
  std::string where(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  const json& obj_;
  std::string path_;
  std::vector<std::string>& issues_;
  std::set<std::string> allowed_;
};

}  // namespace

ScenarioConfig load_scenario(const json& doc) {
  std::vector<std::string> issues;
  if (!doc.is_object()) throw ConfigError({"scenario document must be a JSON object"});

  ScenarioConfig cfg;
  FieldReader top(doc, "", issues);
  cfg.schema_version = top.get<int>("schema_version", kScenarioSchemaVersion, true);
  cfg.name = top.get<std::string>("name", "", false);
  LaneKeepCostParams base;
  base.w1 = top.get<double>("w1", base.w1, true);
  base.w2 = top.get<double>("w2", base.w2, true);
  base.w3 = top.get<double>("w3", base.w3, true);
  base.w4 = top.get<double>("w4", base.w4, true);
  cfg.wz = top.get<double>("wz", cfg.wz, true);
  cfg.hlim = top.get<double>("hlim", cfg.hlim, true);
  cfg.horizon_T = top.get<double>("horizon_T", cfg.horizon_T, true);
  cfg.sample_dt = top.get<double>("sample_dt", cfg.sample_dt, true);
  cfg.steps_M = top.get<int>("steps_M", cfg.steps_M, false);
  cfg.duration = top.get<double>("duration", cfg.duration, true);
  cfg.road_curvature = top.get<double>("road_curvature", cfg.road_curvature, false);
  cfg.hysteresis = top.get<double>("hysteresis", cfg.hysteresis, false);

  if (const json* e = top.object("ellipse")) {
    FieldReader r(*e, "ellipse", issues);
    cfg.ellipse.l = r.get<double>("l", cfg.ellipse.l, true);
    cfg.ellipse.w = r.get<double>("w", cfg.ellipse.w, true);
    r.reject_unknown();
  }

  cfg.solver = SolverConfig::for_sample_time(cfg.sample_dt > 0.0 ? cfg.sample_dt : 0.02);
  if (const json* s = top.object("solver")) {
    FieldReader r(*s, "solver", issues);
    auto& sv = cfg.solver;
    sv.gmres_max_iters = r.get<int>("gmres_max_iters", sv.gmres_max_iters, false);
    sv.gmres_tolerance = r.get<double>("gmres_tolerance", sv.gmres_tolerance, false);
    sv.stabilization_gain = r.get<double>("zeta", sv.stabilization_gain, false);
    sv.fd_epsilon = r.get<double>("fd_epsilon", sv.fd_epsilon, false);
    sv.newton_tolerance = r.get<double>("newton_tolerance", sv.newton_tolerance, false);
    sv.newton_max_iters = r.get<int>("newton_max_iters", sv.newton_max_iters, false);
    sv.slack_floor = r.get<double>("slack_floor", sv.slack_floor, false);
    r.reject_unknown();
  }

  if (const json* list = top.array("agents")) {
    for (std::size_t i = 0; i < list->size(); ++i) {
      const json& entry = (*list)[i];
      const std::string tag = "agents[" + std::to_string(i) + "]";
      if (!entry.is_object()) {
        issues.push_back(tag + " must be an object");
        continue;
      }
      FieldReader r(entry, tag, issues);
      AgentConfig a;
      a.cost = base;
      a.cost.y_target = r.get<double>("y_target", 0.0, true);
      a.cost.v_target = r.get<double>("v_target", 1.0, true);
      a.cost.w1 = r.get<double>("w1", base.w1, false);
      a.cost.w2 = r.get<double>("w2", base.w2, false);
      a.cost.w3 = r.get<double>("w3", base.w3, false);
      a.cost.w4 = r.get<double>("w4", base.w4, false);
      a.start.s = r.get<double>("s_start", 0.0, true);
      a.start.y = r.get<double>("y_start", a.cost.y_target, false);
      a.start.theta = r.get<double>("theta_start", 0.0, false);
      r.reject_unknown();
      cfg.agents.push_back(a);
    }
  }
  top.reject_unknown();

  auto more = cfg.validation_errors();
  // an empty agent list is already reported by the reader when the key is missing
  for (auto& m : more)
    if (std::find(issues.begin(), issues.end(), m) == issues.end()) issues.push_back(std::move(m));
  if (!issues.empty()) throw ConfigError(std::move(issues));
  return cfg;
}

ScenarioConfig load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open scenario file '" + path + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& e) {
    throw ConfigError({"'" + path + "' is not valid JSON: " + e.what()});
  }
  return load_scenario(doc);
}

void save_scenario_file(const ScenarioConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write scenario file '" + path + "'");
  out << cfg.to_json().dump(2) << '\n';
}

namespace {

AgentConfig agent(double y_target, double v_target, double s_start) {
  AgentConfig a;
  a.cost.y_target = y_target;
  a.cost.v_target = v_target;
  a.start = {s_start, y_target, 0.0};
  return a;
}

}  // namespace

ScenarioConfig scenario_preset(std::string_view name) {
  ScenarioConfig cfg;  // coefficient defaults are the published table values
  cfg.name = std::string(name);
  if (name == "two_agent") {
    cfg.agents = {agent(0.1, 30.0, 2.0), agent(0.0, 24.0, 20.0)};
    cfg.duration = 10.0;
  } else if (name == "five_agent") {
    cfg.agents = {agent(0.1, 30.0, 2.0), agent(0.0, 24.0, 20.0), agent(0.0, 24.0, 50.0),
                  agent(-0.1, 18.0, 680.0), agent(-0.1, 18.0, 480.0)};
    cfg.duration = 120.0;
  } else if (name == "worst_case") {
    // Agent 1 runs into a column of four slower vehicles, so its subproblem
    // goes from zero to four enforced couplings and back.
    cfg.agents = {agent(0.1, 30.0, 0.0), agent(0.0, 18.0, 250.0), agent(0.0, 18.0, 300.0),
                  agent(-0.1, 18.0, 350.0), agent(-0.1, 18.0, 400.0)};
    cfg.duration = 55.0;
  } else if (name == "separated_pair") {
    cfg.agents = {agent(0.0, 18.0, 0.0), agent(0.0, 24.0, 600.0)};
    cfg.agents[0].start.y = 0.6;
    cfg.agents[1].start.y = -0.4;
    cfg.duration = 10.0;
  } else {
    throw ConfigError({"unknown preset '" + std::string(name) + "'"});
  }
  return cfg;
}

std::vector<std::string> preset_names() {
  return {"two_agent", "five_agent", "worst_case", "separated_pair"};
}

}  // namespace dmpc::driving
