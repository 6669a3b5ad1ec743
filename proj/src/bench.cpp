#include "dmpc/bench.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>

#include "dmpc/errors.hpp"

namespace dmpc {

namespace {

class Accumulator {
 public:
  void add(double v) {
    sum_ += v;
    max_ = std::max(max_, v);
    ++count_;
  }
  TimingSummary summary() const {
    return {count_ ? sum_ / static_cast<double>(count_) : 0.0, max_, count_};
  }

 private:
  double sum_ = 0.0;
  double max_ = 0.0;
  long count_ = 0;
};

bool has_timing(const TrajectoryLog& log) {
  for (const auto& s : log.samples)
    if (s.wall_total > 0.0) return true;
  return false;
}

int active_count(const TrajectoryLog& log, const SampleRecord& s, int agent) {
  int count = 0;
  for (const auto& [id, parts] : log.header.constraints)
    if (std::find(parts.begin(), parts.end(), agent) != parts.end() &&
        s.flags.at(log.flag_index(id, agent)) != 0)
      ++count;
  return count;
}

std::vector<TimingBucket> to_buckets(const std::map<int, Accumulator>& acc) {
  std::vector<TimingBucket> out;
  for (const auto& [k, a] : acc) out.push_back({k, a.summary()});
  return out;
}

nlohmann::json summary_json(const TimingSummary& t) {
  return {{"mean_s", t.mean}, {"max_s", t.max}, {"count", t.count}};
}

nlohmann::json buckets_json(const std::vector<TimingBucket>& buckets) {
  auto out = nlohmann::json::array();
  for (const auto& b : buckets)
    out.push_back({{"active_constraints", b.active_constraints},
                   {"mean_s", b.wall.mean},
                   {"max_s", b.wall.max},
                   {"count", b.wall.count}});
  return out;
}

}  // namespace

TimingSummary step_time_summary(const TrajectoryLog& log) {
  Accumulator acc;
  const bool central = log.header.mode == "centralized";
  for (std::size_t k = 1; k < log.samples.size(); ++k) {
    const auto& s = log.samples[k];
    if (central)
      acc.add(s.wall_total);
    else
      for (double w : s.wall_times) acc.add(w);
  }
  return acc.summary();
}

std::vector<TimingBucket> pooled_buckets(const TrajectoryLog& log) {
  if (log.header.mode != "decentralized") return {};
  std::map<int, Accumulator> acc;
  for (std::size_t k = 1; k < log.samples.size(); ++k)
    for (int a = 0; a < log.header.agent_count; ++a)
      acc[active_count(log, log.samples[k], a)].add(log.samples[k].wall_times[a]);
  return to_buckets(acc);
}

ComparisonReport compare_logs(const TrajectoryLog& a, const TrajectoryLog& b) {
  if (a.header.scenario_hash != b.header.scenario_hash)
    throw LogMismatch("logs belong to different scenarios: " + a.header.scenario_hash + " vs " +
                      b.header.scenario_hash);
  if (a.samples.size() != b.samples.size() || a.header.agent_count != b.header.agent_count)
    throw LogMismatch("logs have different sample grids");
  const auto yi = [&](const TrajectoryLog& log) {
    const auto& names = log.header.state_names;
    const auto it = std::find(names.begin(), names.end(), "y");
    if (it == names.end()) throw LogMismatch("log has no lateral state 'y'");
    return static_cast<Index>(it - names.begin());
  };
  const Index iy = yi(a);
  if (yi(b) != iy) throw LogMismatch("logs order their states differently");

  ComparisonReport r;
  r.hash = a.header.scenario_hash;
  r.mode_a = a.header.mode;
  r.mode_b = b.header.mode;
  const TrajectoryLog& ref = (b.header.mode == "centralized" && a.header.mode != "centralized") ? b : a;
  for (std::size_t k = 0; k < a.samples.size(); ++k) {
    const auto& sa = a.samples[k];
    const auto& sb = b.samples[k];
    if (sa.time != sb.time) throw LogMismatch("logs have different sample times");
    double diff = 0.0;
    for (int i = 0; i < a.header.agent_count; ++i) {
      diff = std::max(diff, std::abs(sa.states[i](iy) - sb.states[i](iy)));
      r.reference_max_lateral =
          std::max(r.reference_max_lateral, std::abs(ref.samples[k].states[i](iy)));
    }
    r.lateral_difference.emplace_back(sa.time, diff);
    if (diff > r.max_lateral_difference) {
      r.max_lateral_difference = diff;
      r.max_lateral_difference_time = sa.time;
    }
  }
  r.max_lateral_difference_percent =
      r.reference_max_lateral > 0.0 ? 100.0 * r.max_lateral_difference / r.reference_max_lateral
                                    : 0.0;
  r.timing_a = step_time_summary(a);
  r.timing_b = step_time_summary(b);
  r.buckets_a = pooled_buckets(a);
  r.buckets_b = pooled_buckets(b);
  return r;
}

nlohmann::json ComparisonReport::to_json() const {
  return {{"scenario_hash", hash},
          {"mode_a", mode_a},
          {"mode_b", mode_b},
          {"max_lateral_difference_m", max_lateral_difference},
          {"max_lateral_difference_percent", max_lateral_difference_percent},
          {"max_lateral_difference_time_s", max_lateral_difference_time},
          {"reference_max_lateral_m", reference_max_lateral},
          {"timing_a", summary_json(timing_a)},
          {"timing_b", summary_json(timing_b)},
          {"buckets_a", buckets_json(buckets_a)},
          {"buckets_b", buckets_json(buckets_b)}};
}

void ComparisonReport::write_series_csv(std::ostream& out) const {
  out << "time,lateral_difference\n";
  for (const auto& [t, d] : lateral_difference)
    out << format_number(t) << ',' << format_number(d) << '\n';
}

TimingProfile timing_profile(const TrajectoryLog& log, int agent) {
  if (log.header.mode != "decentralized")
    throw LogMismatch("timing profile needs a decentralized log (got " + log.header.mode + ")");
  if (agent < 0 || agent >= log.header.agent_count)
    throw LogMismatch("log has no agent " + std::to_string(agent + 1));
  if (!has_timing(log)) throw LogMismatch("log has no timing data (missing sidecar?)");
  std::map<int, Accumulator> acc;
  for (std::size_t k = 1; k < log.samples.size(); ++k)
    acc[active_count(log, log.samples[k], agent)].add(log.samples[k].wall_times[agent]);

  TimingProfile p;
  p.agent = agent;
  p.buckets = to_buckets(acc);
  for (std::size_t k = 1; k < p.buckets.size(); ++k)
    if (p.buckets[k].wall.mean < p.buckets[k - 1].wall.mean) p.monotone = false;
  if (!p.buckets.empty() && p.buckets.front().active_constraints == 0)
    for (const auto& b : p.buckets)
      if (b.wall.mean < p.buckets.front().wall.mean) p.zero_is_minimum = false;
  return p;
}

nlohmann::json TimingProfile::to_json() const {
  return {{"agent", agent + 1},
          {"buckets", buckets_json(buckets)},
          {"monotone", monotone},
          {"zero_is_minimum", zero_is_minimum}};
}

void TimingProfile::write_csv(std::ostream& out) const {
  out << "active_constraints,mean_s,max_s,count\n";
  for (const auto& b : buckets)
    out << b.active_constraints << ',' << format_number(b.wall.mean) << ','
        << format_number(b.wall.max) << ',' << b.wall.count << '\n';
}

}  // namespace dmpc
