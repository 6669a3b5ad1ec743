#include "dmpc/trajectory_log.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "dmpc/errors.hpp"

namespace dmpc {

std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

double parse_number(const std::string& text) {
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw IoError("log: malformed number '" + text + "'");
  return v;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::string join(const std::vector<std::string>& parts, char sep) {
  std::string out;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    if (k) out += sep;
    out += parts[k];
  }
  return out;
}

std::string label(int agent) { return std::to_string(agent + 1); }

}  // namespace

std::size_t TrajectoryLog::constraint_index(int id) const {
  for (std::size_t j = 0; j < header.constraints.size(); ++j)
    if (header.constraints[j].first == id) return j;
  throw LayoutError("log has no constraint " + std::to_string(id));
}

std::size_t TrajectoryLog::flag_index(int id, int agent) const {
  std::size_t offset = 0;
  for (const auto& [cid, parts] : header.constraints) {
    for (int p : parts) {
      if (cid == id && p == agent) return offset;
      ++offset;
    }
  }
  throw LayoutError("agent " + label(agent) + " does not take part in constraint " +
                    std::to_string(id));
}

std::vector<std::string> TrajectoryLog::column_names() const {
  std::vector<std::string> cols{"time"};
  for (int a = 0; a < header.agent_count; ++a) {
    for (const auto& s : header.state_names) cols.push_back(s + "_" + label(a));
    for (const auto& u : header.input_names) cols.push_back(u + "_" + label(a));
  }
  for (const auto& [id, parts] : header.constraints) cols.push_back("gap_c" + std::to_string(id));
  for (const auto& [id, parts] : header.constraints)
    for (int p : parts) cols.push_back("active_a" + label(p) + "_c" + std::to_string(id));
  for (int a = 0; a < header.agent_count; ++a) cols.push_back("residual_a" + label(a));
  for (int a = 0; a < header.agent_count; ++a) cols.push_back("gmres_a" + label(a));
  for (int a = 0; a < header.agent_count; ++a) cols.push_back("lambda_err_a" + label(a));
  return cols;
}

std::vector<std::string> TrajectoryLog::timing_column_names() const {
  std::vector<std::string> cols{"time", "wall_total"};
  for (int a = 0; a < header.agent_count; ++a) cols.push_back("wall_a" + label(a));
  return cols;
}

void TrajectoryLog::write_csv(std::ostream& out) const {
  out << "# dmpc trajectory log v" << kLogFormatVersion << '\n';
  out << "# mode: " << header.mode << '\n';
  out << "# scenario_hash: " << header.scenario_hash << '\n';
  out << "# code_version: " << header.code_version << '\n';
  out << "# seed: " << header.seed << '\n';
  out << "# sample_time: " << format_number(header.sample_time) << '\n';
  out << "# agents: " << header.agent_count << '\n';
  out << "# states: " << join(header.state_names, ' ') << '\n';
  out << "# inputs: " << join(header.input_names, ' ') << '\n';
  std::vector<std::string> cs;
  for (const auto& [id, parts] : header.constraints) {
    std::vector<std::string> ps;
    for (int p : parts) ps.push_back(label(p));
    cs.push_back(std::to_string(id) + ":" + join(ps, '-'));
  }
  out << "# constraints: " << join(cs, ' ') << '\n';
  out << "# config: " << header.config.dump() << '\n';
  out << join(column_names(), ',') << '\n';

  const std::size_t nx = header.state_names.size(), nu = header.input_names.size();
  std::string row;
  for (const auto& s : samples) {
    row = format_number(s.time);
    auto add = [&](const std::string& v) {
      row += ',';
      row += v;
    };
    for (int a = 0; a < header.agent_count; ++a) {
      if (s.states[a].size() != static_cast<Index>(nx) || s.inputs[a].size() != static_cast<Index>(nu))
        throw LayoutError("log sample does not match the header dimensions");
      for (std::size_t k = 0; k < nx; ++k) add(format_number(s.states[a](k)));
      for (std::size_t k = 0; k < nu; ++k) add(format_number(s.inputs[a](k)));
    }
    for (double g : s.gaps) add(format_number(g));
    for (auto f : s.flags) add(f ? "1" : "0");
    for (double r : s.residuals) add(format_number(r));
    for (int g : s.gmres_iters) add(std::to_string(g));
    for (double e : s.multiplier_errors) add(format_number(e));
    out << row << '\n';
  }
}

void TrajectoryLog::write_timing_csv(std::ostream& out) const {
  out << join(timing_column_names(), ',') << '\n';
  for (const auto& s : samples) {
    out << format_number(s.time) << ',' << format_number(s.wall_total);
    for (double w : s.wall_times) out << ',' << format_number(w);
    out << '\n';
  }
}

void TrajectoryLog::save(const std::string& path) const {
  {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    write_csv(out);
    if (!out) throw IoError("write to '" + path + "' failed");
  }
  std::ofstream timing(path + ".timing.csv", std::ios::binary);
  if (!timing) throw IoError("cannot open '" + path + ".timing.csv' for writing");
  write_timing_csv(timing);
  if (!timing) throw IoError("write to '" + path + ".timing.csv' failed");
}

TrajectoryLog TrajectoryLog::read_csv(std::istream& in) {
  TrajectoryLog log;
  auto& h = log.header;
  std::string line;
  std::map<std::string, std::string> meta;
  std::vector<std::string> columns;
  while (std::getline(in, line)) {
    if (line.rfind("# ", 0) == 0) {
      const auto colon = line.find(": ");
      if (colon != std::string::npos) meta[line.substr(2, colon - 2)] = line.substr(colon + 2);
      continue;
    }
    columns = split(line, ',');
    break;
  }
  if (columns.empty()) throw IoError("log: missing column header");
  try {
    h.mode = meta.at("mode");
    h.scenario_hash = meta.at("scenario_hash");
    h.code_version = meta.at("code_version");
    h.seed = std::stoull(meta.at("seed"));
    h.sample_time = parse_number(meta.at("sample_time"));
    h.agent_count = std::stoi(meta.at("agents"));
    h.state_names = split(meta.at("states"), ' ');
    h.input_names = split(meta.at("inputs"), ' ');
    for (const auto& c : split(meta.at("constraints"), ' ')) {
      const auto colon = c.find(':');
      std::vector<int> parts;
      for (const auto& p : split(c.substr(colon + 1), '-')) parts.push_back(std::stoi(p) - 1);
      h.constraints.emplace_back(std::stoi(c.substr(0, colon)), parts);
    }
    h.config = nlohmann::json::parse(meta.at("config"));
  } catch (const std::out_of_range&) {
    throw IoError("log: incomplete header");
  } catch (const std::invalid_argument&) {
    throw IoError("log: malformed header");
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("log: malformed config echo: ") + e.what());
  }
  if (columns != log.column_names()) throw IoError("log: column layout does not match its header");

  const int n = h.agent_count;
  const std::size_t nx = h.state_names.size(), nu = h.input_names.size();
  std::size_t nflags = 0;
  for (const auto& c : h.constraints) nflags += c.second.size();
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != columns.size()) throw IoError("log: row with wrong number of cells");
    std::size_t k = 0;
    SampleRecord s;
    s.time = parse_number(cells[k++]);
    for (int a = 0; a < n; ++a) {
      Vector x(nx), u(nu);
      for (std::size_t i = 0; i < nx; ++i) x(i) = parse_number(cells[k++]);
      for (std::size_t i = 0; i < nu; ++i) u(i) = parse_number(cells[k++]);
      s.states.push_back(x);
      s.inputs.push_back(u);
    }
    for (std::size_t j = 0; j < h.constraints.size(); ++j) s.gaps.push_back(parse_number(cells[k++]));
    for (std::size_t j = 0; j < nflags; ++j) s.flags.push_back(cells[k++] == "1" ? 1 : 0);
    for (int a = 0; a < n; ++a) s.residuals.push_back(parse_number(cells[k++]));
    for (int a = 0; a < n; ++a) s.gmres_iters.push_back(static_cast<int>(parse_number(cells[k++])));
    for (int a = 0; a < n; ++a) s.multiplier_errors.push_back(parse_number(cells[k++]));
    s.wall_times.assign(n, 0.0);
    log.samples.push_back(std::move(s));
  }
  return log;
}

TrajectoryLog TrajectoryLog::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open log '" + path + "'");
  TrajectoryLog log = read_csv(in);
  std::ifstream timing(path + ".timing.csv", std::ios::binary);
  if (!timing) return log;
  std::string line;
  std::getline(timing, line);
  if (split(line, ',') != log.timing_column_names()) throw IoError("timing sidecar does not match log");
  std::size_t row = 0;
  while (std::getline(timing, line)) {
    if (line.empty()) continue;
    if (row >= log.samples.size()) throw IoError("timing sidecar has more rows than the log");
    const auto cells = split(line, ',');
    auto& s = log.samples[row++];
    s.wall_total = parse_number(cells.at(1));
    for (int a = 0; a < log.header.agent_count; ++a) s.wall_times[a] = parse_number(cells.at(2 + a));
  }
  return log;
}

std::vector<ActivationRecord> activation_history(const TrajectoryLog& log, int agent) {
  std::vector<ActivationRecord> out;
  std::map<int, bool> last;
  for (const auto& [id, parts] : log.header.constraints) {
    if (std::find(parts.begin(), parts.end(), agent) == parts.end()) continue;
    last[id] = false;
  }
  for (const auto& s : log.samples)
    for (auto& [id, flag] : last) {
      const bool now = s.flags.at(log.flag_index(id, agent)) != 0;
      if (now != flag) out.push_back({s.time, id, now});
      flag = now;
    }
  return out;
}

void write_activation_csv(std::ostream& out, const std::vector<ActivationRecord>& history) {
  out << "time,constraint_id,flag\n";
  for (const auto& r : history)
    out << format_number(r.time) << ',' << r.constraint_id << ',' << (r.active ? 1 : 0) << '\n';
}

}  // namespace dmpc
