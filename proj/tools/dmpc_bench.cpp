// Command-line driver: run scenarios, compare logs, profile step times.
//
// Exit codes:
//   0  success
//   2  invalid command line
//   3  invalid scenario or configuration
//   4  initialization failed (infeasible start or initial solve did not converge)
//   5  solver failure during the run
//   6  file I/O failure
//   7  logs cannot be compared (different scenarios or sample grids)
//   8  replay did not reproduce the log
//   1  any other error

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "dmpc/bench.hpp"
#include "dmpc/errors.hpp"
#include "dmpc/runner.hpp"
#include "dmpc/scenario.hpp"

namespace fs = std::filesystem;
using namespace dmpc;

namespace {

enum Exit { kOk = 0, kOther = 1, kUsage = 2, kConfig = 3, kInit = 4, kSolver = 5, kIo = 6,
            kMismatch = 7, kReplay = 8 };

driving::ScenarioConfig resolve_scenario(const std::string& arg) {
  if (fs::exists(arg)) return driving::load_scenario_file(arg);
  for (const auto& name : driving::preset_names())
    if (name == arg) return driving::scenario_preset(arg);
  throw IoError("no scenario file or preset named '" + arg + "'");
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << content)) throw IoError("cannot write '" + path.string() + "'");
}

template <typename Fn>
std::string render(Fn&& fn) {
  std::ostringstream out;
  fn(out);
  return out.str();
}

void emit_plots(const TrajectoryLog& log, const fs::path& dir) {
  fs::create_directories(dir);
  for (int a = 0; a < log.header.agent_count; ++a) {
    const std::string label = std::to_string(a + 1);
    write_file(dir / ("activation_a" + label + ".csv"),
               render([&](std::ostream& o) { write_activation_csv(o, activation_history(log, a)); }));
    if (log.header.mode == "decentralized")
      write_file(dir / ("timing_profile_a" + label + ".csv"),
                 render([&](std::ostream& o) { timing_profile(log, a).write_csv(o); }));
  }
  std::ostringstream lateral;
  lateral << "time";
  for (int a = 0; a < log.header.agent_count; ++a) lateral << ",s_" << a + 1 << ",y_" << a + 1;
  lateral << '\n';
  for (const auto& s : log.samples) {
    lateral << format_number(s.time);
    for (const auto& x : s.states) lateral << ',' << format_number(x(0)) << ',' << format_number(x(1));
    lateral << '\n';
  }
  write_file(dir / "trajectories.csv", lateral.str());
}

std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Relaxed-constraint distributed MPC benchmark"};
  app.require_subcommand(1);

  std::string scenario_arg, mode_arg = "decentralized", out_path, plots_dir, transcript;
  double duration = -1.0;
  int workers = 1;
  std::uint64_t seed = 0;
  auto* run = app.add_subcommand("run", "Run a scenario and write its CSV log");
  run->add_option("--scenario", scenario_arg, "Scenario JSON file or preset name")->required();
  run->add_option("--mode", mode_arg, "centralized | decentralized")
      ->check(CLI::IsMember({"centralized", "decentralized"}));
  run->add_option("--out", out_path, "Output log path (timing sidecar at <out>.timing.csv)")
      ->required();
  run->add_option("--duration", duration, "Override the scenario duration [s]")
      ->check(CLI::PositiveNumber);
  run->add_option("--workers", workers, "Parallel agent solves (env DMPC_WORKERS overrides)")
      ->check(CLI::Range(1, 1024));
  run->add_option("--seed", seed, "Seed for the agent execution order");
  run->add_option("--emit-plots", plots_dir, "Directory for plot-ready CSV files");
  run->add_option("--transcript", transcript, "Binary dump of every broadcast message");

  std::string log_a, log_b, report_path, series_path;
  auto* compare = app.add_subcommand("compare", "Compare two logs of the same scenario");
  compare->add_option("log_a", log_a)->required();
  compare->add_option("log_b", log_b)->required();
  compare->add_option("--out", report_path, "Report JSON path (default: stdout)");
  compare->add_option("--series", series_path, "Lateral difference series CSV");

  std::string profile_log, profile_out;
  int profile_agent = 1;
  auto* profile = app.add_subcommand("timing-profile", "Step times by active constraint count");
  profile->add_option("log", profile_log)->required();
  profile->add_option("--agent", profile_agent, "Agent label (1-based)")->check(CLI::PositiveNumber);
  profile->add_option("--out", profile_out, "CSV output path");

  std::string replay_log, replay_out;
  auto* replay_cmd = app.add_subcommand("replay", "Re-run a log from its config echo and check it");
  replay_cmd->add_option("log", replay_log)->required();
  replay_cmd->add_option("--out", replay_out, "Where to write the reproduced log");

  std::string export_name, export_path;
  auto* export_cmd = app.add_subcommand("export-preset", "Write a bundled scenario as JSON");
  export_cmd->add_option("name", export_name)->required();
  export_cmd->add_option("path", export_path)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*run) {
      const auto scenario = resolve_scenario(scenario_arg);
      RunOptions options;
      if (duration > 0.0) options.duration = duration;
      options.workers = workers_from_env(workers);
      options.seed = seed;
      options.transcript_path = transcript;
      std::size_t warned = 0;
      options.on_sample = [&](const SampleRecord& s) {
        for (const auto& w : s.warnings)
          if (warned++ < 50) std::cerr << "warning: " << w << '\n';
      };
      const TrajectoryLog log = run_scenario(scenario, parse_run_mode(mode_arg), options);
      log.save(out_path);
      if (!plots_dir.empty()) emit_plots(log, plots_dir);
      std::cerr << log.samples.size() << " samples written to " << out_path << '\n';
    } else if (*compare) {
      const auto report = compare_logs(TrajectoryLog::load(log_a), TrajectoryLog::load(log_b));
      const std::string json = report.to_json().dump(2) + "\n";
      if (report_path.empty())
        std::cout << json;
      else
        write_file(report_path, json);
      if (!series_path.empty())
        write_file(series_path, render([&](std::ostream& o) { report.write_series_csv(o); }));
    } else if (*profile) {
      const auto p = timing_profile(TrajectoryLog::load(profile_log), profile_agent - 1);
      std::cout << p.to_json().dump(2) << '\n';
      if (!profile_out.empty())
        write_file(profile_out, render([&](std::ostream& o) { p.write_csv(o); }));
    } else if (*replay_cmd) {
      const TrajectoryLog original = TrajectoryLog::load(replay_log);
      const TrajectoryLog again = replay(original, workers_from_env(1));
      const std::string bytes = render([&](std::ostream& o) { again.write_csv(o); });
      if (!replay_out.empty()) again.save(replay_out);
      if (bytes != read_bytes(replay_log)) {
        std::cerr << "replay differs from " << replay_log << '\n';
        return kReplay;
      }
      std::cerr << "replay reproduces " << replay_log << '\n';
    } else if (*export_cmd) {
      driving::save_scenario_file(driving::scenario_preset(export_name), export_path);
    }
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kConfig;
  } catch (const InitializationError& e) {
    std::cerr << "initialization failed: " << e.what() << '\n';
    return kInit;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kIo;
  } catch (const LogMismatch& e) {
    std::cerr << "cannot compare: " << e.what() << '\n';
    return kMismatch;
  } catch (const DomainError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kConfig;
  } catch (const Error& e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return kSolver;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kOther;
  }
  return kOk;
}
