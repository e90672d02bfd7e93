// qbal: simulate queueing scenarios and check their balance relations.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "qbal/errors.hpp"
#include "qbal/estimators.hpp"
#include "qbal/jump_log.hpp"
#include "qbal/scenario.hpp"
#include "qbal/verifier.hpp"

namespace {

enum Exit { kOk = 0, kCheckFailed = 1, kConfig = 2, kSimulation = 3, kIo = 4 };

struct Overrides {
  std::optional<double> horizon;
  std::optional<std::uint64_t> events;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> replications;
  std::optional<std::string> tie_policy;
  std::size_t threads = 1;
  std::string out;
  std::string jump_log;
  std::string plot_dir;
  bool quiet = false;
};

void add_run_flags(CLI::App* cmd, std::string& scenario, Overrides& o) {
  cmd->add_option("scenario", scenario, "Scenario file (JSON)")->required();
  cmd->add_option("--horizon", o.horizon, "Simulated time per replication");
  cmd->add_option("--events", o.events, "Event cap per replication");
  cmd->add_option("--seed", o.seed, "Root seed");
  cmd->add_option("--replications", o.replications, "Number of replications");
  cmd->add_option("--tie-policy", o.tie_policy, "Coinciding arrival and departure: reject or jitter")
      ->check(CLI::IsMember({"reject", "jitter"}));
  cmd->add_option("--threads", o.threads, "Worker threads for replications")->check(CLI::Range(1, 1024));
  cmd->add_option("--out", o.out, "Output file");
  cmd->add_option("--jump-log", o.jump_log, "Stream the jump log to this file");
  cmd->add_option("--plot-dir", o.plot_dir, "Directory for per-check CSV files");
  cmd->add_flag("--quiet", o.quiet, "Only print failures");
}

qbal::Scenario load_with_overrides(const std::string& path, const Overrides& o) {
  auto s = qbal::load_scenario(path);
  if (o.horizon) {
    if (!(*o.horizon > 0.0)) throw qbal::ConfigError("--horizon", "must be positive");
    s.run.horizon = *o.horizon;
  }
  if (o.events) s.run.max_events = *o.events;
  if (o.seed) s.run.seed = *o.seed;
  if (o.replications) {
    if (*o.replications == 0) throw qbal::ConfigError("--replications", "must be at least 1");
    s.run.replications = *o.replications;
  }
  if (o.tie_policy) s.run.tie_policy = *o.tie_policy == "reject" ? qbal::TiePolicy::Reject : qbal::TiePolicy::Jitter;
  if (!o.jump_log.empty()) s.output.jump_log = o.jump_log;
  if (!o.out.empty()) s.output.report = o.out;
  if (!o.plot_dir.empty()) s.output.plot_dir = o.plot_dir;
  return s;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw qbal::IoError("cannot write '" + path + "'");
  out << text;
  if (!out) throw qbal::IoError("failed writing '" + path + "'");
}

void print_summary(const qbal::BalanceReport& report, bool quiet) {
  if (!quiet) {
    std::cout << qbal::summary_text(report);
    return;
  }
  for (const auto& c : report.checks) {
    if (c.verdict == qbal::Verdict::Fail) std::cout << "FAIL " << c.name << '\n';
  }
}

int finish_report(const qbal::Scenario& s, const qbal::BalanceReport& report, bool quiet) {
  if (!s.output.report.empty()) write_file(s.output.report, qbal::dump_report(report));
  if (!s.output.plot_dir.empty()) {
    const auto files = qbal::emit_plotdata(report, s.output.plot_dir);
    if (!quiet) std::cout << files.size() << " plot files in " << s.output.plot_dir << '\n';
  }
  print_summary(report, quiet);
  return report.all_pass() ? kOk : kCheckFailed;
}

int cmd_run(const std::string& path, const Overrides& o) {
  auto s = load_with_overrides(path, o);
  const auto runs = qbal::simulate(s, {o.threads});
  for (std::size_t r = 0; r < runs.size(); ++r) {
    const auto& run = runs[r];
    std::printf("replication %zu: events %llu  end time %.6g  jitters %llu  max total queue %lld\n", r + 1,
                static_cast<unsigned long long>(run.events), run.end_time,
                static_cast<unsigned long long>(run.jitters), static_cast<long long>(run.max_total_queue));
  }
  const auto est = qbal::build_estimates(runs, qbal::estimation_options(s));
  const auto pgfs = qbal::summarize(est, s.evaluation_grid());
  if (!s.output.report.empty()) write_file(s.output.report, qbal::estimates_document(pgfs).dump(2) + "\n");
  if (!s.output.plot_dir.empty()) {
    std::filesystem::create_directories(s.output.plot_dir);
    for (const auto& p : pgfs) {
      std::ofstream out(std::filesystem::path(s.output.plot_dir) / (p.name + ".csv"));
      if (!out) throw qbal::IoError("cannot write into '" + s.output.plot_dir + "'");
      qbal::write_csv(out, p);
    }
  }
  if (!o.quiet) {
    std::printf("arrival epochs %zu  departure epochs %zu  observed time %.6g\n", est.arrival_samples,
                est.departure_samples, est.observed_time());
  }
  return kOk;
}

int cmd_verify(const std::string& path, const Overrides& o) {
  auto s = load_with_overrides(path, o);
  return finish_report(s, qbal::run_scenario(s, {o.threads}), o.quiet);
}

int cmd_replay(const std::string& log_path, const std::string& scenario_path, std::optional<double> end_time,
               const Overrides& o) {
  const auto trace = qbal::read_jump_log_file(log_path);
  qbal::Scenario s;
  std::optional<qbal::Scenario> loaded;
  if (!scenario_path.empty()) {
    loaded = load_with_overrides(scenario_path, o);
    s = *loaded;
    if (qbal::model_dimension(s.model) != trace.x0.size()) {
      throw qbal::ConfigError("model", "dimension differs from the jump log");
    }
  } else {
    s.name = log_path;
    if (!o.out.empty()) s.output.report = o.out;
    if (!o.plot_dir.empty()) s.output.plot_dir = o.plot_dir;
  }
  std::vector<qbal::RunResult> runs;
  runs.push_back(qbal::replay_trace(trace, end_time.value_or(std::numeric_limits<double>::quiet_NaN())));
  const auto est = qbal::build_estimates(runs, qbal::estimation_options(s));
  qbal::VerifyInput in;
  in.spec = loaded ? &loaded->model : nullptr;
  in.estimates = &est;
  in.runs = runs;
  in.grid = qbal::default_grid(trace.x0.size());
  if (loaded) in.grid = loaded->evaluation_grid();
  in.warmup_fraction = s.run.warmup_fraction;
  in.k = s.run.k;
  if (loaded && loaded->checks) in.families = *loaded->checks;
  qbal::BalanceReport report;
  report.scenario = s.name;
  report.seed = loaded ? s.run.seed : 0;
  report.horizon = runs.front().end_time;
  report.metadata["source"] = "jump log";
  report.metadata["records"] = trace.records.size();
  report.checks = qbal::verify(in);
  return finish_report(s, report, o.quiet);
}

int cmd_list(const std::string& dir) {
  for (const auto& path : qbal::list_scenario_files(dir)) {
    try {
      const auto s = qbal::load_scenario(path);
      std::printf("%-28s %-15s %s\n", s.name.c_str(), qbal::model_kind(s.model).c_str(), s.description.c_str());
    } catch (const qbal::Error& e) {
      std::printf("%-28s invalid: %s\n", path.c_str(), e.what());
    }
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulate queueing scenarios and check their distributional balance relations"};
  app.require_subcommand(1);

  std::string scenario;
  Overrides run_o, verify_o, replay_o;

  auto* run = app.add_subcommand("run", "Simulate a scenario and export PGF estimates");
  add_run_flags(run, scenario, run_o);

  auto* verify = app.add_subcommand("verify", "Simulate a scenario and check every applicable relation");
  add_run_flags(verify, scenario, verify_o);

  std::string log_path, replay_scenario;
  std::optional<double> end_time;
  auto* replay = app.add_subcommand("replay", "Re-verify a stored jump log");
  replay->add_option("jump_log", log_path, "Jump-log file")->required()->check(CLI::ExistingFile);
  replay->add_option("--scenario", replay_scenario, "Scenario supplying model parameters")->check(CLI::ExistingFile);
  replay->add_option("--end-time", end_time, "Observation end (default: last jump)");
  replay->add_option("--out", replay_o.out, "Report file");
  replay->add_option("--plot-dir", replay_o.plot_dir, "Directory for per-check CSV files");
  replay->add_flag("--quiet", replay_o.quiet, "Only print failures");

  std::string dir = QBAL_SCENARIO_DIR;
  auto* list = app.add_subcommand("list-scenarios", "List scenario files");
  list->add_option("dir", dir, "Scenario directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(scenario, run_o);
    if (verify->parsed()) return cmd_verify(scenario, verify_o);
    if (replay->parsed()) return cmd_replay(log_path, replay_scenario, end_time, replay_o);
    if (list->parsed()) return cmd_list(dir);
  } catch (const qbal::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const qbal::SimultaneityViolation& e) {
    std::cerr << "simultaneity violation at t = " << e.time() << ": " << e.what() << '\n';
    return kSimulation;
  } catch (const qbal::IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kIo;
  } catch (const qbal::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kSimulation;
  }
  return kOk;
}
