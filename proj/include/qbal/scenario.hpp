#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "qbal/estimators.hpp"
#include "qbal/kernel.hpp"
#include "qbal/models.hpp"
#include "qbal/verifier.hpp"

namespace qbal {

inline constexpr const char* kScenarioSchema = "qbalance.scenario/1";

struct RunControls {
  double horizon = 1e5;
  std::uint64_t max_events = 0;  // 0: no event cap
  std::size_t replications = 4;
  std::uint64_t seed = 1;
  double warmup_fraction = 0.1;
  std::size_t batches = 32;  // per replication
  TiePolicy tie_policy = TiePolicy::Jitter;
  double k = kDefaultSigmaMultiple;
};

struct OutputPaths {
  std::string report;
  std::string plot_dir;
  std::string jump_log;
};

/// A validated scenario file.
struct Scenario {
  std::string name;
  std::string description;
  ModelSpec model;
  RunControls run;
  std::optional<std::set<std::string>> checks;  // absent: every family
  std::optional<Grid> grid;                     // absent: default grid
  OutputPaths output;

  std::size_t dimension() const { return model_dimension(model); }
  Grid evaluation_grid() const { return grid ? *grid : default_grid(dimension()); }
};

/// Parses and validates a scenario document. Unknown keys and malformed
/// values throw ConfigError naming the key path (e.g. "model.service[1].rate").
Scenario parse_scenario(const nlohmann::json& doc);
Scenario load_scenario(const std::string& path);

/// Distribution from {"kind": ..., parameters}; `path` prefixes error keys.
ServiceDistribution parse_distribution(const nlohmann::json& doc, const std::string& path = "distribution");

struct RunnerOptions {
  std::size_t threads = 1;
};

/// Runs the replications of a scenario. Replication r draws from
/// RngStream(seed).split(r), so results do not depend on the thread count.
std::vector<RunResult> simulate(const Scenario& scenario, const RunnerOptions& options = {});

EstimationOptions estimation_options(const Scenario& scenario);

/// Report of a scenario from its replications.
BalanceReport verify_runs(const Scenario& scenario, std::span<const RunResult> runs);

/// simulate + verify_runs.
BalanceReport run_scenario(const Scenario& scenario, const RunnerOptions& options = {});

/// Writes one CSV per check with points (z coordinates or label, lhs, rhs,
/// residual, sigma, tolerance, pass). Returns the files written.
std::vector<std::string> emit_plotdata(const BalanceReport& report, const std::string& dir);

/// Byte-stable serialization used for report files.
std::string dump_report(const BalanceReport& report);

/// Scenario files (*.json) in a directory, sorted by file name.
std::vector<std::string> list_scenario_files(const std::string& dir);

}  // namespace qbal
