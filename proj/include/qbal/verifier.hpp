#pragma once

#include <cstdint>
#include <limits>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "qbal/analytic.hpp"
#include "qbal/estimators.hpp"
#include "qbal/jump_log.hpp"
#include "qbal/kernel.hpp"
#include "qbal/models.hpp"
#include "qbal/test_functions.hpp"

namespace qbal {

inline constexpr const char* kReportSchema = "qbalance.report/1";
/// Absolute floor added to every statistical tolerance so that identities
/// whose both sides are exactly zero (z = all-ones, f constant) pass.
inline constexpr double kSigmaFloor = 1e-10;
inline constexpr double kDefaultSigmaMultiple = 4.0;
inline constexpr double kPathwiseTolerance = 1e-9;

enum class ToleranceKind { Exact, Statistical };

struct ToleranceRule {
  ToleranceKind kind = ToleranceKind::Statistical;
  double value = kDefaultSigmaMultiple;  // atol for exact rules, k for statistical rules

  static ToleranceRule exact(double atol) { return {ToleranceKind::Exact, atol}; }
  static ToleranceRule statistical(double k = kDefaultSigmaMultiple) { return {ToleranceKind::Statistical, k}; }
  double tolerance(double sigma) const;
};

enum class Verdict { Pass, Fail, Inapplicable };

const char* to_string(Verdict v);

struct CheckPoint {
  std::vector<double> z;  // empty for test-function or scalar points
  std::string label;
  double lhs = 0.0;
  double rhs = 0.0;
  double residual = 0.0;
  double sigma = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

struct IdentityCheck {
  std::string name;
  ToleranceRule rule;
  Verdict verdict = Verdict::Inapplicable;
  std::string note;
  std::vector<CheckPoint> points;

  IdentityCheck() = default;
  IdentityCheck(std::string n, ToleranceRule r) : name(std::move(n)), rule(r) {}

  static IdentityCheck inapplicable(std::string name, ToleranceRule rule, std::string why);

  /// Adds a point; residual = lhs − rhs and the tolerance follow the rule.
  void add(std::vector<double> z, std::string label, double lhs, double rhs, double sigma = 0.0);
  /// Pass iff there is at least one point and every point passes.
  IdentityCheck& finalize();
  /// Largest |residual| / tolerance over the points.
  double worst_ratio() const;
};

/// Families of checks a scenario can request.
const std::vector<std::string>& check_families();

struct VerifyInput {
  const ModelSpec* spec = nullptr;  // null when only a jump log is available
  const EmbeddedEstimates* estimates = nullptr;
  std::span<const RunResult> runs;
  Grid grid;
  double warmup_fraction = 0.1;
  double k = kDefaultSigmaMultiple;
  std::set<std::string> families;  // empty: every family
};

/// Runs every requested check family; inapplicable checks carry a reason.
std::vector<IdentityCheck> verify(const VerifyInput& input);

// Individual checks. Each returns finalized verdicts.

IdentityCheck check_conservation(std::span<const RunResult> runs);
IdentityCheck check_exclusivity(const CountingLedger& ledger);
IdentityCheck check_subset_partition(std::span<const RunResult> runs);
IdentityCheck check_route_partition(std::span<const RunResult> runs);

/// Finite-time relation between transient functionals on every path; exact.
IdentityCheck check_pathwise_telescoping(std::span<const RunResult> runs,
                                         const std::vector<TestFunction>& functions);

/// Stationary relation between arrival and departure Palm expectations, one
/// point per test function. Throws InapplicableAssumption when the sample
/// path contains epochs with both arrivals and departures.
IdentityCheck check_stationary_relation(const EmbeddedEstimates& est, const std::vector<TestFunction>& functions,
                                        double k = kDefaultSigmaMultiple);

/// Same relation decomposed over departure subsets.
IdentityCheck check_subset_relation(const EmbeddedEstimates& est, const std::vector<TestFunction>& functions,
                                    double k = kDefaultSigmaMultiple);

/// Subset form equals the per-queue form when every departure is a singleton.
IdentityCheck check_singleton_reduction(const EmbeddedEstimates& est, const std::vector<TestFunction>& functions);

/// PGF relations for single departures with joint, per-class, and Markovian routing terms.
IdentityCheck check_relation3(const EmbeddedEstimates& est, const Grid& grid, double k = kDefaultSigmaMultiple);
IdentityCheck check_relation4(const EmbeddedEstimates& est, const Grid& grid, double k = kDefaultSigmaMultiple);
IdentityCheck check_relation5(const EmbeddedEstimates& est, const std::vector<std::vector<double>>& routing,
                              const Grid& grid, double k = kDefaultSigmaMultiple);

/// Arrival-epoch PGF against the time-average PGF (overall and per class).
std::vector<IdentityCheck> check_pasta(const EmbeddedEstimates& est, const Grid& grid,
                                       double k = kDefaultSigmaMultiple);

/// Single-queue arrival-epoch and post-departure PGFs agree; with an
/// exponential server also against (1 − ρ)/(1 − ρz).
std::vector<IdentityCheck> check_burke(const EmbeddedEstimates& est, const Grid& grid, const TransformContext* mm1,
                                       double k = kDefaultSigmaMultiple);

/// Σλ_i(1 − z_i) L(z) = Σλ_i(1 − z_i) S^c_i(z) for independent Poisson inputs.
IdentityCheck check_single_arrival_balance(const std::string& name, const EmbeddedEstimates& est,
                                           const TransformContext& ctx, const Grid& grid,
                                           double k = kDefaultSigmaMultiple);

/// (1 − E z^G) L(z) = Σ (1 − z_i^{K_i}) / K_i · E G_i · S^c_i(z). With all K_i = 1 this
/// is the batch-arrival relation.
IdentityCheck check_batch_relation(const std::string& name, const EmbeddedEstimates& est,
                                   const TransformContext& ctx, const Grid& grid, double k = kDefaultSigmaMultiple);

/// K_i times the departure-epoch rate against the customer arrival rate, per class; exact within 1%.
IdentityCheck check_rate_identity(const CountingLedger& ledger, double t, const TransformContext& ctx);

/// Departure-epoch PGFs of the non-preemptive priority queue expressed through
/// consecutive departures, one check per class.
std::vector<IdentityCheck> check_priority_chain(const EmbeddedEstimates& est, const TransformContext& ctx,
                                                const Grid& grid, double k = kDefaultSigmaMultiple);

/// Region decomposition of the longer-queue model and its symmetry property.
std::vector<IdentityCheck> check_longer_queue_decomposition(const EmbeddedEstimates& est,
                                                            const LongerQueueConfig& cfg,
                                                            const TransformContext& ctx, const Grid& grid,
                                                            double k = kDefaultSigmaMultiple);

/// Visit, service and switchover relations of a polling system plus the
/// assembled queue-length formula. Roving networks use the routed visit balance.
std::vector<IdentityCheck> check_polling_chain(const EmbeddedEstimates& est, const TransformContext& ctx,
                                               const Grid& grid, double k = kDefaultSigmaMultiple);

/// Σλ_i(1 − z_i) L(z) = Σ Λ_i (P_i(z) − z_i) S^c_i(z) with Markovian routing.
IdentityCheck check_routed_balance(const std::string& name, const EmbeddedEstimates& est,
                                   const TransformContext& ctx, const Grid& grid, double k = kDefaultSigmaMultiple);

/// Routed balance of a roving-server network plus the traffic solution.
std::vector<IdentityCheck> check_roving(const EmbeddedEstimates& est, const TransformContext& ctx, const Grid& grid,
                                        double k = kDefaultSigmaMultiple);

/// Running Palm averages over the first n and 2n post-warm-up epochs.
IdentityCheck check_cesaro(std::span<const RunResult> runs, double warmup_fraction,
                           const std::vector<TestFunction>& functions, double k = kDefaultSigmaMultiple);

/// Rebuilds a replication record from a jump trace. Jumps sharing an instant
/// with a jump of the other kind count as exclusivity violations. The run ends
/// at `end_time`, or at the last jump when it is not finite.
RunResult replay_trace(const JumpTrace& trace, double end_time = std::numeric_limits<double>::quiet_NaN());

struct BalanceReport {
  std::string scenario;
  std::uint64_t seed = 0;
  double horizon = 0.0;
  std::vector<IdentityCheck> checks;
  nlohmann::json metadata = nlohmann::json::object();

  std::size_t count(Verdict v) const;
  /// True iff no applicable check failed.
  bool all_pass() const { return count(Verdict::Fail) == 0; }
};

nlohmann::json to_json(const BalanceReport& report);
BalanceReport report_from_json(const nlohmann::json& doc);
/// Human-readable one-line-per-check summary.
std::string summary_text(const BalanceReport& report);

}  // namespace qbal
