#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include "qbal/jump_log.hpp"
#include "qbal/samples.hpp"
#include "qbal/state.hpp"

namespace qbal {

/// Event kinds in tie-break order: at equal times completions are processed
/// first, then external arrivals, then switchover ends. Routed (internal)
/// arrivals never appear as events: they are part of the completion's epoch.
enum class EventKind : std::uint8_t {
  ServiceCompletion = 0,
  ExternalArrival = 2,
  SwitchoverEnd = 3,
};

struct Event {
  double time = 0.0;
  EventKind kind = EventKind::ExternalArrival;
  std::uint32_t target = 0;    // queue or station index
  std::uint64_t token = 0;     // model payload (e.g. server slot)
  std::uint64_t sequence = 0;  // insertion order, assigned by the event set
};

/// Min-heap on (time, kind, sequence).
class FutureEventSet {
 public:
  void push(Event ev);
  const Event& top() const { return heap_.top(); }
  Event pop();
  bool empty() const noexcept { return heap_.empty(); }
  std::size_t size() const noexcept { return heap_.size(); }

 private:
  struct Later {
    bool operator()(const Event& a, const Event& b) const noexcept;
  };
  std::priority_queue<Event, std::vector<Event>, Later> heap_;
  std::uint64_t next_sequence_ = 0;
};

enum class TiePolicy { Reject, Jitter };

const char* to_string(TiePolicy p);
TiePolicy parse_tie_policy(const std::string& s);

inline constexpr double kJitterEpsilon = 1e-9;

/// Stop rule: whichever of the time horizon or event budget is reached first.
struct Clock {
  double horizon = std::numeric_limits<double>::infinity();
  std::uint64_t max_events = 0;  // 0 means unlimited

  bool finite() const noexcept { return std::isfinite(horizon) || max_events > 0; }
};

struct RunOptions {
  Clock stop;
  TiePolicy tie_policy = TiePolicy::Reject;
  std::size_t jump_log_capacity = JumpLog::kDefaultCapacity;
  bool full_trace = false;
  /// When set, every jump record is also streamed to this file.
  std::optional<std::string> jump_log_path;
};

class Simulation;

/// A model plugs into the kernel by scheduling events and reacting to them.
class Model {
 public:
  virtual ~Model() = default;
  virtual std::size_t queues() const = 0;
  virtual std::vector<std::size_t> station_of() const;
  virtual int initial_phase() const { return 0; }
  virtual void start(Simulation& sim) = 0;
  virtual void handle(const Event& ev, Simulation& sim) = 0;
};

/// Everything a replication produces.
struct RunResult {
  CountingLedger ledger;
  EmbeddedSampleLog samples;
  TimeAverageAccumulator time_average;
  JumpLog jump_log;
  StateVector x0;
  StateVector x_end;
  double end_time = 0.0;
  std::uint64_t events = 0;
  std::uint64_t jitters = 0;
  Count max_total_queue = 0;
};

/// The kernel-side view handed to models.
class Simulation {
 public:
  Simulation(Model& model, const RunOptions& options);

  double now() const noexcept { return now_; }
  std::size_t queues() const noexcept { return x_.size(); }
  const CountVector& state() const noexcept { return x_; }
  Count state(std::size_t i) const { return x_[i]; }
  int phase() const noexcept { return phase_; }

  void schedule(double time, EventKind kind, std::uint32_t target, std::uint64_t token = 0);

  /// External arrival epoch with batch vector ΔN^e.
  void external_arrival(const CountVector& batch);
  /// Departure epoch: ΔN^d leaves, ΔN^r is routed within the same epoch.
  void departure(const CountVector& delta_d, const CountVector& delta_r);
  /// Record the current state under a polling epoch tag.
  void tag(EpochTag tag, std::size_t queue);
  /// Server phase label for time-average decomposition.
  void set_phase(int phase);

  RunResult run();

 private:
  void jump(const JumpMark& mark);

  Model& model_;
  RunOptions options_;
  FutureEventSet events_;
  double now_ = 0.0;
  CountVector x_;
  CountVector x_d_;
  int phase_ = 0;
  double last_arrival_time_ = -1.0;
  double last_departure_time_ = -1.0;
  JumpMark scratch_;
  RunResult result_;
  std::unique_ptr<JumpLogWriter> writer_;
  bool started_ = false;
};

/// Convenience wrapper: construct a Simulation and run it.
RunResult run(Model& model, const RunOptions& options);

struct RateEstimates {
  double lambda_e = 0.0;
  double lambda_d = 0.0;
  std::vector<double> lambda_e_k;  // per queue
  std::vector<double> lambda_d_i;  // per queue
  std::map<SubsetMask, double> lambda_d_A;
};

/// Simple-count rates at time t: each estimate is the count divided by t.
RateEstimates rate_estimates(const CountingLedger& ledger, double t);

}  // namespace qbal
