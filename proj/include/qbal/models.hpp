#pragma once

#include <deque>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "qbal/distributions.hpp"
#include "qbal/kernel.hpp"
#include "qbal/rng.hpp"

namespace qbal {

enum class QueueOrder { FCFS, LCFS };

const char* to_string(QueueOrder order);

/// External arrival stream of one queue: none, Poisson, or a renewal process.
class ArrivalProcess {
 public:
  static ArrivalProcess none() { return ArrivalProcess(); }
  static ArrivalProcess poisson(double rate);
  static ArrivalProcess renewal(ServiceDistribution interarrival);

  bool active() const noexcept { return interarrival_.has_value(); }
  bool is_poisson() const noexcept { return poisson_; }
  double rate() const noexcept { return active() ? 1.0 / interarrival_->mean() : 0.0; }
  const ServiceDistribution& interarrival() const { return *interarrival_; }

 private:
  std::optional<ServiceDistribution> interarrival_;
  bool poisson_ = false;
};

/// Routing of a customer that completes service. Markovian routers expose
/// their matrix; state-dependent rules see the post-departure state X^d.
class Router {
 public:
  virtual ~Router() = default;
  /// Target queue, or nullopt when the customer leaves the network.
  virtual std::optional<std::size_t> route(std::size_t from, const CountVector& x_d,
                                           RngStream& stream) const = 0;
  virtual bool markovian() const noexcept { return false; }
  virtual std::string describe() const = 0;
};

/// p_ik routing with exit probability p_i0 = 1 - sum_k p_ik.
class MarkovRouter final : public Router {
 public:
  explicit MarkovRouter(std::vector<std::vector<double>> p);

  std::optional<std::size_t> route(std::size_t from, const CountVector& x_d,
                                   RngStream& stream) const override;
  bool markovian() const noexcept override { return true; }
  std::string describe() const override { return "markov"; }

  const std::vector<std::vector<double>>& matrix() const noexcept { return p_; }
  double exit_probability(std::size_t i) const;

 private:
  std::vector<std::vector<double>> p_;
};

/// Sends a customer leaving queue i to the shortest queue among targets[i]
/// (ties to the lowest index); empty targets[i] means the customer exits.
class ShorterQueueRouter final : public Router {
 public:
  explicit ShorterQueueRouter(std::vector<std::vector<std::size_t>> targets);

  std::optional<std::size_t> route(std::size_t from, const CountVector& x_d,
                                   RngStream& stream) const override;
  std::string describe() const override { return "shorter-queue"; }
  const std::vector<std::vector<std::size_t>>& targets() const noexcept { return targets_; }

 private:
  std::vector<std::vector<std::size_t>> targets_;
};

/// Arbitrary user-registered rule of (departing queue, X^d).
class StateDependentRouter final : public Router {
 public:
  using Rule = std::function<std::optional<std::size_t>(std::size_t, const CountVector&, RngStream&)>;
  StateDependentRouter(Rule rule, std::string name);

  std::optional<std::size_t> route(std::size_t from, const CountVector& x_d,
                                   RngStream& stream) const override;
  std::string describe() const override { return name_; }

 private:
  Rule rule_;
  std::string name_;
};

/// ΔN^r for a departure from queue i: e_k, or the zero vector on exit.
CountVector route_departure(const Router& router, std::size_t i, const CountVector& x_d,
                            RngStream& stream);

struct PollingDiscipline {
  enum class Kind { Exhaustive, Gated, KLimited };
  Kind kind = Kind::Exhaustive;
  Count limit = 1;  // k for k-limited

  static PollingDiscipline exhaustive() { return {Kind::Exhaustive, 0}; }
  static PollingDiscipline gated() { return {Kind::Gated, 0}; }
  static PollingDiscipline k_limited(Count k);
  std::string describe() const;
};

struct PollingConfig {
  std::vector<double> arrival_rates;                // λ_i, Poisson
  std::vector<ServiceDistribution> service;         // B_i
  std::vector<ServiceDistribution> switchover;      // S_i, from Q_i to Q_{i+1}
  std::vector<PollingDiscipline> discipline;        // per queue
  QueueOrder order = QueueOrder::FCFS;

  std::size_t size() const noexcept { return arrival_rates.size(); }
  double rho() const;
  double total_switchover() const;
  /// E C = s / (1 - ρ).
  double mean_cycle() const;
  /// γ_i = 1 / (λ_i E C).
  double gamma(std::size_t i) const;
  void validate() const;
};

/// Polling system with Markovian customer routing (single roving server).
struct RovingNetworkConfig {
  PollingConfig polling;                     // arrival_rates are external λ_i
  std::vector<std::vector<double>> routing;  // p_ik

  std::size_t size() const noexcept { return polling.size(); }
  double exit_probability(std::size_t i) const;
  /// P_i(z) = p_i0 + Σ_k p_ik z_k.
  double routing_pgf(std::size_t i, std::span<const double> z) const;
  /// Λ solving Λ_i = λ_i + Σ_k Λ_k p_ki.
  std::vector<double> throughputs() const;
  /// ρ = Σ Λ_i b_i.
  double rho() const;
  double mean_cycle() const;
  /// 1 / (Λ_i E C).
  double gamma(std::size_t i) const;
  void validate() const;
};

/// Non-preemptive priority M/G/1; class 0 has the highest priority.
struct PriorityConfig {
  std::vector<double> arrival_rates;
  std::vector<ServiceDistribution> service;

  std::size_t size() const noexcept { return arrival_rates.size(); }
  double rho() const;
  void validate() const;
};

/// Two queues; the server takes the strictly longer queue, ties by α.
struct LongerQueueConfig {
  std::vector<double> arrival_rates;  // 2 entries
  std::vector<ServiceDistribution> service;
  std::vector<double> alpha;  // tie probabilities, sum to 1

  double rho() const;
  void validate() const;
};

/// Multiclass single-station queue with batch Poisson arrivals and fixed
/// batch-service sizes K_i. Waiting customers are served in order of arrival
/// across classes; a class-i service starts once K_i of them wait.
struct BatchStationConfig {
  double batch_rate = 0.0;
  BatchLaw batch{{{CountVector{1}, 1.0}}};
  std::vector<ServiceDistribution> service;  // per class, per batch
  std::vector<Count> batch_service;          // K_i >= 1
  int servers = 1;

  std::size_t size() const noexcept { return batch.dimension(); }
  double rho() const;
  void validate() const;
};

/// Open network of single-queue stations with c_i servers each.
struct NetworkConfig {
  std::vector<ArrivalProcess> arrivals;
  std::vector<ServiceDistribution> service;
  std::vector<int> servers;
  QueueOrder order = QueueOrder::FCFS;
  std::shared_ptr<const Router> router;  // nullptr: every customer exits
  bool allow_unstable = false;

  std::size_t size() const noexcept { return arrivals.size(); }
  /// Markov matrix when the router is Markovian; empty otherwise.
  std::vector<std::vector<double>> markov_matrix() const;
  void validate() const;
};

using ModelSpec = std::variant<NetworkConfig, PollingConfig, RovingNetworkConfig, PriorityConfig,
                               LongerQueueConfig, BatchStationConfig>;

std::string model_kind(const ModelSpec& spec);
std::size_t model_dimension(const ModelSpec& spec);
void validate(const ModelSpec& spec);

/// Builds a fresh model instance drawing from `stream` (one per replication).
std::unique_ptr<Model> make_model(const ModelSpec& spec, const RngStream& stream);

/// Λ solving Λ_i = λ_i + Σ_k Λ_k p_ki for a roving-server network.
std::vector<double> solve_traffic(const RovingNetworkConfig& cfg);

/// Snapshot of the polling server used to decide its next action.
struct PollingServerView {
  Count queue_length = 0;       // customers at the visited queue (none in service)
  Count served_this_visit = 0;
  Count gate_remaining = 0;     // gated: customers admitted at the gate not yet served
};

enum class ServerAction { StartService, CompleteVisit };

ServerAction step_polling_server(const PollingServerView& view, const PollingDiscipline& discipline);

/// Phase labels used by the polling model's time-average record.
inline int serving_phase(std::size_t queue) { return static_cast<int>(queue); }
inline int switching_phase(std::size_t queue, std::size_t m) { return static_cast<int>(m + queue); }

}  // namespace qbal
