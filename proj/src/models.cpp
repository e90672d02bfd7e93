#include "qbal/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "qbal/analytic.hpp"
#include "qbal/errors.hpp"

namespace qbal {

namespace {

// Stream lineage used by every model: root.split(purpose).split(queue).
enum StreamPurpose : std::uint32_t {
  kArrivalStream = 0,
  kServiceStream = 1,
  kSwitchoverStream = 2,
  kRoutingStream = 3,
  kTieStream = 4,
};

void require(bool ok, const std::string& what) {
  if (!ok) throw InvalidParameter(what);
}

void check_rows(const std::vector<std::vector<double>>& p, std::size_t m) {
  require(p.size() == m, "routing matrix must have one row per queue");
  for (std::size_t i = 0; i < m; ++i) {
    require(p[i].size() == m, "routing matrix must be square");
    double row = 0.0;
    for (double v : p[i]) {
      require(v >= 0.0 && std::isfinite(v), "routing probabilities must be nonnegative");
      row += v;
    }
    require(row <= 1.0 + 1e-12, "routing row " + std::to_string(i) + " sums to more than 1");
  }
}

CountVector unit_vector(std::size_t m, std::size_t k, Count n = 1) {
  CountVector v(m, 0);
  v[k] = n;
  return v;
}

/// Keeps a renewal arrival stream on its own nominal clock so that jitter
/// applied by the kernel does not shift later arrivals.
class ArrivalClock {
 public:
  ArrivalClock(ArrivalProcess process, RngStream stream)
      : process_(std::move(process)), stream_(std::move(stream)) {}

  bool active() const { return process_.active(); }

  void schedule_next(Simulation& sim, std::uint32_t target) {
    if (!process_.active()) return;
    next_ += process_.interarrival().sample(stream_);
    sim.schedule(std::max(next_, sim.now()), EventKind::ExternalArrival, target);
  }

 private:
  ArrivalProcess process_;
  RngStream stream_;
  double next_ = 0.0;
};

/// A waiting customer: arrival time and pre-sampled service requirement.
struct Customer {
  double arrival;
  double work;
};

/// Takes the next customer from a waiting line per the queue order.
Customer take(std::deque<Customer>& line, QueueOrder order) {
  Customer c;
  if (order == QueueOrder::FCFS) {
    c = line.front();
    line.pop_front();
  } else {
    c = line.back();
    line.pop_back();
  }
  return c;
}

// ---------------------------------------------------------------- polling

class PollingModel final : public Model {
 public:
  PollingModel(const PollingConfig& cfg, std::shared_ptr<const Router> router, const RngStream& root)
      : cfg_(cfg), router_(std::move(router)), m_(cfg.size()) {
    for (std::size_t i = 0; i < m_; ++i) {
      const auto q = static_cast<std::uint32_t>(i);
      arrivals_.emplace_back(cfg.arrival_rates[i] > 0.0 ? ArrivalProcess::poisson(cfg.arrival_rates[i])
                                                         : ArrivalProcess::none(),
                             root.split(kArrivalStream).split(q));
      service_streams_.push_back(root.split(kServiceStream).split(q));
      switch_streams_.push_back(root.split(kSwitchoverStream).split(q));
      routing_streams_.push_back(root.split(kRoutingStream).split(q));
    }
    waiting_.resize(m_);
  }

  std::size_t queues() const override { return m_; }
  int initial_phase() const override { return serving_phase(0); }

  void start(Simulation& sim) override {
    for (std::size_t i = 0; i < m_; ++i) arrivals_[i].schedule_next(sim, static_cast<std::uint32_t>(i));
    begin_visit(sim, 0);
  }

  void handle(const Event& ev, Simulation& sim) override {
    const std::size_t q = ev.target;
    switch (ev.kind) {
      case EventKind::ExternalArrival:
        enqueue(sim, q);
        sim.external_arrival(unit_vector(m_, q));
        arrivals_[q].schedule_next(sim, ev.target);
        break;
      case EventKind::ServiceCompletion: {
        in_service_ = false;
        CountVector x_d = sim.state();
        --x_d[q];
        CountVector dr(m_, 0);
        if (router_) dr = route_departure(*router_, q, x_d, routing_streams_[q]);
        sim.departure(unit_vector(m_, q), dr);
        for (std::size_t k = 0; k < m_; ++k) {
          if (dr[k] > 0) enqueue(sim, k);
        }
        ++served_;
        decide(sim);
        break;
      }
      case EventKind::SwitchoverEnd:
        begin_visit(sim, (q + 1) % m_);
        break;
    }
  }

 private:
  void enqueue(Simulation& sim, std::size_t k) {
    waiting_[k].push_back(Customer{sim.now(), cfg_.service[k].sample(service_streams_[k])});
  }

  void begin_visit(Simulation& sim, std::size_t i) {
    position_ = i;
    served_ = 0;
    gate_ = static_cast<Count>(waiting_[i].size());
    sim.set_phase(serving_phase(i));
    sim.tag(EpochTag::VisitBegin, i);
    decide(sim);
  }

  void decide(Simulation& sim) {
    const std::size_t i = position_;
    const PollingServerView view{static_cast<Count>(waiting_[i].size()), served_, gate_};
    if (step_polling_server(view, cfg_.discipline[i]) == ServerAction::StartService) {
      Customer c;
      if (cfg_.discipline[i].kind == PollingDiscipline::Kind::Gated) {
        // Gated customers are the oldest gate_ entries of the line.
        auto& line = waiting_[i];
        const std::size_t idx = cfg_.order == QueueOrder::FCFS ? 0 : static_cast<std::size_t>(gate_ - 1);
        c = line[idx];
        line.erase(line.begin() + static_cast<std::ptrdiff_t>(idx));
        --gate_;
      } else {
        c = take(waiting_[i], cfg_.order);
      }
      in_service_ = true;
      sim.tag(EpochTag::ServiceBegin, i);
      sim.schedule(sim.now() + c.work, EventKind::ServiceCompletion, static_cast<std::uint32_t>(i));
    } else {
      sim.tag(EpochTag::VisitComplete, i);
      sim.set_phase(switching_phase(i, m_));
      const double s = cfg_.switchover[i].sample(switch_streams_[i]);
      sim.schedule(sim.now() + s, EventKind::SwitchoverEnd, static_cast<std::uint32_t>(i));
    }
  }

  const PollingConfig cfg_;
  std::shared_ptr<const Router> router_;
  std::size_t m_;
  std::vector<ArrivalClock> arrivals_;
  std::vector<RngStream> service_streams_;
  std::vector<RngStream> switch_streams_;
  std::vector<RngStream> routing_streams_;
  std::vector<std::deque<Customer>> waiting_;
  std::size_t position_ = 0;
  Count served_ = 0;
  Count gate_ = 0;
  bool in_service_ = false;
};

// --------------------------------------------------------------- priority

class PriorityModel final : public Model {
 public:
  PriorityModel(const PriorityConfig& cfg, const RngStream& root) : cfg_(cfg), m_(cfg.size()) {
    for (std::size_t i = 0; i < m_; ++i) {
      const auto q = static_cast<std::uint32_t>(i);
      arrivals_.emplace_back(ArrivalProcess::poisson(cfg.arrival_rates[i]), root.split(kArrivalStream).split(q));
      service_streams_.push_back(root.split(kServiceStream).split(q));
    }
    waiting_.resize(m_);
  }

  std::size_t queues() const override { return m_; }
  int initial_phase() const override { return static_cast<int>(m_); }

  void start(Simulation& sim) override {
    for (std::size_t i = 0; i < m_; ++i) arrivals_[i].schedule_next(sim, static_cast<std::uint32_t>(i));
  }

  void handle(const Event& ev, Simulation& sim) override {
    const std::size_t q = ev.target;
    if (ev.kind == EventKind::ExternalArrival) {
      waiting_[q].push_back(Customer{sim.now(), cfg_.service[q].sample(service_streams_[q])});
      sim.external_arrival(unit_vector(m_, q));
      arrivals_[q].schedule_next(sim, ev.target);
      if (!busy_) start_next(sim);
    } else {
      busy_ = false;
      sim.departure(unit_vector(m_, q), CountVector(m_, 0));
      start_next(sim);
    }
  }

 private:
  void start_next(Simulation& sim) {
    for (std::size_t i = 0; i < m_; ++i) {
      if (waiting_[i].empty()) continue;
      const Customer c = take(waiting_[i], QueueOrder::FCFS);
      busy_ = true;
      sim.set_phase(static_cast<int>(i));
      sim.tag(EpochTag::ServiceBegin, i);
      sim.schedule(sim.now() + c.work, EventKind::ServiceCompletion, static_cast<std::uint32_t>(i));
      return;
    }
    sim.set_phase(static_cast<int>(m_));
  }

  const PriorityConfig cfg_;
  std::size_t m_;
  std::vector<ArrivalClock> arrivals_;
  std::vector<RngStream> service_streams_;
  std::vector<std::deque<Customer>> waiting_;
  bool busy_ = false;
};

// ----------------------------------------------------------- longer queue

class LongerQueueModel final : public Model {
 public:
  LongerQueueModel(const LongerQueueConfig& cfg, const RngStream& root)
      : cfg_(cfg), tie_stream_(root.split(kTieStream)) {
    for (std::uint32_t q = 0; q < 2; ++q) {
      arrivals_.emplace_back(ArrivalProcess::poisson(cfg.arrival_rates[q]), root.split(kArrivalStream).split(q));
      service_streams_.push_back(root.split(kServiceStream).split(q));
    }
    waiting_.resize(2);
  }

  std::size_t queues() const override { return 2; }
  int initial_phase() const override { return 2; }

  void start(Simulation& sim) override {
    for (std::uint32_t q = 0; q < 2; ++q) arrivals_[q].schedule_next(sim, q);
  }

  void handle(const Event& ev, Simulation& sim) override {
    const std::size_t q = ev.target;
    if (ev.kind == EventKind::ExternalArrival) {
      waiting_[q].push_back(Customer{sim.now(), cfg_.service[q].sample(service_streams_[q])});
      sim.external_arrival(unit_vector(2, q));
      arrivals_[q].schedule_next(sim, ev.target);
      if (!busy_) start_next(sim);
    } else {
      busy_ = false;
      sim.departure(unit_vector(2, q), CountVector(2, 0));
      start_next(sim);
    }
  }

 private:
  void start_next(Simulation& sim) {
    const std::size_t w0 = waiting_[0].size();
    const std::size_t w1 = waiting_[1].size();
    if (w0 == 0 && w1 == 0) {
      sim.set_phase(2);
      return;
    }
    std::size_t pick;
    if (w0 != w1) {
      pick = w0 > w1 ? 0 : 1;
    } else {
      pick = tie_stream_.uniform() < cfg_.alpha[0] ? 0 : 1;
    }
    const Customer c = take(waiting_[pick], QueueOrder::FCFS);
    busy_ = true;
    sim.set_phase(static_cast<int>(pick));
    sim.tag(EpochTag::ServiceBegin, pick);
    sim.schedule(sim.now() + c.work, EventKind::ServiceCompletion, static_cast<std::uint32_t>(pick));
  }

  const LongerQueueConfig cfg_;
  std::vector<ArrivalClock> arrivals_;
  std::vector<RngStream> service_streams_;
  RngStream tie_stream_;
  std::vector<std::deque<Customer>> waiting_;
  bool busy_ = false;
};

// ---------------------------------------------------------- batch station

class BatchStationModel final : public Model {
 public:
  BatchStationModel(const BatchStationConfig& cfg, const RngStream& root)
      : cfg_(cfg),
        m_(cfg.size()),
        arrivals_(ArrivalProcess::poisson(cfg.batch_rate), root.split(kArrivalStream).split(0)),
        batch_stream_(root.split(kArrivalStream).split(1)) {
    for (std::size_t i = 0; i < m_; ++i) {
      service_streams_.push_back(root.split(kServiceStream).split(static_cast<std::uint32_t>(i)));
    }
    waiting_.resize(m_);
  }

  std::size_t queues() const override { return m_; }

  void start(Simulation& sim) override { arrivals_.schedule_next(sim, 0); }

  void handle(const Event& ev, Simulation& sim) override {
    if (ev.kind == EventKind::ExternalArrival) {
      const CountVector g = cfg_.batch.sample(batch_stream_);
      for (std::size_t i = 0; i < m_; ++i) {
        for (Count n = 0; n < g[i]; ++n) waiting_[i].push_back(sim.now());
      }
      sim.external_arrival(g);
      arrivals_.schedule_next(sim, 0);
    } else {
      const std::size_t i = ev.target;
      --busy_;
      sim.departure(unit_vector(m_, i, cfg_.batch_service[i]), CountVector(m_, 0));
    }
    try_start(sim);
    sim.set_phase(busy_);
  }

 private:
  void try_start(Simulation& sim) {
    while (busy_ < cfg_.servers) {
      std::size_t pick = m_;
      for (std::size_t i = 0; i < m_; ++i) {
        if (static_cast<Count>(waiting_[i].size()) < cfg_.batch_service[i]) continue;
        if (pick == m_ || waiting_[i].front() < waiting_[pick].front()) pick = i;
      }
      if (pick == m_) return;
      for (Count n = 0; n < cfg_.batch_service[pick]; ++n) waiting_[pick].pop_front();
      ++busy_;
      sim.tag(EpochTag::ServiceBegin, pick);
      const double work = cfg_.service[pick].sample(service_streams_[pick]);
      sim.schedule(sim.now() + work, EventKind::ServiceCompletion, static_cast<std::uint32_t>(pick));
    }
  }

  const BatchStationConfig cfg_;
  std::size_t m_;
  ArrivalClock arrivals_;
  RngStream batch_stream_;
  std::vector<RngStream> service_streams_;
  std::vector<std::deque<double>> waiting_;  // arrival times of waiting customers
  int busy_ = 0;
};

// ---------------------------------------------------------------- network

class NetworkModel final : public Model {
 public:
  NetworkModel(const NetworkConfig& cfg, const RngStream& root) : cfg_(cfg), m_(cfg.size()) {
    for (std::size_t i = 0; i < m_; ++i) {
      const auto q = static_cast<std::uint32_t>(i);
      arrivals_.emplace_back(cfg.arrivals[i], root.split(kArrivalStream).split(q));
      service_streams_.push_back(root.split(kServiceStream).split(q));
      routing_streams_.push_back(root.split(kRoutingStream).split(q));
    }
    waiting_.resize(m_);
    busy_.assign(m_, 0);
  }

  std::size_t queues() const override { return m_; }

  void start(Simulation& sim) override {
    for (std::size_t i = 0; i < m_; ++i) arrivals_[i].schedule_next(sim, static_cast<std::uint32_t>(i));
  }

  void handle(const Event& ev, Simulation& sim) override {
    const std::size_t q = ev.target;
    if (ev.kind == EventKind::ExternalArrival) {
      enqueue(sim, q);
      sim.external_arrival(unit_vector(m_, q));
      arrivals_[q].schedule_next(sim, ev.target);
      try_start(sim, q);
      return;
    }
    --busy_[q];
    CountVector x_d = sim.state();
    --x_d[q];
    CountVector dr(m_, 0);
    if (cfg_.router) dr = route_departure(*cfg_.router, q, x_d, routing_streams_[q]);
    sim.departure(unit_vector(m_, q), dr);
    for (std::size_t k = 0; k < m_; ++k) {
      if (dr[k] > 0) {
        enqueue(sim, k);
        try_start(sim, k);
      }
    }
    try_start(sim, q);
  }

 private:
  void enqueue(Simulation& sim, std::size_t k) {
    waiting_[k].push_back(Customer{sim.now(), cfg_.service[k].sample(service_streams_[k])});
  }

  void try_start(Simulation& sim, std::size_t k) {
    while (busy_[k] < cfg_.servers[k] && !waiting_[k].empty()) {
      const Customer c = take(waiting_[k], cfg_.order);
      ++busy_[k];
      sim.schedule(sim.now() + c.work, EventKind::ServiceCompletion, static_cast<std::uint32_t>(k));
    }
  }

  const NetworkConfig cfg_;
  std::size_t m_;
  std::vector<ArrivalClock> arrivals_;
  std::vector<RngStream> service_streams_;
  std::vector<RngStream> routing_streams_;
  std::vector<std::deque<Customer>> waiting_;
  std::vector<int> busy_;
};

}  // namespace

const char* to_string(QueueOrder order) { return order == QueueOrder::FCFS ? "fcfs" : "lcfs"; }

ArrivalProcess ArrivalProcess::poisson(double rate) {
  require(rate > 0.0 && std::isfinite(rate), "Poisson arrival rate must be positive");
  ArrivalProcess a;
  a.interarrival_ = ServiceDistribution::exponential(rate);
  a.poisson_ = true;
  return a;
}

ArrivalProcess ArrivalProcess::renewal(ServiceDistribution interarrival) {
  require(interarrival.mean() > 0.0, "interarrival mean must be positive");
  ArrivalProcess a;
  a.poisson_ = interarrival.kind() == DistributionKind::Exponential;
  a.interarrival_ = std::move(interarrival);
  return a;
}

MarkovRouter::MarkovRouter(std::vector<std::vector<double>> p) : p_(std::move(p)) {
  check_rows(p_, p_.size());
}

double MarkovRouter::exit_probability(std::size_t i) const {
  return std::max(0.0, 1.0 - std::accumulate(p_[i].begin(), p_[i].end(), 0.0));
}

std::optional<std::size_t> MarkovRouter::route(std::size_t from, const CountVector&, RngStream& stream) const {
  const double u = stream.uniform();
  double acc = 0.0;
  for (std::size_t k = 0; k < p_[from].size(); ++k) {
    acc += p_[from][k];
    if (u < acc) return k;
  }
  return std::nullopt;
}

ShorterQueueRouter::ShorterQueueRouter(std::vector<std::vector<std::size_t>> targets)
    : targets_(std::move(targets)) {
  for (const auto& row : targets_) {
    for (std::size_t k : row) require(k < targets_.size(), "shorter-queue target out of range");
  }
}

std::optional<std::size_t> ShorterQueueRouter::route(std::size_t from, const CountVector& x_d, RngStream&) const {
  const auto& row = targets_[from];
  if (row.empty()) return std::nullopt;
  std::size_t best = row.front();
  for (std::size_t k : row) {
    if (x_d[k] < x_d[best] || (x_d[k] == x_d[best] && k < best)) best = k;
  }
  return best;
}

StateDependentRouter::StateDependentRouter(Rule rule, std::string name)
    : rule_(std::move(rule)), name_(std::move(name)) {
  require(static_cast<bool>(rule_), "state-dependent router needs a rule");
}

std::optional<std::size_t> StateDependentRouter::route(std::size_t from, const CountVector& x_d,
                                                       RngStream& stream) const {
  return rule_(from, x_d, stream);
}

CountVector route_departure(const Router& router, std::size_t i, const CountVector& x_d, RngStream& stream) {
  CountVector dr(x_d.size(), 0);
  if (auto k = router.route(i, x_d, stream)) {
    require(*k < x_d.size(), "router returned a queue out of range");
    dr[*k] = 1;
  }
  return dr;
}

PollingDiscipline PollingDiscipline::k_limited(Count k) {
  require(k >= 1, "k-limited discipline needs k >= 1");
  return {Kind::KLimited, k};
}

std::string PollingDiscipline::describe() const {
  switch (kind) {
    case Kind::Exhaustive:
      return "exhaustive";
    case Kind::Gated:
      return "gated";
    case Kind::KLimited:
      return std::to_string(limit) + "-limited";
  }
  return "?";
}

ServerAction step_polling_server(const PollingServerView& view, const PollingDiscipline& discipline) {
  switch (discipline.kind) {
    case PollingDiscipline::Kind::Exhaustive:
      return view.queue_length > 0 ? ServerAction::StartService : ServerAction::CompleteVisit;
    case PollingDiscipline::Kind::Gated:
      return view.gate_remaining > 0 ? ServerAction::StartService : ServerAction::CompleteVisit;
    case PollingDiscipline::Kind::KLimited:
      return view.queue_length > 0 && view.served_this_visit < discipline.limit ? ServerAction::StartService
                                                                               : ServerAction::CompleteVisit;
  }
  return ServerAction::CompleteVisit;
}

double PollingConfig::rho() const {
  double r = 0.0;
  for (std::size_t i = 0; i < size(); ++i) r += arrival_rates[i] * service[i].mean();
  return r;
}

double PollingConfig::total_switchover() const {
  double s = 0.0;
  for (const auto& d : switchover) s += d.mean();
  return s;
}

double PollingConfig::mean_cycle() const { return total_switchover() / (1.0 - rho()); }

double PollingConfig::gamma(std::size_t i) const { return 1.0 / (arrival_rates[i] * mean_cycle()); }

void PollingConfig::validate() const {
  const std::size_t m = size();
  require(m >= 1 && m <= kMaxQueues, "polling system needs between 1 and 64 queues");
  require(service.size() == m && switchover.size() == m && discipline.size() == m,
          "polling config vectors must all have m entries");
  for (double l : arrival_rates) require(l >= 0.0 && std::isfinite(l), "arrival rates must be nonnegative");
  for (const auto& d : discipline) {
    if (d.kind == PollingDiscipline::Kind::KLimited) require(d.limit >= 1, "k-limited needs k >= 1");
  }
  require(total_switchover() > 0.0, "total mean switchover time must be positive");
  require(rho() < 1.0, "polling system is unstable: rho = " + std::to_string(rho()) + " >= 1");
}

double RovingNetworkConfig::exit_probability(std::size_t i) const {
  return std::max(0.0, 1.0 - std::accumulate(routing[i].begin(), routing[i].end(), 0.0));
}

double RovingNetworkConfig::routing_pgf(std::size_t i, std::span<const double> z) const {
  double v = exit_probability(i);
  for (std::size_t k = 0; k < size(); ++k) v += routing[i][k] * z[k];
  return v;
}

std::vector<double> RovingNetworkConfig::throughputs() const { return solve_traffic(*this); }

double RovingNetworkConfig::rho() const {
  const auto lam = throughputs();
  double r = 0.0;
  for (std::size_t i = 0; i < size(); ++i) r += lam[i] * polling.service[i].mean();
  return r;
}

double RovingNetworkConfig::mean_cycle() const { return polling.total_switchover() / (1.0 - rho()); }

double RovingNetworkConfig::gamma(std::size_t i) const { return 1.0 / (throughputs()[i] * mean_cycle()); }

void RovingNetworkConfig::validate() const {
  const std::size_t m = size();
  require(m >= 1 && m <= kMaxQueues, "roving network needs between 1 and 64 queues");
  require(polling.service.size() == m && polling.switchover.size() == m && polling.discipline.size() == m,
          "roving network config vectors must all have m entries");
  check_rows(routing, m);
  require(polling.total_switchover() > 0.0, "total mean switchover time must be positive");
  const double r = rho();
  require(r < 1.0, "roving network is unstable: rho = " + std::to_string(r) + " >= 1");
}

std::vector<double> solve_traffic(const RovingNetworkConfig& cfg) {
  check_rows(cfg.routing, cfg.size());
  return solve_traffic(std::span<const double>(cfg.polling.arrival_rates), cfg.routing);
}

double PriorityConfig::rho() const {
  double r = 0.0;
  for (std::size_t i = 0; i < size(); ++i) r += arrival_rates[i] * service[i].mean();
  return r;
}

void PriorityConfig::validate() const {
  require(size() >= 1 && size() <= kMaxQueues, "priority model needs between 1 and 64 classes");
  require(service.size() == size(), "priority config needs one service law per class");
  for (double l : arrival_rates) require(l > 0.0 && std::isfinite(l), "class arrival rates must be positive");
  require(rho() < 1.0, "priority queue is unstable: rho = " + std::to_string(rho()) + " >= 1");
}

double LongerQueueConfig::rho() const {
  return arrival_rates[0] * service[0].mean() + arrival_rates[1] * service[1].mean();
}

void LongerQueueConfig::validate() const {
  require(arrival_rates.size() == 2 && service.size() == 2 && alpha.size() == 2,
          "longer-queue model has exactly two queues");
  for (double l : arrival_rates) require(l > 0.0 && std::isfinite(l), "arrival rates must be positive");
  for (double a : alpha) require(a >= 0.0 && a <= 1.0, "tie probabilities must lie in [0, 1]");
  require(std::abs(alpha[0] + alpha[1] - 1.0) <= 1e-12, "tie probabilities must sum to 1");
  require(rho() < 1.0, "longer-queue model is unstable: rho = " + std::to_string(rho()) + " >= 1");
}

double BatchStationConfig::rho() const {
  const auto& g = batch.marginal_means();
  double r = 0.0;
  for (std::size_t i = 0; i < size(); ++i) {
    r += batch_rate * g[i] / static_cast<double>(batch_service[i]) * service[i].mean();
  }
  return r / servers;
}

void BatchStationConfig::validate() const {
  const std::size_t m = size();
  require(m >= 1 && m <= kMaxQueues, "batch station needs between 1 and 64 classes");
  require(batch_rate > 0.0 && std::isfinite(batch_rate), "batch arrival rate must be positive");
  require(service.size() == m && batch_service.size() == m, "batch station needs one service law and K per class");
  for (Count k : batch_service) require(k >= 1, "batch-service sizes K_i must be >= 1");
  require(servers >= 1, "batch station needs at least one server");
  require(rho() < 1.0, "batch station is unstable: rho = " + std::to_string(rho()) + " >= 1");
}

std::vector<std::vector<double>> NetworkConfig::markov_matrix() const {
  if (auto* mr = dynamic_cast<const MarkovRouter*>(router.get())) return mr->matrix();
  if (!router) return std::vector<std::vector<double>>(size(), std::vector<double>(size(), 0.0));
  return {};
}

void NetworkConfig::validate() const {
  const std::size_t m = size();
  require(m >= 1 && m <= kMaxQueues, "network needs between 1 and 64 queues");
  require(service.size() == m && servers.size() == m, "network config needs service law and server count per queue");
  for (int c : servers) require(c >= 1, "each station needs at least one server");
  if (auto* mr = dynamic_cast<const MarkovRouter*>(router.get())) {
    require(mr->matrix().size() == m, "routing matrix dimension does not match the network");
  }
  if (auto* sq = dynamic_cast<const ShorterQueueRouter*>(router.get())) {
    require(sq->targets().size() == m, "shorter-queue targets must have one row per queue");
  }
  if (allow_unstable) return;
  const auto p = markov_matrix();
  if (p.empty()) return;  // state-dependent routing: stability is the user's responsibility
  std::vector<double> lambda(m);
  for (std::size_t i = 0; i < m; ++i) lambda[i] = arrivals[i].rate();
  const auto big = solve_traffic(std::span<const double>(lambda), p);
  for (std::size_t i = 0; i < m; ++i) {
    const double load = big[i] * service[i].mean() / servers[i];
    require(load < 1.0, "station " + std::to_string(i) + " is unstable: load " + std::to_string(load) + " >= 1");
  }
}

std::string model_kind(const ModelSpec& spec) {
  switch (spec.index()) {
    case 0:
      return "network";
    case 1:
      return "polling";
    case 2:
      return "roving-network";
    case 3:
      return "priority";
    case 4:
      return "longer-queue";
    case 5:
      return "batch-station";
  }
  return "?";
}

std::size_t model_dimension(const ModelSpec& spec) {
  return std::visit(
      [](const auto& c) -> std::size_t {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, LongerQueueConfig>) {
          return 2;
        } else {
          return c.size();
        }
      },
      spec);
}

void validate(const ModelSpec& spec) {
  std::visit([](const auto& c) { c.validate(); }, spec);
}

std::unique_ptr<Model> make_model(const ModelSpec& spec, const RngStream& stream) {
  validate(spec);
  return std::visit(
      [&](const auto& c) -> std::unique_ptr<Model> {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, NetworkConfig>) {
          return std::make_unique<NetworkModel>(c, stream);
        } else if constexpr (std::is_same_v<T, PollingConfig>) {
          return std::make_unique<PollingModel>(c, nullptr, stream);
        } else if constexpr (std::is_same_v<T, RovingNetworkConfig>) {
          return std::make_unique<PollingModel>(c.polling, std::make_shared<MarkovRouter>(c.routing), stream);
        } else if constexpr (std::is_same_v<T, PriorityConfig>) {
          return std::make_unique<PriorityModel>(c, stream);
        } else if constexpr (std::is_same_v<T, LongerQueueConfig>) {
          return std::make_unique<LongerQueueModel>(c, stream);
        } else {
          return std::make_unique<BatchStationModel>(c, stream);
        }
      },
      spec);
}

}  // namespace qbal
