#include "qbal/kernel.hpp"

#include <numeric>
#include <sstream>

#include "qbal/errors.hpp"

namespace qbal {

bool FutureEventSet::Later::operator()(const Event& a, const Event& b) const noexcept {
  if (a.time != b.time) return a.time > b.time;
  if (a.kind != b.kind) return a.kind > b.kind;
  return a.sequence > b.sequence;
}

void FutureEventSet::push(Event ev) {
  ev.sequence = next_sequence_++;
  heap_.push(ev);
}

Event FutureEventSet::pop() {
  Event ev = heap_.top();
  heap_.pop();
  return ev;
}

const char* to_string(TiePolicy p) { return p == TiePolicy::Reject ? "reject" : "jitter"; }

TiePolicy parse_tie_policy(const std::string& s) {
  if (s == "reject") return TiePolicy::Reject;
  if (s == "jitter") return TiePolicy::Jitter;
  throw InvalidParameter("unknown tie policy '" + s + "' (expected reject or jitter)");
}

std::vector<std::size_t> Model::station_of() const {
  std::vector<std::size_t> s(queues());
  std::iota(s.begin(), s.end(), std::size_t{0});
  return s;
}

Simulation::Simulation(Model& model, const RunOptions& options)
    : model_(model), options_(options) {}

void Simulation::schedule(double time, EventKind kind, std::uint32_t target, std::uint64_t token) {
  if (!(time >= now_)) throw InvalidParameter("cannot schedule an event in the past");
  events_.push(Event{time, kind, target, token, 0});
}

void Simulation::jump(const JumpMark& mark) {
  const bool arrival = mark.total_e() > 0;
  if (arrival) result_.samples.add_arrival(now_, x_, mark.delta_e);
  apply_jump_inplace(x_, mark, x_d_);
  if (!arrival) result_.samples.add_departure(now_, x_d_, mark.delta_d, mark.delta_r);
  result_.ledger.record(mark);
  result_.jump_log.push(now_, mark);
  if (writer_) writer_->write(now_, mark);
  result_.time_average.change(now_, x_, phase_);
  const Count total = std::accumulate(x_.begin(), x_.end(), Count{0});
  if (total > result_.max_total_queue) result_.max_total_queue = total;
}

void Simulation::external_arrival(const CountVector& batch) {
  if (batch.size() != x_.size()) throw InvalidParameter("arrival batch has wrong dimension");
  if (now_ == last_departure_time_) {
    throw SimultaneityViolation(now_, "external arrival coincides with a service completion");
  }
  Count total = 0;
  for (Count c : batch) {
    if (c < 0) throw InvalidParameter("negative arrival batch");
    total += c;
  }
  if (total == 0) throw InvalidParameter("empty arrival batch");
  last_arrival_time_ = now_;
  std::fill(scratch_.delta_d.begin(), scratch_.delta_d.end(), 0);
  std::fill(scratch_.delta_r.begin(), scratch_.delta_r.end(), 0);
  scratch_.delta_e = batch;
  jump(scratch_);
}

void Simulation::departure(const CountVector& delta_d, const CountVector& delta_r) {
  if (delta_d.size() != x_.size() || delta_r.size() != x_.size()) {
    throw InvalidParameter("departure mark has wrong dimension");
  }
  if (now_ == last_arrival_time_) {
    throw SimultaneityViolation(now_, "service completion coincides with an external arrival");
  }
  Count total = 0;
  for (std::size_t i = 0; i < delta_d.size(); ++i) {
    if (delta_d[i] < 0 || delta_r[i] < 0) throw InvalidParameter("negative departure mark");
    total += delta_d[i];
  }
  if (total == 0) throw InvalidParameter("departure epoch without departures");
  last_departure_time_ = now_;
  std::fill(scratch_.delta_e.begin(), scratch_.delta_e.end(), 0);
  scratch_.delta_d = delta_d;
  scratch_.delta_r = delta_r;
  jump(scratch_);
}

void Simulation::tag(EpochTag tag, std::size_t queue) {
  result_.samples.add_tag(now_, tag, queue, x_);
}

void Simulation::set_phase(int phase) {
  if (phase == phase_) return;
  phase_ = phase;
  result_.time_average.change(now_, x_, phase_);
}

RunResult Simulation::run() {
  if (started_) throw InvalidParameter("a Simulation can only run once");
  started_ = true;
  if (!options_.stop.finite()) throw InvalidParameter("run needs a finite horizon or event budget");

  const std::size_t m = model_.queues();
  if (m == 0 || m > kMaxQueues) throw InvalidParameter("model must have between 1 and 64 queues");
  const auto stations = model_.station_of();
  x_.assign(m, 0);
  x_d_.assign(m, 0);
  scratch_ = JumpMark(m);
  phase_ = model_.initial_phase();
  now_ = 0.0;

  result_.x0 = StateVector(x_, stations);
  result_.ledger = CountingLedger(m);
  result_.samples = EmbeddedSampleLog(m, x_);
  result_.time_average = TimeAverageAccumulator(m);
  result_.time_average.start(0.0, x_, phase_);
  result_.jump_log = JumpLog(options_.jump_log_capacity, options_.full_trace);
  if (options_.jump_log_path) writer_ = std::make_unique<JumpLogWriter>(*options_.jump_log_path, result_.x0);

  model_.start(*this);

  const double horizon = options_.stop.horizon;
  const std::uint64_t budget = options_.stop.max_events;
  bool budget_hit = false;
  while (!events_.empty()) {
    if (events_.top().time > horizon) break;
    if (budget > 0 && result_.events >= budget) {
      budget_hit = true;
      break;
    }
    Event ev = events_.pop();
    if (ev.kind == EventKind::ExternalArrival && ev.time == last_departure_time_) {
      if (options_.tie_policy == TiePolicy::Reject) {
        std::ostringstream os;
        os.precision(17);
        os << "external arrival and service completion at identical time " << ev.time;
        throw SimultaneityViolation(ev.time, os.str());
      }
      ev.time += kJitterEpsilon;
      ++result_.jitters;
      events_.push(ev);
      continue;
    }
    now_ = ev.time;
    ++result_.events;
    model_.handle(ev, *this);
  }

  const double end = (!budget_hit && std::isfinite(horizon)) ? horizon : now_;
  result_.end_time = end;
  result_.time_average.finish(end);
  result_.x_end = StateVector(x_, stations);
  if (writer_) writer_->flush();
  return std::move(result_);
}

RunResult run(Model& model, const RunOptions& options) {
  Simulation sim(model, options);
  return sim.run();
}

RateEstimates rate_estimates(const CountingLedger& ledger, double t) {
  if (!(t > 0.0)) throw InvalidParameter("rate estimates need t > 0");
  RateEstimates r;
  r.lambda_e = static_cast<double>(ledger.simple_e()) / t;
  r.lambda_d = static_cast<double>(ledger.simple_d()) / t;
  for (std::size_t i = 0; i < ledger.size(); ++i) {
    r.lambda_e_k.push_back(static_cast<double>(ledger.simple_e(i)) / t);
    r.lambda_d_i.push_back(static_cast<double>(ledger.simple_d(i)) / t);
  }
  for (const auto& [mask, n] : ledger.subset_counts()) r.lambda_d_A[mask] = static_cast<double>(n) / t;
  return r;
}

}  // namespace qbal
