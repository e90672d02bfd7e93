#include "qbal/state.hpp"

#include <numeric>
#include <string>

#include "qbal/errors.hpp"

namespace qbal {

namespace {

Count sum(const CountVector& v) { return std::accumulate(v.begin(), v.end(), Count{0}); }

}  // namespace

StateVector::StateVector(std::size_t m) : counts_(m, 0), station_of_(m) {
  std::iota(station_of_.begin(), station_of_.end(), std::size_t{0});
}

StateVector::StateVector(CountVector counts, std::vector<std::size_t> station_of)
    : counts_(std::move(counts)), station_of_(std::move(station_of)) {
  if (station_of_.empty()) {
    station_of_.resize(counts_.size());
    std::iota(station_of_.begin(), station_of_.end(), std::size_t{0});
  }
  if (station_of_.size() != counts_.size()) {
    throw InvalidParameter("station map length differs from state length");
  }
  for (Count c : counts_) {
    if (c < 0) throw NegativeState("state vector entries must be nonnegative");
  }
}

Count StateVector::total() const noexcept { return sum(counts_); }

JumpMark::JumpMark(CountVector e, CountVector d, CountVector r)
    : delta_e(std::move(e)), delta_d(std::move(d)), delta_r(std::move(r)) {}

JumpMark JumpMark::arrival(CountVector e) {
  const std::size_t m = e.size();
  return JumpMark(std::move(e), CountVector(m, 0), CountVector(m, 0));
}

JumpMark JumpMark::departure(CountVector d, CountVector r) {
  const std::size_t m = d.size();
  return JumpMark(CountVector(m, 0), std::move(d), std::move(r));
}

Count JumpMark::total_e() const noexcept { return sum(delta_e); }
Count JumpMark::total_d() const noexcept { return sum(delta_d); }
Count JumpMark::total_r() const noexcept { return sum(delta_r); }

void JumpMark::validate() const {
  const std::size_t m = delta_e.size();
  if (delta_d.size() != m || delta_r.size() != m) {
    throw InvalidParameter("jump mark components have different lengths");
  }
  for (std::size_t i = 0; i < m; ++i) {
    if (delta_e[i] < 0 || delta_d[i] < 0 || delta_r[i] < 0) {
      throw InvalidParameter("jump mark entries must be nonnegative");
    }
  }
  if (total_e() > 0 && total_d() > 0) {
    throw InvalidParameter("external arrivals and departures in the same epoch");
  }
}

Count checked_add(Count a, Count b) {
  Count out;
  if (__builtin_add_overflow(a, b, &out)) {
    throw StateOverflow("queue length overflow (unstable system?)");
  }
  return out;
}

void apply_jump_inplace(CountVector& x, const JumpMark& mark, CountVector& x_d) {
  const std::size_t m = x.size();
  x_d.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    const Count after_departure = x[i] - mark.delta_d[i];
    if (after_departure < 0) {
      throw NegativeState("departure of " + std::to_string(mark.delta_d[i]) +
                          " customers from queue " + std::to_string(i) + " holding " +
                          std::to_string(x[i]));
    }
    x_d[i] = checked_add(after_departure, mark.delta_e[i]);
  }
  for (std::size_t i = 0; i < m; ++i) x[i] = checked_add(x_d[i], mark.delta_r[i]);
}

JumpResult apply_jump(const StateVector& x_pre, const JumpMark& mark) {
  mark.validate();
  if (mark.size() != x_pre.size()) {
    throw InvalidParameter("jump mark length differs from state length");
  }
  CountVector x(x_pre.counts().begin(), x_pre.counts().end());
  CountVector x_d;
  apply_jump_inplace(x, mark, x_d);
  return JumpResult{IntermediateState{std::move(x_d)}, StateVector(std::move(x), x_pre.stations())};
}

std::optional<SubsetMask> classify_departure_subset(const JumpMark& mark) {
  if (mark.delta_d.size() > kMaxQueues) throw InvalidParameter("too many queues for subset mask");
  SubsetMask mask = 0;
  for (std::size_t i = 0; i < mark.delta_d.size(); ++i) {
    if (mark.delta_d[i] > 0) mask |= SubsetMask{1} << i;
  }
  if (mask == 0) return std::nullopt;
  return mask;
}

CountingLedger::CountingLedger(std::size_t m)
    : cum_e_(m, 0), cum_d_(m, 0), cum_r_(m, 0), simple_e_(m, 0), simple_d_(m, 0) {}

void CountingLedger::record(const JumpMark& mark) {
  const std::size_t m = cum_e_.size();
  bool any_e = false;
  bool any_d = false;
  for (std::size_t i = 0; i < m; ++i) {
    cum_e_[i] = checked_add(cum_e_[i], mark.delta_e[i]);
    cum_d_[i] = checked_add(cum_d_[i], mark.delta_d[i]);
    cum_r_[i] = checked_add(cum_r_[i], mark.delta_r[i]);
    if (mark.delta_e[i] > 0) {
      ++simple_e_[i];
      any_e = true;
    }
    if (mark.delta_d[i] > 0) {
      ++simple_d_[i];
      any_d = true;
    }
  }
  if (any_e) ++simple_e_total_;
  if (any_d) {
    ++simple_d_total_;
    ++subset_d_[*classify_departure_subset(mark)];
  }
  if (any_e && any_d) ++exclusivity_violations_;
}

void CountingLedger::merge(const CountingLedger& other) {
  if (cum_e_.empty()) {
    *this = other;
    return;
  }
  if (other.size() != size()) throw InvalidParameter("cannot merge ledgers of different sizes");
  for (std::size_t i = 0; i < size(); ++i) {
    cum_e_[i] = checked_add(cum_e_[i], other.cum_e_[i]);
    cum_d_[i] = checked_add(cum_d_[i], other.cum_d_[i]);
    cum_r_[i] = checked_add(cum_r_[i], other.cum_r_[i]);
    simple_e_[i] += other.simple_e_[i];
    simple_d_[i] += other.simple_d_[i];
  }
  simple_e_total_ += other.simple_e_total_;
  simple_d_total_ += other.simple_d_total_;
  for (const auto& [mask, n] : other.subset_d_) subset_d_[mask] += n;
  exclusivity_violations_ += other.exclusivity_violations_;
}

}  // namespace qbal
