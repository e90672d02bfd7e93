#include "qbal/samples.hpp"

#include <cmath>
#include <limits>

#include "qbal/errors.hpp"

namespace qbal {

const char* to_string(EpochTag tag) {
  switch (tag) {
    case EpochTag::VisitBegin:
      return "visit_begin";
    case EpochTag::VisitComplete:
      return "visit_complete";
    case EpochTag::ServiceBegin:
      return "service_begin";
  }
  return "?";
}

std::size_t CountVectorHash::operator()(const std::vector<std::int32_t>& v) const noexcept {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::int32_t c : v) {
    h ^= static_cast<std::uint32_t>(c);
    h *= 0x100000001b3ull;
    h ^= h >> 29;
  }
  return static_cast<std::size_t>(h);
}

namespace {

std::int32_t narrow(Count c) {
  if (c > std::numeric_limits<std::int32_t>::max() || c < 0) {
    throw StateOverflow("sample value outside 32-bit storage range");
  }
  return static_cast<std::int32_t>(c);
}

}  // namespace

EmbeddedSampleLog::EmbeddedSampleLog(std::size_t m, const CountVector& x0) : m_(m) {
  x0_.reserve(m);
  for (Count c : x0) x0_.push_back(narrow(c));
}

void EmbeddedSampleLog::push_block(std::span<const Count> v) {
  for (Count c : v) data_.push_back(narrow(c));
}

void EmbeddedSampleLog::add_arrival(double t, std::span<const Count> x_pre,
                                    std::span<const Count> delta_e) {
  times_.push_back(t);
  kinds_.push_back(static_cast<std::uint8_t>(EpochKind::Arrival));
  push_block(x_pre);
  push_block(delta_e);
  data_.insert(data_.end(), m_, 0);
  ++arrivals_;
}

void EmbeddedSampleLog::add_departure(double t, std::span<const Count> x_d,
                                      std::span<const Count> delta_d,
                                      std::span<const Count> delta_r) {
  times_.push_back(t);
  kinds_.push_back(static_cast<std::uint8_t>(EpochKind::Departure));
  push_block(x_d);
  push_block(delta_d);
  push_block(delta_r);
}

void EmbeddedSampleLog::add_tag(double t, EpochTag tag, std::size_t queue,
                                std::span<const Count> x) {
  tag_times_.push_back(t);
  tag_kinds_.push_back(static_cast<std::uint8_t>(tag));
  tag_queues_.push_back(static_cast<std::uint32_t>(queue));
  for (Count c : x) tag_data_.push_back(narrow(c));
}

void CompensatedSum::add(double v) noexcept {
  const double t = sum_ + v;
  if (std::abs(sum_) >= std::abs(v)) {
    comp_ += (sum_ - t) + v;
  } else {
    comp_ += (v - t) + sum_;
  }
  sum_ = t;
}

TimeAverageAccumulator::TimeAverageAccumulator(std::size_t m) : m_(m), scratch_(m) {}

std::uint32_t TimeAverageAccumulator::intern(std::span<const Count> x) {
  for (std::size_t i = 0; i < m_; ++i) scratch_[i] = narrow(x[i]);
  auto [it, inserted] = index_.try_emplace(scratch_, static_cast<std::uint32_t>(states_.size()));
  if (inserted) {
    states_.push_back(scratch_);
    occupancy_.emplace_back();
  }
  return it->second;
}

void TimeAverageAccumulator::start(double t0, std::span<const Count> x, int phase) {
  t0_ = t0;
  t_end_ = t0;
  finished_ = false;
  segments_.clear();
  segments_.push_back(Segment{t0, intern(x), phase});
}

void TimeAverageAccumulator::close_current(double t) {
  const Segment& last = segments_.back();
  occupancy_[last.state].add(t - last.start);
}

void TimeAverageAccumulator::change(double t, std::span<const Count> x, int phase) {
  const std::uint32_t id = intern(x);
  Segment& last = segments_.back();
  if (last.state == id && last.phase == phase) return;
  if (t == last.start) {
    // Zero-length segment: overwrite it instead of keeping an empty interval.
    last.state = id;
    last.phase = phase;
    return;
  }
  close_current(t);
  segments_.push_back(Segment{t, id, phase});
}

void TimeAverageAccumulator::finish(double t_end) {
  if (finished_) return;
  close_current(t_end);
  t_end_ = t_end;
  finished_ = true;
}

double TimeAverageAccumulator::total_occupancy() const {
  CompensatedSum s;
  for (const auto& o : occupancy_) s.add(o.value());
  return s.value();
}

}  // namespace qbal
