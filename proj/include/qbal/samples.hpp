#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "qbal/state.hpp"

namespace qbal {

/// Epoch kinds tagged by models for polling-style estimators.
enum class EpochTag : std::uint8_t { VisitBegin = 0, VisitComplete = 1, ServiceBegin = 2 };

inline constexpr std::size_t kEpochTagCount = 3;

const char* to_string(EpochTag tag);

enum class EpochKind : std::uint8_t { Arrival = 0, Departure = 1 };

struct CountVectorHash {
  std::size_t operator()(const std::vector<std::int32_t>& v) const noexcept;
};

/// Every arrival and departure epoch of a run, in time order.
///
/// Arrival epochs store (X(t−), ΔN^e); departure epochs store
/// (X^d(t), ΔN^d, ΔN^r). Each epoch occupies 3m integers; the third block is
/// zero for arrivals. Polling epoch tags are kept in a separate stream.
class EmbeddedSampleLog {
 public:
  EmbeddedSampleLog() = default;
  EmbeddedSampleLog(std::size_t m, const CountVector& x0);

  void add_arrival(double t, std::span<const Count> x_pre, std::span<const Count> delta_e);
  void add_departure(double t, std::span<const Count> x_d, std::span<const Count> delta_d,
                     std::span<const Count> delta_r);
  void add_tag(double t, EpochTag tag, std::size_t queue, std::span<const Count> x);

  std::size_t dimension() const noexcept { return m_; }
  const std::vector<std::int32_t>& x0() const noexcept { return x0_; }

  std::size_t size() const noexcept { return times_.size(); }
  std::size_t arrival_count() const noexcept { return arrivals_; }
  std::size_t departure_count() const noexcept { return size() - arrivals_; }
  double time(std::size_t k) const { return times_[k]; }
  EpochKind kind(std::size_t k) const { return static_cast<EpochKind>(kinds_[k]); }
  std::span<const std::int32_t> x(std::size_t k) const { return {&data_[k * 3 * m_], m_}; }
  std::span<const std::int32_t> y(std::size_t k) const { return {&data_[k * 3 * m_ + m_], m_}; }
  std::span<const std::int32_t> z(std::size_t k) const { return {&data_[k * 3 * m_ + 2 * m_], m_}; }
  /// The whole (x, y, z) block of epoch k.
  std::span<const std::int32_t> record(std::size_t k) const { return {&data_[k * 3 * m_], 3 * m_}; }

  std::size_t tag_count() const noexcept { return tag_times_.size(); }
  double tag_time(std::size_t k) const { return tag_times_[k]; }
  EpochTag tag_kind(std::size_t k) const { return static_cast<EpochTag>(tag_kinds_[k]); }
  std::size_t tag_queue(std::size_t k) const { return tag_queues_[k]; }
  std::span<const std::int32_t> tag_state(std::size_t k) const { return {&tag_data_[k * m_], m_}; }

 private:
  void push_block(std::span<const Count> v);

  std::size_t m_ = 0;
  std::vector<std::int32_t> x0_;
  std::vector<double> times_;
  std::vector<std::uint8_t> kinds_;
  std::vector<std::int32_t> data_;
  std::size_t arrivals_ = 0;

  std::vector<double> tag_times_;
  std::vector<std::uint8_t> tag_kinds_;
  std::vector<std::uint32_t> tag_queues_;
  std::vector<std::int32_t> tag_data_;
};

/// Neumaier compensated sum.
class CompensatedSum {
 public:
  void add(double v) noexcept;
  double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

/// Piecewise-constant record of (X(t), server phase) over a run.
///
/// States are interned; each segment stores its start time. Per-state
/// occupancy is accumulated with compensated summation.
class TimeAverageAccumulator {
 public:
  struct Segment {
    double start;
    std::uint32_t state;
    std::int32_t phase;
  };

  TimeAverageAccumulator() = default;
  explicit TimeAverageAccumulator(std::size_t m);

  void start(double t0, std::span<const Count> x, int phase);
  /// State and/or phase changed at time t.
  void change(double t, std::span<const Count> x, int phase);
  void finish(double t_end);

  std::size_t dimension() const noexcept { return m_; }
  double start_time() const noexcept { return t0_; }
  double end_time() const noexcept { return t_end_; }
  double elapsed() const noexcept { return t_end_ - t0_; }

  const std::vector<Segment>& segments() const noexcept { return segments_; }
  double segment_end(std::size_t k) const {
    return k + 1 < segments_.size() ? segments_[k + 1].start : t_end_;
  }
  std::size_t state_count() const noexcept { return states_.size(); }
  const std::vector<std::int32_t>& state(std::size_t id) const { return states_[id]; }
  /// Total time spent in state `id` (all phases).
  double occupancy(std::size_t id) const { return occupancy_[id].value(); }
  /// Sum of all occupancies; equals elapsed() up to rounding.
  double total_occupancy() const;

 private:
  std::uint32_t intern(std::span<const Count> x);
  void close_current(double t);

  std::size_t m_ = 0;
  double t0_ = 0.0;
  double t_end_ = 0.0;
  bool finished_ = false;
  std::vector<Segment> segments_;
  std::vector<std::vector<std::int32_t>> states_;
  std::unordered_map<std::vector<std::int32_t>, std::uint32_t, CountVectorHash> index_;
  std::vector<CompensatedSum> occupancy_;
  std::vector<std::int32_t> scratch_;
};

}  // namespace qbal
