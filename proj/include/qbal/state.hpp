#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

namespace qbal {

using Count = std::int64_t;
using CountVector = std::vector<Count>;

/// Bit set over queue indices; bit i set means queue i is in the subset.
using SubsetMask = std::uint64_t;

inline constexpr std::size_t kMaxQueues = 64;

/// Queue-length vector X(t), one entry per queue (customers in service included).
class StateVector {
 public:
  StateVector() = default;
  explicit StateVector(std::size_t m);
  explicit StateVector(CountVector counts, std::vector<std::size_t> station_of = {});

  std::size_t size() const noexcept { return counts_.size(); }
  Count operator[](std::size_t i) const { return counts_[i]; }
  std::span<const Count> counts() const noexcept { return counts_; }
  std::size_t station_of(std::size_t queue) const { return station_of_[queue]; }
  const std::vector<std::size_t>& stations() const noexcept { return station_of_; }
  Count total() const noexcept;

  bool operator==(const StateVector& other) const { return counts_ == other.counts_; }

 private:
  CountVector counts_;
  std::vector<std::size_t> station_of_;
};

/// Increments (ΔN^e, ΔN^d, ΔN^r) applied at a single epoch.
struct JumpMark {
  CountVector delta_e;
  CountVector delta_d;
  CountVector delta_r;

  JumpMark() = default;
  explicit JumpMark(std::size_t m) : delta_e(m, 0), delta_d(m, 0), delta_r(m, 0) {}
  JumpMark(CountVector e, CountVector d, CountVector r);

  static JumpMark arrival(CountVector e);
  static JumpMark departure(CountVector d, CountVector r);

  std::size_t size() const noexcept { return delta_e.size(); }
  Count total_e() const noexcept;
  Count total_d() const noexcept;
  Count total_r() const noexcept;
  bool is_arrival() const noexcept { return total_e() > 0; }
  bool is_departure() const noexcept { return total_d() > 0; }

  /// Throws InvalidParameter on mismatched lengths, negative entries, or an
  /// epoch carrying both arrivals and departures.
  void validate() const;

  bool operator==(const JumpMark&) const = default;
};

/// X^d(t): the state after departures and before routed (internal) arrivals.
struct IntermediateState {
  CountVector x_d;
};

struct JumpResult {
  IntermediateState x_d;
  StateVector x_post;
};

/// Departure-first transition: x_d = x_pre + Δe − Δd, x_post = x_d + Δr.
/// Throws NegativeState if Δd exceeds x_pre in some coordinate.
JumpResult apply_jump(const StateVector& x_pre, const JumpMark& mark);

/// In-place variant used by the kernel. `x` holds x_pre on entry and x_post on
/// exit; `x_d` receives the intermediate state.
void apply_jump_inplace(CountVector& x, const JumpMark& mark, CountVector& x_d);

/// Support of Δd as a subset of queues; nullopt for a non-departure mark.
std::optional<SubsetMask> classify_departure_subset(const JumpMark& mark);

/// Checked addition; throws StateOverflow instead of wrapping.
Count checked_add(Count a, Count b);

/// Cumulative counting processes plus the simple (instant-counting) processes.
class CountingLedger {
 public:
  CountingLedger() = default;
  explicit CountingLedger(std::size_t m);

  void record(const JumpMark& mark);

  std::size_t size() const noexcept { return cum_e_.size(); }
  const CountVector& cum_e() const noexcept { return cum_e_; }
  const CountVector& cum_d() const noexcept { return cum_d_; }
  const CountVector& cum_r() const noexcept { return cum_r_; }

  /// |Ñ^e|: number of arrival instants.
  Count simple_e() const noexcept { return simple_e_total_; }
  /// Ñ^e_i: instants with at least one external arrival at queue i.
  Count simple_e(std::size_t i) const { return simple_e_[i]; }
  Count simple_d() const noexcept { return simple_d_total_; }
  Count simple_d(std::size_t i) const { return simple_d_[i]; }
  /// Ñ^d_A keyed by subset mask.
  const std::map<SubsetMask, Count>& subset_counts() const noexcept { return subset_d_; }
  /// Epochs that carried both arrivals and departures (always zero for kernel runs).
  Count exclusivity_violations() const noexcept { return exclusivity_violations_; }

  /// Merge another ledger (e.g. another replication). Counts add.
  void merge(const CountingLedger& other);
  /// Counts an arrival and a departure recorded as separate jumps at the same instant.
  void note_exclusivity_violation() noexcept { ++exclusivity_violations_; }

 private:
  CountVector cum_e_, cum_d_, cum_r_;
  CountVector simple_e_, simple_d_;
  Count simple_e_total_ = 0;
  Count simple_d_total_ = 0;
  std::map<SubsetMask, Count> subset_d_;
  Count exclusivity_violations_ = 0;
};

}  // namespace qbal
