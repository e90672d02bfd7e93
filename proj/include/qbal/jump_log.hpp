#pragma once

#include <cstddef>
#include <deque>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "qbal/state.hpp"

namespace qbal {

struct JumpRecord {
  double time = 0.0;
  JumpMark mark;
};

/// In-memory jump log. Bounded ring by default; full-trace mode keeps all.
class JumpLog {
 public:
  static constexpr std::size_t kDefaultCapacity = 1u << 16;

  explicit JumpLog(std::size_t capacity = kDefaultCapacity, bool full_trace = false);

  void push(double time, const JumpMark& mark);

  bool full_trace() const noexcept { return full_trace_; }
  std::size_t capacity() const noexcept { return capacity_; }
  /// Number of records pushed over the lifetime of the log.
  std::size_t pushed() const noexcept { return pushed_; }
  /// Records currently retained (oldest first).
  const std::deque<JumpRecord>& records() const noexcept { return records_; }
  /// True when no record was evicted, i.e. the log replays the whole path.
  bool complete() const noexcept { return pushed_ == records_.size(); }

 private:
  std::size_t capacity_;
  bool full_trace_;
  std::size_t pushed_ = 0;
  std::deque<JumpRecord> records_;
};

/// A complete trace read back from disk.
struct JumpTrace {
  StateVector x0;
  std::vector<JumpRecord> records;
};

/// Line-oriented jump-log file.
///
///   # qbalance-jumplog 1
///   # m <m>
///   # x0 <x0_1> ... <x0_m>
///   <time> <Δe_1..Δe_m> <Δd_1..Δd_m> <Δr_1..Δr_m>
///
/// Times are written with 17 significant digits so they parse back to the
/// identical double. Lines starting with '#' other than the header are ignored.
class JumpLogWriter {
 public:
  JumpLogWriter(const std::string& path, const StateVector& x0);
  ~JumpLogWriter();
  JumpLogWriter(const JumpLogWriter&) = delete;
  JumpLogWriter& operator=(const JumpLogWriter&) = delete;

  void write(double time, const JumpMark& mark);
  void flush();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

void write_jump_record(std::ostream& out, double time, const JumpMark& mark);
void write_jump_header(std::ostream& out, const StateVector& x0);

JumpTrace read_jump_log(std::istream& in);
JumpTrace read_jump_log_file(const std::string& path);

/// Replays a trace and checks X(t) = X(0) + N^e(t) − N^d(t) + N^r(t) at every
/// record, plus nonnegativity of X^d. Returns the index of the first failing
/// record, or nullopt when the whole trace is consistent.
std::optional<std::size_t> find_conservation_violation(const StateVector& x0,
                                                       const std::vector<JumpRecord>& records);

}  // namespace qbal
