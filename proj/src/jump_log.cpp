#include "qbal/jump_log.hpp"

#include <cstdlib>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "qbal/errors.hpp"

namespace qbal {

JumpLog::JumpLog(std::size_t capacity, bool full_trace)
    : capacity_(capacity == 0 ? 1 : capacity), full_trace_(full_trace) {}

void JumpLog::push(double time, const JumpMark& mark) {
  ++pushed_;
  if (!full_trace_ && records_.size() == capacity_) records_.pop_front();
  records_.push_back(JumpRecord{time, mark});
}

namespace {

std::string format_time(double t) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", t);
  return buf;
}

void write_counts(std::ostream& out, const CountVector& v) {
  for (Count c : v) out << ' ' << c;
}

}  // namespace

void write_jump_header(std::ostream& out, const StateVector& x0) {
  out << "# qbalance-jumplog 1\n# m " << x0.size() << "\n# x0";
  for (Count c : x0.counts()) out << ' ' << c;
  out << '\n';
}

void write_jump_record(std::ostream& out, double time, const JumpMark& mark) {
  out << format_time(time);
  write_counts(out, mark.delta_e);
  write_counts(out, mark.delta_d);
  write_counts(out, mark.delta_r);
  out << '\n';
}

struct JumpLogWriter::Impl {
  std::ofstream out;
};

JumpLogWriter::JumpLogWriter(const std::string& path, const StateVector& x0)
    : impl_(std::make_unique<Impl>()) {
  impl_->out.open(path, std::ios::out | std::ios::trunc);
  if (!impl_->out) throw IoError("cannot open jump log for writing: " + path);
  write_jump_header(impl_->out, x0);
}

JumpLogWriter::~JumpLogWriter() = default;

void JumpLogWriter::write(double time, const JumpMark& mark) {
  write_jump_record(impl_->out, time, mark);
}

void JumpLogWriter::flush() {
  impl_->out.flush();
  if (!impl_->out) throw IoError("jump log write failed");
}

JumpTrace read_jump_log(std::istream& in) {
  std::string line;
  std::size_t m = 0;
  bool have_m = false;
  bool have_x0 = false;
  JumpTrace trace;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream hs(line.substr(1));
      std::string tag;
      hs >> tag;
      if (tag == "m") {
        if (!(hs >> m) || m == 0) throw IoError("jump log: bad 'm' header");
        have_m = true;
      } else if (tag == "x0") {
        if (!have_m) throw IoError("jump log: 'x0' header before 'm'");
        CountVector x0(m);
        for (auto& c : x0) {
          if (!(hs >> c)) throw IoError("jump log: short 'x0' header");
        }
        trace.x0 = StateVector(std::move(x0));
        have_x0 = true;
      }
      continue;
    }
    if (!have_m || !have_x0) throw IoError("jump log: record before header");
    std::istringstream ls(line);
    std::string time_token;
    ls >> time_token;
    JumpRecord rec;
    const char* begin = time_token.data();
    const char* end = begin + time_token.size();
    // strtod round-trips %.17g output exactly.
    char* parsed_end = nullptr;
    rec.time = std::strtod(begin, &parsed_end);
    if (parsed_end != end) {
      throw IoError("jump log: bad time on line " + std::to_string(line_no));
    }
    rec.mark = JumpMark(m);
    for (auto* v : {&rec.mark.delta_e, &rec.mark.delta_d, &rec.mark.delta_r}) {
      for (auto& c : *v) {
        if (!(ls >> c)) throw IoError("jump log: short record on line " + std::to_string(line_no));
      }
    }
    std::string extra;
    if (ls >> extra) throw IoError("jump log: trailing data on line " + std::to_string(line_no));
    trace.records.push_back(std::move(rec));
  }
  if (!have_m || !have_x0) throw IoError("jump log: missing header");
  return trace;
}

JumpTrace read_jump_log_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open jump log: " + path);
  return read_jump_log(in);
}

std::optional<std::size_t> find_conservation_violation(const StateVector& x0,
                                                       const std::vector<JumpRecord>& records) {
  const std::size_t m = x0.size();
  CountVector x(x0.counts().begin(), x0.counts().end());
  CountVector ne(m, 0), nd(m, 0), nr(m, 0);
  for (std::size_t k = 0; k < records.size(); ++k) {
    const JumpMark& mk = records[k].mark;
    if (mk.size() != m) return k;
    for (std::size_t i = 0; i < m; ++i) {
      const Count xd = x[i] + mk.delta_e[i] - mk.delta_d[i];
      if (xd < 0) return k;
      x[i] = xd + mk.delta_r[i];
      ne[i] += mk.delta_e[i];
      nd[i] += mk.delta_d[i];
      nr[i] += mk.delta_r[i];
      if (x[i] != x0[i] + ne[i] - nd[i] + nr[i]) return k;
    }
  }
  return std::nullopt;
}

}  // namespace qbal
