#include <limits>
#include <random>
#include <sstream>

#include "doctest.h"
#include "qbal/errors.hpp"
#include "qbal/jump_log.hpp"
#include "qbal/state.hpp"

using namespace qbal;

TEST_SUITE("state-core") {
  TEST_CASE("apply_jump: routed departure") {
    const StateVector x({2, 1});
    const auto r = apply_jump(x, JumpMark({0, 0}, {1, 0}, {0, 1}));
    CHECK(r.x_d.x_d == CountVector{1, 1});
    CHECK(r.x_post == StateVector({1, 2}));
  }

  TEST_CASE("apply_jump: pure batch arrival") {
    const auto r = apply_jump(StateVector({0, 0}), JumpMark::arrival({2, 1}));
    CHECK(r.x_d.x_d == CountVector{2, 1});
    CHECK(r.x_post == StateVector({2, 1}));
  }

  TEST_CASE("apply_jump: departure leaves the system") {
    const auto r = apply_jump(StateVector({1, 0}), JumpMark::departure({1, 0}, {0, 0}));
    CHECK(r.x_d.x_d == CountVector{0, 0});
    CHECK(r.x_post == StateVector({0, 0}));
  }

  TEST_CASE("apply_jump rejects a departure from an empty queue") {
    CHECK_THROWS_AS(apply_jump(StateVector({0, 3}), JumpMark::departure({1, 0}, {0, 0})), NegativeState);
  }

  TEST_CASE("marks carrying both arrivals and departures are invalid") {
    CHECK_THROWS_AS(JumpMark({1, 0}, {0, 1}, {0, 0}).validate(), InvalidParameter);
    CHECK_THROWS_AS(JumpMark({-1, 0}, {0, 0}, {0, 0}).validate(), InvalidParameter);
    CHECK_THROWS_AS(JumpMark({1}, {0, 0}, {0, 0}).validate(), InvalidParameter);
    CHECK_NOTHROW(JumpMark::departure({2, 0}, {0, 1}).validate());
  }

  TEST_CASE("classify_departure_subset returns the support of the departure vector") {
    CHECK(classify_departure_subset(JumpMark::departure({1, 0, 2}, {0, 0, 0})) == SubsetMask{0b101});
    CHECK(classify_departure_subset(JumpMark::departure({0, 1, 0}, {0, 0, 0})) == SubsetMask{0b010});
    CHECK_FALSE(classify_departure_subset(JumpMark(3)).has_value());
    CHECK_FALSE(classify_departure_subset(JumpMark::arrival({1, 0, 0})).has_value());
  }

  TEST_CASE("checked_add refuses to wrap") {
    CHECK(checked_add(2, 3) == 5);
    CHECK_THROWS_AS(checked_add(std::numeric_limits<Count>::max(), 1), StateOverflow);
  }

  TEST_CASE("property: random paths conserve mass and keep the subset partition") {
    std::mt19937_64 gen(17);
    const std::size_t m = 3;
    StateVector x(m);
    CountingLedger ledger(m);
    std::vector<JumpRecord> records;
    CountVector prev_e(m, 0), prev_d(m, 0), prev_r(m, 0);
    for (int n = 0; n < 5000; ++n) {
      JumpMark mark(m);
      if (gen() % 2 == 0 || x.total() == 0) {
        for (auto& v : mark.delta_e) v = static_cast<Count>(gen() % 3);
        if (mark.total_e() == 0) mark.delta_e[gen() % m] = 1;
      } else {
        for (std::size_t i = 0; i < m; ++i) mark.delta_d[i] = x[i] > 0 ? static_cast<Count>(gen() % (x[i] + 1)) : 0;
        if (mark.total_d() == 0) {
          for (std::size_t i = 0; i < m; ++i) {
            if (x[i] > 0) {
              mark.delta_d[i] = 1;
              break;
            }
          }
        }
        mark.delta_r[gen() % m] = static_cast<Count>(gen() % 2);
      }
      mark.validate();
      const auto r = apply_jump(x, mark);
      for (std::size_t i = 0; i < m; ++i) {
        REQUIRE(r.x_d.x_d[i] >= 0);
        REQUIRE(r.x_d.x_d[i] == r.x_post[i] - mark.delta_r[i]);
      }
      x = r.x_post;
      ledger.record(mark);
      records.push_back({static_cast<double>(n), mark});

      Count subset_total = 0;
      for (const auto& [mask, c] : ledger.subset_counts()) subset_total += c;
      REQUIRE(subset_total == ledger.simple_d());
      for (std::size_t i = 0; i < m; ++i) {
        REQUIRE(ledger.cum_e()[i] >= prev_e[i]);
        REQUIRE(ledger.cum_d()[i] >= prev_d[i]);
        REQUIRE(ledger.cum_r()[i] >= prev_r[i]);
        REQUIRE(x[i] == ledger.cum_e()[i] - ledger.cum_d()[i] + ledger.cum_r()[i]);
      }
      prev_e = ledger.cum_e();
      prev_d = ledger.cum_d();
      prev_r = ledger.cum_r();
    }
    CHECK(ledger.exclusivity_violations() == 0);
    CHECK_FALSE(find_conservation_violation(StateVector(m), records).has_value());
  }

  TEST_CASE("simple counts count instants, cumulative counts count customers") {
    CountingLedger l(2);
    l.record(JumpMark::arrival({2, 1}));
    l.record(JumpMark::arrival({0, 1}));
    l.record(JumpMark::departure({1, 1}, {0, 0}));
    CHECK(l.simple_e() == 2);
    CHECK(l.simple_e(0) == 1);
    CHECK(l.simple_e(1) == 2);
    CHECK(l.cum_e() == CountVector{2, 2});
    CHECK(l.simple_d() == 1);
    CHECK(l.subset_counts().at(0b11) == 1);

    CountingLedger other(2);
    other.record(JumpMark::departure({1, 0}, {0, 1}));
    l.merge(other);
    CHECK(l.simple_d() == 2);
    CHECK(l.cum_r() == CountVector{0, 1});
  }

  TEST_CASE("conservation replay spots a corrupted record") {
    std::vector<JumpRecord> recs{{1.0, JumpMark::arrival({1, 0})}, {2.0, JumpMark::departure({0, 1}, {0, 0})}};
    CHECK(find_conservation_violation(StateVector(2), recs) == std::optional<std::size_t>{1});
  }

  TEST_CASE("jump log files round-trip times bit-exactly") {
    std::stringstream ss;
    const StateVector x0({3, 0});
    write_jump_header(ss, x0);
    const double t1 = 0.1 + 0.2, t2 = 1.0 / 3.0 * 1e7;
    write_jump_record(ss, t1, JumpMark::arrival({0, 2}));
    write_jump_record(ss, t2, JumpMark::departure({1, 0}, {0, 1}));
    const auto trace = read_jump_log(ss);
    CHECK(trace.x0 == x0);
    REQUIRE(trace.records.size() == 2);
    CHECK(trace.records[0].time == t1);
    CHECK(trace.records[1].time == t2);
    CHECK(trace.records[1].mark == JumpMark::departure({1, 0}, {0, 1}));
  }

  TEST_CASE("malformed jump logs are rejected") {
    std::stringstream empty;
    CHECK_THROWS_AS(read_jump_log(empty), Error);
    std::stringstream bad("# qbalance-jumplog 1\n# m 1\n# x0 0\n1.0 1 0\n");
    CHECK_THROWS_AS(read_jump_log(bad), Error);
  }

  TEST_CASE("ring-buffered jump log keeps the newest records") {
    JumpLog log(4);
    for (int i = 0; i < 10; ++i) log.push(i, JumpMark::arrival({1}));
    CHECK(log.pushed() == 10);
    CHECK(log.records().size() == 4);
    CHECK(log.records().front().time == 6.0);
    CHECK_FALSE(log.complete());
    JumpLog full(4, true);
    for (int i = 0; i < 10; ++i) full.push(i, JumpMark::arrival({1}));
    CHECK(full.complete());
  }
}
