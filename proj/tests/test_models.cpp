#include <cmath>
#include <map>

#include "doctest.h"
#include "qbal/analytic.hpp"
#include "qbal/errors.hpp"
#include "qbal/estimators.hpp"
#include "qbal/models.hpp"

using namespace qbal;

namespace {

RunResult simulate(const ModelSpec& spec, std::uint64_t seed, double horizon) {
  auto model = make_model(spec, RngStream(seed));
  RunOptions o;
  o.stop.horizon = horizon;
  return run(*model, o);
}

PollingConfig two_queue_polling(PollingDiscipline d, QueueOrder order = QueueOrder::FCFS) {
  PollingConfig p;
  p.arrival_rates = {0.3, 0.4};
  p.service = {ServiceDistribution::exponential(1.0), ServiceDistribution::exponential(2.0)};
  p.switchover = {ServiceDistribution::exponential(5.0), ServiceDistribution::exponential(5.0)};
  p.discipline = {d, d};
  p.order = order;
  return p;
}

struct Visit {
  std::size_t queue;
  double begin, end;
  std::int32_t at_begin;
  int services = 0;
};

// Pairs visit-begin and visit-complete tags and counts service starts in between.
std::vector<Visit> visits(const EmbeddedSampleLog& log) {
  std::vector<Visit> out;
  std::optional<Visit> open;
  for (std::size_t k = 0; k < log.tag_count(); ++k) {
    const auto q = log.tag_queue(k);
    switch (log.tag_kind(k)) {
      case EpochTag::VisitBegin:
        REQUIRE_FALSE(open.has_value());
        open = Visit{q, log.tag_time(k), 0.0, log.tag_state(k)[q]};
        break;
      case EpochTag::ServiceBegin:
        REQUIRE(open.has_value());
        REQUIRE(open->queue == q);
        ++open->services;
        break;
      case EpochTag::VisitComplete:
        REQUIRE(open.has_value());
        REQUIRE(open->queue == q);
        open->end = log.tag_time(k);
        out.push_back(*open);
        open.reset();
        break;
    }
  }
  return out;
}

std::vector<double> mean_queue_lengths(const TimeAverageAccumulator& ta) {
  std::vector<double> m(ta.dimension(), 0.0);
  for (std::size_t id = 0; id < ta.state_count(); ++id) {
    for (std::size_t i = 0; i < m.size(); ++i) m[i] += ta.state(id)[i] * ta.occupancy(id);
  }
  for (auto& v : m) v /= ta.elapsed();
  return m;
}

}  // namespace

TEST_SUITE("model-zoo") {
  TEST_CASE("traffic equations: no feedback, one-way split, tandem with feedback") {
    const std::vector<double> lam{1.0, 0.0};
    auto L = solve_traffic(lam, {{0, 0}, {0, 0}});
    CHECK(L == std::vector<double>{1.0, 0.0});
    L = solve_traffic(lam, {{0, 0.5}, {0, 0}});
    CHECK(L[0] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(L[1] == doctest::Approx(0.5).epsilon(1e-14));
    // Λ1 = 1 + 0.5 Λ2, Λ2 = Λ1  =>  Λ1 = Λ2 = 2.
    L = solve_traffic(lam, {{0, 1.0}, {0.5, 0}});
    CHECK(L[0] == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(L[1] == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(traffic_residual(lam, {{0, 1.0}, {0.5, 0}}, L) <= 1e-10);
  }

  TEST_CASE("traffic equations without an exit are rejected") {
    CHECK_THROWS_AS(solve_traffic(std::vector<double>{1.0, 0.0}, {{0, 1.0}, {1.0, 0}}), NonConvergent);
  }

  TEST_CASE("roving network throughputs satisfy the traffic equations to 1e-10") {
    RovingNetworkConfig r;
    r.polling = two_queue_polling(PollingDiscipline::exhaustive());
    r.polling.arrival_rates = {0.1, 0.15};
    r.routing = {{0.0, 0.3}, {0.2, 0.1}};
    const auto L = solve_traffic(r);
    CHECK(traffic_residual(r.polling.arrival_rates, r.routing, L) <= 1e-10);
    CHECK(r.exit_probability(0) == doctest::Approx(0.7));
    const std::vector<double> z{0.5, 0.25};
    CHECK(r.routing_pgf(1, z) == doctest::Approx(0.7 + 0.2 * 0.5 + 0.1 * 0.25));
  }

  TEST_CASE("step_polling_server follows the discipline") {
    CHECK(step_polling_server({0, 0, 0}, PollingDiscipline::exhaustive()) == ServerAction::CompleteVisit);
    CHECK(step_polling_server({3, 5, 0}, PollingDiscipline::exhaustive()) == ServerAction::StartService);
    CHECK(step_polling_server({4, 1, 0}, PollingDiscipline::gated()) == ServerAction::CompleteVisit);
    CHECK(step_polling_server({4, 1, 2}, PollingDiscipline::gated()) == ServerAction::StartService);
    CHECK(step_polling_server({2, 0, 0}, PollingDiscipline::k_limited(1)) == ServerAction::StartService);
    CHECK(step_polling_server({2, 1, 0}, PollingDiscipline::k_limited(1)) == ServerAction::CompleteVisit);
    CHECK_THROWS_AS(PollingDiscipline::k_limited(0), InvalidParameter);
  }

  TEST_CASE("exhaustive: an empty queue at visit start completes the visit at once") {
    const auto r = simulate(two_queue_polling(PollingDiscipline::exhaustive()), 1, 2e4);
    int empty = 0;
    for (const auto& v : visits(r.samples)) {
      if (v.at_begin == 0) {
        ++empty;
        CHECK(v.services == 0);
        CHECK(v.end == v.begin);
      } else {
        CHECK(v.services >= v.at_begin);
      }
    }
    CHECK(empty > 100);
  }

  TEST_CASE("gated: customers served in a visit equal the queue length at its beginning") {
    for (auto order : {QueueOrder::FCFS, QueueOrder::LCFS}) {
      const auto r = simulate(two_queue_polling(PollingDiscipline::gated(), order), 2, 2e4);
      const auto vs = visits(r.samples);
      REQUIRE(vs.size() > 1000);
      for (const auto& v : vs) REQUIRE(v.services == v.at_begin);
    }
  }

  TEST_CASE("k-limited(1): at most one service per visit") {
    auto p = two_queue_polling(PollingDiscipline::k_limited(1));
    p.arrival_rates = {0.2, 0.2};
    const auto r = simulate(p, 3, 2e4);
    int one = 0;
    for (const auto& v : visits(r.samples)) {
      REQUIRE(v.services <= 1);
      CHECK(v.services == (v.at_begin > 0 ? 1 : 0));
      one += v.services;
    }
    CHECK(one > 1000);
  }

  TEST_CASE("polling work decomposition: busy fraction matches rho") {
    const auto p = two_queue_polling(PollingDiscipline::exhaustive());
    const std::size_t m = p.size();
    const int R = 6;
    double s = 0, s2 = 0;
    for (int rep = 0; rep < R; ++rep) {
      const auto r = simulate(p, 100 + rep, 5e4);
      const auto& ta = r.time_average;
      double busy = 0;
      for (std::size_t k = 0; k < ta.segments().size(); ++k) {
        if (ta.segments()[k].phase < static_cast<int>(m)) busy += ta.segment_end(k) - ta.segments()[k].start;
      }
      const double f = busy / ta.elapsed();
      s += f;
      s2 += f * f;
    }
    const double mean = s / R, se = std::sqrt((s2 / R - mean * mean) / (R - 1));
    CHECK(std::abs(mean - p.rho()) < 4 * se + 1e-3);
  }

  TEST_CASE("cycle constants: E C = s / (1 - rho) and gamma_i lambda_i E C = 1") {
    auto p = two_queue_polling(PollingDiscipline::gated());
    p.validate();
    CHECK(std::abs(p.mean_cycle() - p.total_switchover() / (1 - p.rho())) <= 1e-12);
    for (std::size_t i = 0; i < p.size(); ++i) CHECK(std::abs(p.gamma(i) * p.arrival_rates[i] * p.mean_cycle() - 1) <= 1e-12);
  }

  TEST_CASE("unstable or malformed configurations are rejected") {
    auto p = two_queue_polling(PollingDiscipline::exhaustive());
    p.arrival_rates = {0.8, 0.4};  // rho = 1
    CHECK_THROWS_AS(validate(ModelSpec{p}), InvalidParameter);
    LongerQueueConfig lq{{0.3, 0.3}, {ServiceDistribution::exponential(1), ServiceDistribution::exponential(1)}, {0.6, 0.6}};
    CHECK_THROWS_AS(validate(ModelSpec{lq}), InvalidParameter);
    CHECK_THROWS_AS(MarkovRouter({{0.6, 0.6}, {0, 0}}), InvalidParameter);
  }

  TEST_CASE("Markov routing: exit-only, forced, and random rows") {
    RngStream s(12);
    const MarkovRouter exit_only({{0, 0}, {0, 0}});
    const MarkovRouter forced({{0, 1.0}, {0, 0}});
    const CountVector x{0, 0};
    for (int i = 0; i < 100; ++i) {
      REQUIRE(route_departure(exit_only, 0, x, s) == CountVector{0, 0});
      REQUIRE(route_departure(forced, 0, x, s) == CountVector{0, 1});
    }
    const MarkovRouter split({{0, 0.3}, {0, 0}});
    int to2 = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) to2 += route_departure(split, 0, x, s)[1];
    CHECK(std::abs(to2 / double(n) - 0.3) < 0.0044);
  }

  TEST_CASE("shorter-queue routing looks at the post-departure state") {
    RngStream s(1);
    const ShorterQueueRouter r({{1, 2}, {}, {}});
    CHECK(r.route(0, {0, 3, 1}, s) == std::optional<std::size_t>{2});
    CHECK(r.route(0, {0, 1, 1}, s) == std::optional<std::size_t>{1});
    CHECK_FALSE(r.route(1, {0, 1, 1}, s).has_value());
    const StateDependentRouter custom([](std::size_t, const CountVector& xd, RngStream&) {
      return xd[0] > 2 ? std::optional<std::size_t>{1} : std::nullopt;
    }, "overflow");
    CHECK(route_departure(custom, 0, {3, 0}, s) == CountVector{0, 1});
    CHECK(route_departure(custom, 0, {1, 0}, s) == CountVector{0, 0});
  }

  TEST_CASE("batch service departs K customers in one epoch") {
    BatchStationConfig b;
    b.batch_rate = 0.8;
    b.batch = BatchLaw::unit(1, 0);
    b.service = {ServiceDistribution::erlang(2, 2.0)};
    b.batch_service = {2};
    const auto r = simulate(b, 5, 1e4);
    REQUIRE(r.samples.departure_count() > 100);
    for (std::size_t k = 0; k < r.samples.size(); ++k) {
      if (r.samples.kind(k) == EpochKind::Departure) REQUIRE(r.samples.y(k)[0] == 2);
    }
    CHECK(r.ledger.subset_counts().size() == 1);
  }

  TEST_CASE("non-preemptive priority: mean queue lengths match the Cobham formulas") {
    // Oracle: W_1 = R / (1 - rho_1), W_2 = R / ((1 - rho_1)(1 - rho)), R = sum lambda_i E B_i^2 / 2.
    PriorityConfig p{{0.3, 0.3}, {ServiceDistribution::exponential(1.5), ServiceDistribution::exponential(1.0)}};
    const double r1 = 0.3 / 1.5, rho = r1 + 0.3;
    const double R = 0.3 * (2 / 2.25) / 2 + 0.3 * 2.0 / 2;
    const double W1 = R / (1 - r1), W2 = R / ((1 - r1) * (1 - rho));
    const std::vector<double> oracle{0.3 * (W1 + 1 / 1.5), 0.3 * (W2 + 1.0)};
    const int reps = 8;
    std::vector<double> s(2, 0), s2(2, 0);
    for (int rep = 0; rep < reps; ++rep) {
      const auto m = mean_queue_lengths(simulate(p, 500 + rep, 5e4).time_average);
      for (int i = 0; i < 2; ++i) {
        s[i] += m[i];
        s2[i] += m[i] * m[i];
      }
    }
    for (int i = 0; i < 2; ++i) {
      const double mean = s[i] / reps, se = std::sqrt((s2[i] / reps - mean * mean) / (reps - 1));
      CAPTURE(i);
      CHECK(std::abs(mean - oracle[i]) < 4 * se);
    }
  }

  TEST_CASE("longer queue, symmetric rates and ties: the joint law is exchangeable") {
    LongerQueueConfig cfg{{0.35, 0.35}, {ServiceDistribution::exponential(1), ServiceDistribution::exponential(1)}, {0.5, 0.5}};
    std::vector<RunResult> runs;
    for (int rep = 0; rep < 4; ++rep) runs.push_back(simulate(cfg, 40 + rep, 5e4));
    const auto est = build_estimates(runs, {});
    const auto grid = default_grid(2);
    const auto L = summarize(est, grid).front();
    REQUIRE(L.name == "time_average");
    std::map<std::pair<double, double>, std::size_t> at;
    for (std::size_t g = 0; g < grid.size(); ++g) at[{grid[g][0], grid[g][1]}] = g;
    for (std::size_t g = 0; g < grid.size(); ++g) {
      const auto h = at.at({grid[g][1], grid[g][0]});
      const double tol = 4 * std::hypot(L.standard_error[g], L.standard_error[h]) + 1e-10;
      CHECK(std::abs(L.values[g] - L.values[h]) <= tol);
    }
  }

  TEST_CASE("the longer queue is served first") {
    LongerQueueConfig cfg{{0.3, 0.5}, {ServiceDistribution::exponential(1), ServiceDistribution::exponential(1)}, {0.7, 0.3}};
    const auto r = simulate(cfg, 9, 2e4);
    // A service starts right after a departure that leaves customers behind, and it
    // goes to the strictly longer queue of X^d; so the next departure comes from there.
    std::optional<std::size_t> expected;
    int checked = 0;
    for (std::size_t k = 0; k < r.samples.size(); ++k) {
      if (r.samples.kind(k) != EpochKind::Departure) continue;
      const std::size_t i = r.samples.y(k)[0] > 0 ? 0 : 1;
      if (expected) {
        REQUIRE(i == *expected);
        ++checked;
      }
      const auto xd = r.samples.x(k);
      expected.reset();
      if (xd[0] != xd[1]) expected = xd[0] > xd[1] ? 0 : 1;
    }
    CHECK(checked > 1000);
  }

  TEST_CASE("model names and dimensions") {
    CHECK(model_kind(ModelSpec{two_queue_polling(PollingDiscipline::gated())}) == "polling");
    CHECK(model_dimension(ModelSpec{two_queue_polling(PollingDiscipline::gated())}) == 2);
    CHECK(PollingDiscipline::k_limited(3).describe().find('3') != std::string::npos);
  }
}
