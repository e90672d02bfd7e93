#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "doctest.h"
#include "qbal/errors.hpp"
#include "qbal/estimators.hpp"
#include "qbal/models.hpp"

using namespace qbal;

namespace {

RunResult simulate(const ModelSpec& spec, std::uint64_t seed, double horizon, bool full_trace = false) {
  auto model = make_model(spec, RngStream(seed));
  RunOptions o;
  o.stop.horizon = horizon;
  o.full_trace = full_trace;
  return run(*model, o);
}

NetworkConfig mm1(double lambda = 0.5, double mu = 1.0) {
  NetworkConfig n;
  n.arrivals = {ArrivalProcess::poisson(lambda)};
  n.service = {ServiceDistribution::exponential(mu)};
  n.servers = {1};
  return n;
}

NetworkConfig two_station_feedback() {
  NetworkConfig n;
  n.arrivals = {ArrivalProcess::poisson(0.4), ArrivalProcess::poisson(0.2)};
  n.service = {ServiceDistribution::exponential(2.0), ServiceDistribution::erlang(2, 3.0)};
  n.servers = {1, 2};
  n.router = std::make_shared<MarkovRouter>(std::vector<std::vector<double>>{{0.0, 0.5}, {0.3, 0.1}});
  return n;
}

std::vector<std::int32_t> i32(std::span<const Count> x) { return {x.begin(), x.end()}; }

}  // namespace

TEST_SUITE("embedded-estimators") {
  TEST_CASE("empirical pgf of three samples") {
    const std::vector<CountVector> samples{{1, 0}, {0, 2}, {1, 0}};
    const Grid grid{{0.5, 0.5}, {1.0, 1.0}};
    const auto e = empirical_pgf(samples, grid);
    CHECK(e.values[0] == doctest::Approx(5.0 / 12.0).epsilon(1e-15));
    CHECK(e.values[1] == 1.0);
    CHECK(e.standard_error[1] == 0.0);
    CHECK(e.n == 3);
    // Sample sd of (.5, .25, .5) over sqrt(3).
    const double mean = 5.0 / 12.0;
    const double var = (2 * std::pow(0.5 - mean, 2) + std::pow(0.25 - mean, 2)) / 2;
    CHECK(e.standard_error[0] == doctest::Approx(std::sqrt(var / 3)).epsilon(1e-12));
  }

  TEST_CASE("empirical pgf needs samples") {
    CHECK_THROWS_AS(empirical_pgf({}, Grid{{0.5}}), EmptyLog);
  }

  TEST_CASE("property: values lie in [0, 1] and equal 1 at the all-ones point") {
    RngStream s(4);
    std::vector<CountVector> samples;
    for (int i = 0; i < 2000; ++i) {
      samples.push_back({static_cast<Count>(s.next_u32() % 7), static_cast<Count>(s.next_u32() % 3)});
    }
    const auto e = empirical_pgf(samples, default_grid(2), StderrMode::BatchMeans, 20);
    for (std::size_t g = 0; g < e.grid.size(); ++g) {
      CHECK(e.values[g] >= 0.0);
      CHECK(e.values[g] <= 1.0);
      CHECK(e.standard_error[g] >= 0.0);
      if (e.grid[g] == std::vector<double>{1.0, 1.0}) {
        CHECK(e.values[g] == 1.0);
        CHECK(e.standard_error[g] == 0.0);
      }
    }
  }

  TEST_CASE("default grid sizes") {
    CHECK(default_grid(1).size() == 6);
    CHECK(default_grid(2).size() == 36);
    CHECK(default_grid(3).size() == 216);
    const auto g4 = default_grid(4);
    CHECK(g4.size() == kMaxGridPoints);
    CHECK(std::find(g4.begin(), g4.end(), std::vector<double>(4, 1.0)) != g4.end());
    CHECK(default_grid(4) == g4);
    CHECK(std::set<std::vector<double>>(g4.begin(), g4.end()).size() == g4.size());
    const std::vector<double> levels{0.0, 1.0};
    CHECK(tensor_grid(levels, 3).size() == 8);
  }

  TEST_CASE("M/M/1 time-average pgf at z = 0.5 agrees with (1 - rho)/(1 - rho z) = 2/3") {
    std::vector<RunResult> runs;
    for (int r = 0; r < 4; ++r) runs.push_back(simulate(mm1(), 300 + r, 5e4));
    const auto est = build_estimates(runs, {});
    const auto all = summarize(est, Grid{{0.5}});
    for (const auto& e : all) {
      CAPTURE(e.name);
      CHECK(std::abs(e.values[0] - 2.0 / 3.0) <= 4 * e.standard_error[0]);
      CHECK(e.standard_error[0] > 0.0);
    }
  }

  TEST_CASE("palm_split: singleton departures partition by queue") {
    const auto r = simulate(two_station_feedback(), 8, 2e4);
    const double t = r.end_time;
    const auto subsets = palm_split(r.samples, PalmSplitMode::ByDepartureSubset, t);
    std::set<std::uint64_t> keys;
    double w = 0;
    std::size_t n = 0;
    for (const auto& p : subsets) {
      keys.insert(p.key);
      w += p.weight;
      n += p.epochs.size();
    }
    CHECK(keys == std::set<std::uint64_t>{0b01, 0b10});
    CHECK(w == doctest::Approx(r.samples.departure_count() / t).epsilon(1e-12));
    CHECK(n == r.samples.departure_count());

    const auto queues = palm_split(r.samples, PalmSplitMode::ByDepartureQueue, t);
    CHECK(queues.size() == 2);
    const auto classes = palm_split(r.samples, PalmSplitMode::ByArrivalClass, t);
    std::size_t na = 0;
    for (const auto& p : classes) na += p.epochs.size();
    CHECK(na == r.samples.arrival_count());
  }

  TEST_CASE("palm_split: batch service K = 2 yields the single subset {1} with two departures") {
    BatchStationConfig b;
    b.batch_rate = 0.8;
    b.batch = BatchLaw::unit(1, 0);
    b.service = {ServiceDistribution::exponential(1.0)};
    b.batch_service = {2};
    const auto r = simulate(b, 2, 1e4);
    const auto parts = palm_split(r.samples, PalmSplitMode::ByDepartureSubset, r.end_time);
    REQUIRE(parts.size() == 1);
    CHECK(parts[0].key == 0b1);
    for (auto k : parts[0].epochs) REQUIRE(r.samples.y(k)[0] == 2);
  }

  TEST_CASE("palm_split: route-pair weights add up to the per-queue departure rate") {
    const auto r = simulate(two_station_feedback(), 3, 2e4);
    const double t = r.end_time;
    const std::size_t m = 2;
    const auto pairs = palm_split(r.samples, PalmSplitMode::ByRoutePair, t);
    const auto queues = palm_split(r.samples, PalmSplitMode::ByDepartureQueue, t);
    std::map<std::uint64_t, double> by_queue;
    for (const auto& p : pairs) by_queue[p.key / (m + 1)] += p.weight;
    for (const auto& q : queues) CHECK(by_queue[q.key] == doctest::Approx(q.weight).epsilon(1e-12));
  }

  TEST_CASE("partition consistency: subset mixtures reproduce the departure law cell by cell") {
    BatchStationConfig b;
    b.batch_rate = 0.5;
    b.batch = BatchLaw({{CountVector{1, 0}, 0.5}, {CountVector{0, 1}, 0.5}});
    b.service = {ServiceDistribution::exponential(2.0), ServiceDistribution::exponential(2.0)};
    b.batch_service = {2, 1};
    const auto r = simulate(b, 6, 2e4);
    const double t = r.end_time;
    std::map<std::vector<std::int32_t>, double> whole, mixed;
    for (std::size_t k = 0; k < r.samples.size(); ++k) {
      if (r.samples.kind(k) != EpochKind::Departure) continue;
      const auto x = r.samples.x(k);
      whole[{x.begin(), x.end()}] += 1.0 / r.samples.departure_count();
    }
    const double lambda_d = r.samples.departure_count() / t;
    for (const auto& p : palm_split(r.samples, PalmSplitMode::ByDepartureSubset, t)) {
      for (auto k : p.epochs) {
        const auto x = r.samples.x(k);
        mixed[{x.begin(), x.end()}] += (p.weight / lambda_d) / p.epochs.size();
      }
    }
    REQUIRE(whole.size() == mixed.size());
    for (const auto& [cell, w] : whole) CHECK(mixed.at(cell) == doctest::Approx(w).epsilon(1e-12));
  }

  TEST_CASE("transient functionals: no epochs means zeros, constant f means no increment") {
    const auto r = simulate(mm1(), 1, 1e3);
    const auto first = r.samples.time(0);
    const auto none = transient_functionals(r.samples, first / 2, test_function("min_total_10"));
    CHECK(none.re_g == 0.0);
    CHECK(none.rd_h == 0.0);
    CHECK(none.lambda_e == 0.0);
    CHECK(none.arrivals == 0);
    const auto c = transient_functionals(r.samples, r.end_time, test_function("const"));
    CHECK(c.re_g_plus - c.re_g == 0.0);
    CHECK(c.rd_h_plus - c.rd_h == 0.0);
  }

  TEST_CASE("transient relation equals (f(X(t)) - f(X(0)))/t; oracle replays the jump log") {
    const auto r = simulate(two_station_feedback(), 21, 5e3, true);
    REQUIRE(r.jump_log.complete());
    const TestFunction f{"min_total_10", [](std::span<const std::int32_t> x) {
                           double s = 0;
                           for (auto v : x) s += v;
                           return std::min(s, 10.0);
                         }};
    for (double t : {r.end_time, r.end_time / 3}) {
      // Independent replay: apply every jump up to t and accumulate the three increments.
      CountVector x(r.x0.counts().begin(), r.x0.counts().end());
      const auto f0 = f(i32(x));
      double arr = 0, routed = 0, dep = 0;
      for (const auto& rec : r.jump_log.records()) {
        if (rec.time > t) break;
        const auto res = apply_jump(StateVector(x), rec.mark);
        if (rec.mark.is_arrival()) {
          arr += f(i32(res.x_d.x_d)) - f(i32(x));
        } else {
          CountVector back = res.x_d.x_d;
          for (std::size_t i = 0; i < back.size(); ++i) back[i] += rec.mark.delta_d[i];
          routed += f(i32(res.x_post.counts())) - f(i32(res.x_d.x_d));
          dep += f(i32(back)) - f(i32(res.x_d.x_d));
        }
        x.assign(res.x_post.counts().begin(), res.x_post.counts().end());
      }
      const double oracle_lhs = (arr + routed - dep) / t;
      const double oracle_rhs = (f(i32(x)) - f0) / t;
      CHECK(std::abs(oracle_lhs - oracle_rhs) <= 1e-12);

      const auto tf = transient_functionals(r.samples, t, f);
      const double lhs = tf.lambda_e * (tf.re_g_plus - tf.re_g) + tf.lambda_d * (tf.rd_h_plus - tf.rd_h) -
                         tf.lambda_d * (tf.rd_h_minus - tf.rd_h);
      CHECK(std::abs(lhs - oracle_lhs) <= 1e-12);
      CHECK(state_at(r.samples, t) == i32(x));
    }
  }

  TEST_CASE("Cesaro check: halves of an iid series agree; a trend is detected") {
    RngStream s(2);
    std::vector<double> iid(64000), trend(64000);
    for (std::size_t k = 0; k < iid.size(); ++k) {
      iid[k] = s.uniform();
      trend[k] = iid[k] + 2.0 * k / iid.size();
    }
    const auto a = cesaro_check(iid);
    CHECK(a.n == 32000);
    CHECK(std::abs(a.difference) <= 4 * a.sigma);
    const auto b = cesaro_check(trend);
    CHECK(std::abs(b.difference) > 4 * b.sigma);
  }

  TEST_CASE("jackknife of a linear statistic equals the batch-means standard error") {
    const std::size_t B = 16;
    BatchColumns cols(B);
    std::vector<double> c(B);
    RngStream s(5);
    for (auto& v : c) v = s.uniform();
    cols.add(c);
    cols.add(std::vector<double>(B, 1.0 / B));
    const auto j = jackknife(cols, [](std::span<const double> t) { return std::pair{t[0], 0.5 * t[1]}; });
    double mean = 0;
    for (double v : c) mean += v / B;
    double ss = 0;
    for (double v : c) ss += (v - mean) * (v - mean);
    // Deleting batch b changes the total by -c_b, so the jackknife variance is (B-1)/B * sum (c_b - mean)^2.
    CHECK(j.sigma == doctest::Approx(std::sqrt((B - 1.0) / B * ss)).epsilon(1e-12));
    CHECK(j.residual == doctest::Approx(j.lhs - j.rhs));
    CHECK(j.rhs == doctest::Approx(0.5));
  }

  TEST_CASE("compensated sums and time averages") {
    CompensatedSum cs;
    cs.add(1e16);
    cs.add(1.0);
    cs.add(-1e16);
    CHECK(cs.value() == 1.0);

    TimeAverageAccumulator ta(1);
    const CountVector zero{0}, one{1};
    ta.start(0.0, zero, 0);
    ta.change(1.0, one, 0);
    ta.change(3.0, zero, 1);
    ta.finish(4.0);
    CHECK(ta.state_count() == 2);
    CHECK(ta.occupancy(0) == 2.0);
    CHECK(ta.occupancy(1) == 2.0);
    CHECK(ta.segments().size() == 3);
    CHECK(ta.total_occupancy() == ta.elapsed());
  }

  TEST_CASE("estimates export: JSON document and CSV rows") {
    const std::vector<CountVector> samples{{1}, {2}};
    const auto e = empirical_pgf(samples, default_grid(1));
    const auto doc = estimates_document({e});
    CHECK(doc["schema"] == kEstimatesSchema);
    const auto& first = doc["estimates"][0];
    CHECK(first["grid"].size() == 6);
    CHECK(first["values"].size() == 6);
    CHECK(first["stderr"].size() == 6);
    CHECK(first["n"] == 2);
    CHECK(first["values"][5] == 1.0);
    std::ostringstream os;
    write_csv(os, e);
    const auto text = os.str();
    CHECK(std::count(text.begin(), text.end(), '\n') == 7);  // header + 6 rows
  }

  TEST_CASE("warm-up removes the initial fraction and batches cover the rest") {
    const auto r = simulate(mm1(), 12, 1e4);
    const std::vector<RunResult> runs{r};
    const auto est = build_estimates(runs, {0.2, 16});
    CHECK(est.batches == 16);
    double total = 0;
    for (double d : est.duration) total += d;
    CHECK(total == doctest::Approx(0.8 * r.end_time).epsilon(1e-12));
    CHECK(est.observed_time() == doctest::Approx(total));
    CHECK(est.arrival_samples < r.samples.arrival_count());
    CHECK(est.arrivals.total() == doctest::Approx(double(est.arrival_samples)));
  }
}
