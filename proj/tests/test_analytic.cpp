#include <cmath>

#include "doctest.h"
#include "qbal/analytic.hpp"
#include "qbal/errors.hpp"
#include "qbal/rng.hpp"

using namespace qbal;

namespace {

TransformContext two_queue_polling() {
  PollingConfig p;
  p.arrival_rates = {0.3, 0.4};
  p.service = {ServiceDistribution::deterministic(1.0), ServiceDistribution::exponential(2.0)};
  p.switchover = {ServiceDistribution::deterministic(0.2), ServiceDistribution::deterministic(0.2)};
  p.discipline = {PollingDiscipline::exhaustive(), PollingDiscipline::gated()};
  return make_transform_context(p);
}

}  // namespace

TEST_SUITE("analytic-forms") {
  TEST_CASE("sigma examples") {
    const std::vector<double> lambda{0.3, 0.4};
    CHECK(sigma(lambda, std::vector<double>{1.0, 1.0}) == 0.0);
    CHECK(sigma(lambda, std::vector<double>{0.0, 0.0}) == doctest::Approx(0.7).epsilon(1e-15));
    CHECK(sigma(std::vector<double>{1.0, 2.0}, std::vector<double>{0.5, 0.5}) == 1.5);
  }

  TEST_CASE("property: sigma is linear in z and nonincreasing in each coordinate") {
    RngStream s(17);
    const std::vector<double> lambda{0.2, 1.3, 0.5};
    for (int t = 0; t < 200; ++t) {
      std::vector<double> a(3), b(3), mix(3);
      const double w = s.uniform();
      for (int i = 0; i < 3; ++i) {
        a[i] = s.uniform();
        b[i] = s.uniform();
        mix[i] = w * a[i] + (1 - w) * b[i];
      }
      CHECK(sigma(lambda, mix) == doctest::Approx(w * sigma(lambda, a) + (1 - w) * sigma(lambda, b)).epsilon(1e-13));
      auto up = a;
      up[t % 3] = std::min(1.0, up[t % 3] + 0.1);
      CHECK(sigma(lambda, up) <= sigma(lambda, a));
      CHECK(sigma(lambda, a) >= 0.0);
    }
  }

  TEST_CASE("beta is the service LST at Sigma(z)") {
    const auto ctx = two_queue_polling();
    const std::vector<double> z{0.5, 0.25};
    const double s = 0.3 * 0.5 + 0.4 * 0.75;
    CHECK(beta(ctx, 0, z) == doctest::Approx(std::exp(-s)).epsilon(1e-14));
    CHECK(beta(ctx, 1, z) == doctest::Approx(2.0 / (2.0 + s)).epsilon(1e-14));
    CHECK(beta(ctx, 0, std::vector<double>{1.0, 1.0}) == 1.0);
  }

  TEST_CASE("cycle constants: E C = s/(1 - rho), gamma_i = 1/(lambda_i E C)") {
    const auto ctx = two_queue_polling();
    const double rho = 0.3 * 1.0 + 0.4 * 0.5;
    CHECK(ctx.rho() == doctest::Approx(rho).epsilon(1e-12));
    CHECK(ctx.mean_cycle() == doctest::Approx(0.4 / (1 - rho)).epsilon(1e-12));
    CHECK(ctx.gamma(0) == doctest::Approx((1 - rho) / (0.3 * 0.4)).epsilon(1e-12));
    CHECK(ctx.gamma(1) == doctest::Approx((1 - rho) / (0.4 * 0.4)).epsilon(1e-12));
  }

  TEST_CASE("traffic equations: solution, residual, divergence") {
    const std::vector<double> lambda{1.0, 0.0};
    const std::vector<std::vector<double>> p{{0.0, 0.5}, {0.5, 0.0}};
    const auto big = solve_traffic(lambda, p);
    // Λ1 = 1 + Λ2/2, Λ2 = Λ1/2  =>  Λ1 = 4/3, Λ2 = 2/3.
    CHECK(big[0] == doctest::Approx(4.0 / 3.0).epsilon(1e-14));
    CHECK(big[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
    CHECK(traffic_residual(lambda, p, big) <= 1e-12);
    CHECK(traffic_residual(lambda, p, std::vector<double>{1.0, 0.5}) == doctest::Approx(0.25));
    CHECK_THROWS_AS(solve_traffic(lambda, {{0.0, 1.0}, {1.0, 0.0}}), NonConvergent);
    CHECK_THROWS_AS(solve_traffic(lambda, {{0.5}}), InvalidParameter);
  }

  TEST_CASE("routing pgf and exit probabilities") {
    TransformContext ctx;
    ctx.lambda = {1.0, 0.0};
    ctx.service = {ServiceDistribution::exponential(3.0), ServiceDistribution::exponential(3.0)};
    ctx.routing = {{0.0, 0.5}, {0.25, 0.25}};
    CHECK(ctx.exit_probability(0) == 0.5);
    CHECK(ctx.exit_probability(1) == 0.5);
    const std::vector<double> z{0.2, 0.6};
    CHECK(ctx.routing_pgf(0, z) == doctest::Approx(0.5 + 0.3).epsilon(1e-15));
    CHECK(ctx.routing_pgf(1, z) == doctest::Approx(0.5 + 0.05 + 0.15).epsilon(1e-15));
    CHECK(ctx.routing_pgf(1, std::vector<double>{1.0, 1.0}) == 1.0);
  }

  TEST_CASE("polling formula at the all-ones point is 1; strict mode raises") {
    const auto ctx = two_queue_polling();
    const std::vector<double> ones{1.0, 1.0}, v{1.0, 1.0};
    CHECK(polling_L_formula(ctx, v, v, ones) == 1.0);
    PollingFormulaOptions strict;
    strict.limit_mode = false;
    CHECK_THROWS_AS(polling_L_formula(ctx, v, v, ones, {}, strict), SingularPoint);
    CHECK_THROWS_AS(polling_L_formula(ctx, std::vector<double>{1.0}, v, ones), InvalidParameter);
  }

  TEST_CASE("one exhaustive queue with vacations matches the M/G/1 decomposition") {
    // Exhaustive single queue: empty at visit completion, so V^c = 1 and V^b(z) = S~(lambda(1 - z)).
    // Oracle: M/G/1 pgf times the equilibrium vacation pgf.
    for (const auto& svc : {ServiceDistribution::exponential(2.0), ServiceDistribution::deterministic(0.8),
                            ServiceDistribution::erlang(3, 5.0)}) {
      for (const auto& vac : {ServiceDistribution::deterministic(0.5), ServiceDistribution::uniform(0.1, 0.9)}) {
        PollingConfig p;
        const double lambda = 0.7;
        p.arrival_rates = {lambda};
        p.service = {svc};
        p.switchover = {vac};
        p.discipline = {PollingDiscipline::exhaustive()};
        const auto ctx = make_transform_context(p);
        const double rho = lambda * svc.mean();
        for (double z : {0.0, 0.1, 0.35, 0.6, 0.85, 0.99}) {
          const double u = lambda * (1 - z);
          const double b = svc.lst(u);
          const double mg1 = (1 - rho) * (1 - z) * b / (b - z);
          const double residual_vacation = (1 - vac.lst(u)) / (vac.mean() * u);
          const std::vector<double> vb{vac.lst(u)}, vc{1.0}, zz{z};
          CAPTURE(svc.describe());
          CAPTURE(z);
          CHECK(polling_L_formula(ctx, vb, vc, zz) == doctest::Approx(mg1 * residual_vacation).epsilon(1e-12));
        }
      }
    }
  }

  TEST_CASE("near-singular terms use the service-begin substitution") {
    // Pick z_1 equal to B~_1(Sigma(z)) exactly; the term becomes S^b_1 (1 - B~_1) / (gamma_1 Sigma).
    const auto ctx = two_queue_polling();
    const double z2 = 0.5;
    // Fixed point z1 = exp(-(0.3 (1 - z1) + 0.2)) for deterministic service 1.
    double z1 = 0.5;
    for (int it = 0; it < 200; ++it) z1 = std::exp(-(0.3 * (1 - z1) + 0.4 * (1 - z2)));
    const std::vector<double> z{z1, z2}, vb{0.9, 0.8}, vc{0.7, 0.95}, sb{0.6, 0.5};
    const double s = sigma(ctx, z);
    const double b1 = ctx.service[0].lst(s), b2 = ctx.service[1].lst(s);
    REQUIRE(std::abs(z1 - b1) < 1e-12);
    const double expected =
        (sb[0] * (1 - b1) / (ctx.gamma(0) * s) + (vc[0] - vb[1]) / s +
         (vb[1] - vc[1]) / s * z2 * (1 - b2) / (z2 - b2) + (vc[1] - vb[0]) / s) /
        ctx.mean_cycle();
    CHECK(polling_L_formula(ctx, vb, vc, z, sb) == doctest::Approx(expected).epsilon(1e-12));
    CHECK_THROWS_AS(polling_L_formula(ctx, vb, vc, z), SingularPoint);
  }
}
