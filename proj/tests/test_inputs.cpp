#include <array>
#include <cmath>
#include <set>

#include "doctest.h"
#include "qbal/distributions.hpp"
#include "qbal/errors.hpp"
#include "qbal/rng.hpp"

using namespace qbal;

namespace {

std::vector<ServiceDistribution> catalog() {
  return {ServiceDistribution::exponential(2.0), ServiceDistribution::erlang(3, 4.0),
          ServiceDistribution::deterministic(0.7), ServiceDistribution::uniform(0.2, 1.4),
          ServiceDistribution::hyperexponential({0.3, 0.7}, {0.5, 4.0})};
}

// Analytic moments computed here from the parameters, independently of the library.
struct Moments {
  double m1, m2;
};

Moments oracle_moments(const ServiceDistribution& d) {
  switch (d.kind()) {
    case DistributionKind::Exponential: {
      const double mu = d.rates()[0];
      return {1 / mu, 2 / (mu * mu)};
    }
    case DistributionKind::Erlang: {
      const double k = d.shape(), mu = d.rates()[0];
      return {k / mu, k * (k + 1) / (mu * mu)};
    }
    case DistributionKind::Deterministic:
      return {d.lo(), d.lo() * d.lo()};
    case DistributionKind::Uniform: {
      const double a = d.lo(), b = d.hi();
      return {(a + b) / 2, (a * a + a * b + b * b) / 3};
    }
    case DistributionKind::Hyperexponential: {
      double m1 = 0, m2 = 0;
      for (std::size_t j = 0; j < d.weights().size(); ++j) {
        m1 += d.weights()[j] / d.rates()[j];
        m2 += 2 * d.weights()[j] / (d.rates()[j] * d.rates()[j]);
      }
      return {m1, m2};
    }
  }
  return {0, 0};
}

}  // namespace

TEST_SUITE("stochastic-inputs") {
  TEST_CASE("Philox4x32-10 known-answer vectors") {
    using A4 = std::array<std::uint32_t, 4>;
    using A2 = std::array<std::uint32_t, 2>;
    CHECK(philox4x32(A4{0, 0, 0, 0}, A2{0, 0}) == A4{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
    CHECK(philox4x32(A4{0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, A2{0xffffffff, 0xffffffff}) ==
          A4{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
    CHECK(philox4x32(A4{0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, A2{0xa4093822, 0x299f31d0}) ==
          A4{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
  }

  TEST_CASE("streams are reproducible and splits are distinct") {
    RngStream a(99), b(99);
    for (int i = 0; i < 1000; ++i) REQUIRE(a.next_u64() == b.next_u64());

    const RngStream root(5);
    auto c1 = root.split(1), c1b = root.split(1), c2 = root.split(2);
    CHECK(c1.lineage() == std::vector<std::uint32_t>{1});
    std::set<std::uint64_t> seen;
    for (int i = 0; i < 100; ++i) {
      const auto v = c1.next_u64();
      REQUIRE(v == c1b.next_u64());
      seen.insert(v);
    }
    int shared = 0;
    for (int i = 0; i < 100; ++i) shared += seen.count(c2.next_u64()) ? 1 : 0;
    CHECK(shared == 0);
    CHECK(root.split(1).split(2).next_u64() != root.split(2).split(1).next_u64());
  }

  TEST_CASE("uniform draws stay in the open unit interval") {
    RngStream s(3);
    double lo = 1, hi = 0;
    for (int i = 0; i < 100000; ++i) {
      const double u = s.uniform();
      lo = std::min(lo, u);
      hi = std::max(hi, u);
    }
    CHECK(lo > 0.0);
    CHECK(hi < 1.0);
  }

  TEST_CASE("deterministic(2.5) always draws 2.5") {
    RngStream s(1);
    const auto d = ServiceDistribution::deterministic(2.5);
    for (int i = 0; i < 100; ++i) REQUIRE(d.sample(s) == 2.5);
  }

  TEST_CASE("exponential(1) mean over 1e6 draws lies in 1 +- 0.004") {
    RngStream s(2024);
    const auto d = ServiceDistribution::exponential(1.0);
    double sum = 0;
    for (int i = 0; i < 1000000; ++i) sum += d.sample(s);
    CHECK(std::abs(sum / 1e6 - 1.0) < 0.004);
  }

  TEST_CASE("erlang(2, rate 4) mean over 1e6 draws is near 0.5") {
    RngStream s(7);
    const auto d = ServiceDistribution::erlang(2, 4.0);
    double sum = 0;
    for (int i = 0; i < 1000000; ++i) sum += d.sample(s);
    // sd = sqrt(2)/4, so 3 standard errors are about 0.00106.
    CHECK(std::abs(sum / 1e6 - 0.5) < 0.0011);
  }

  TEST_CASE("property: sample moments match analytic moments within 4 standard errors") {
    for (const auto& d : catalog()) {
      CAPTURE(d.describe());
      const auto mo = oracle_moments(d);
      CHECK(d.mean() == doctest::Approx(mo.m1).epsilon(1e-12));
      CHECK(d.second_moment() == doctest::Approx(mo.m2).epsilon(1e-12));
      RngStream s(11);
      const int n = 1000000;
      double s1 = 0, s2 = 0, s3 = 0, s4 = 0;
      for (int i = 0; i < n; ++i) {
        const double x = d.sample(s);
        REQUIRE(x >= 0.0);
        s1 += x;
        s2 += x * x;
        s3 += x * x * x;
        s4 += x * x * x * x;
      }
      const double m1 = s1 / n, m2 = s2 / n;
      const double se1 = std::sqrt(std::max(m2 - m1 * m1, 0.0) / n);
      const double se2 = std::sqrt(std::max(s4 / n - m2 * m2, 0.0) / n);
      CHECK(std::abs(m1 - mo.m1) <= 4 * se1 + 1e-12);
      CHECK(std::abs(m2 - mo.m2) <= 4 * se2 + 1e-12);
    }
  }

  TEST_CASE("lst closed forms") {
    CHECK(ServiceDistribution::exponential(2.0).lst(1.0) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(ServiceDistribution::deterministic(1.0).lst(std::log(2.0)) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(ServiceDistribution::erlang(3, 2.0).lst(1.0) == doctest::Approx(std::pow(2.0 / 3.0, 3)).epsilon(1e-14));
    CHECK(ServiceDistribution::uniform(1.0, 3.0).lst(0.5) ==
          doctest::Approx((std::exp(-0.5) - std::exp(-1.5)) / (0.5 * 2.0)).epsilon(1e-14));
    CHECK(ServiceDistribution::uniform(1.0, 3.0).lst(1e-14) == doctest::Approx(1.0).epsilon(1e-12));
    for (const auto& d : catalog()) CHECK(d.lst(0.0) == 1.0);
  }

  TEST_CASE("lst_past closed forms") {
    const double mu = 3.0;
    for (double s : {0.01, 0.5, 2.0, 40.0}) {
      CHECK(ServiceDistribution::exponential(mu).lst_past(s) == doctest::Approx(mu / (mu + s)).epsilon(1e-13));
    }
    CHECK(ServiceDistribution::deterministic(1.0).lst_past(1.0) == doctest::Approx(1 - std::exp(-1.0)).epsilon(1e-14));
    CHECK(std::abs(ServiceDistribution::deterministic(1.0).lst_past(1.0) - 0.63212) < 1e-5);
    for (const auto& d : catalog()) {
      CHECK(d.lst_past(0.0) == 1.0);
      CHECK(d.lst_past(1e-12) == doctest::Approx(1.0).epsilon(1e-9));
    }
  }

  TEST_CASE("property: lst is nonincreasing and convex; past-part identity holds to 1e-12") {
    for (const auto& d : catalog()) {
      CAPTURE(d.describe());
      std::vector<double> v;
      for (int k = 0; k < 100; ++k) {
        const double s = 0.05 * k;
        v.push_back(d.lst(s));
        if (s > 0) CHECK(std::abs(d.lst_past(s) * d.mean() * s + d.lst(s) - 1.0) <= 1e-12);
        CHECK(d.one_minus_lst(s) == doctest::Approx(1.0 - d.lst(s)).epsilon(1e-12));
      }
      for (std::size_t k = 1; k < v.size(); ++k) CHECK(v[k] <= v[k - 1]);
      for (std::size_t k = 1; k + 1 < v.size(); ++k) CHECK(v[k - 1] - 2 * v[k] + v[k + 1] >= -1e-14);
    }
  }

  TEST_CASE("invalid parameters are rejected") {
    CHECK_THROWS_AS(ServiceDistribution::exponential(0.0), InvalidParameter);
    CHECK_THROWS_AS(ServiceDistribution::erlang(0, 1.0), InvalidParameter);
    CHECK_THROWS_AS(ServiceDistribution::deterministic(-1.0), InvalidParameter);
    CHECK_THROWS_AS(ServiceDistribution::uniform(2.0, 1.0), InvalidParameter);
    CHECK_THROWS_AS(ServiceDistribution::hyperexponential({0.5, 0.6}, {1.0, 2.0}), InvalidParameter);
  }

  TEST_CASE("batch pgf examples") {
    const auto unit = BatchLaw::unit(1, 0);
    const std::vector<double> z03{0.3};
    CHECK(unit.pgf(z03) == doctest::Approx(0.3).epsilon(1e-15));
    const BatchLaw law({{CountVector{1, 0}, 0.5}, {CountVector{0, 2}, 0.5}});
    const std::vector<double> half{0.5, 0.5}, ones{1.0, 1.0};
    CHECK(law.pgf(half) == 0.375);
    CHECK(law.pgf(ones) == 1.0);
    CHECK(law.marginal_means() == std::vector<double>{0.5, 1.0});
    CHECK(law.marginal_pgf(1, 0.5) == doctest::Approx(0.625));
  }

  TEST_CASE("batch laws must be normalized and carry no empty batch") {
    CHECK_THROWS_AS(BatchLaw({{CountVector{1}, 0.5}, {CountVector{2}, 0.4}}), InvalidParameter);
    CHECK_THROWS_AS(BatchLaw({{CountVector{0, 0}, 1.0}}), InvalidParameter);
    CHECK_THROWS_AS(BatchLaw({{CountVector{1, 0}, 0.5}, {CountVector{1}, 0.5}}), InvalidParameter);
  }

  TEST_CASE("batch sampling frequencies match the law") {
    const BatchLaw law({{CountVector{1, 0}, 0.25}, {CountVector{0, 2}, 0.75}});
    RngStream s(8);
    int first = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) first += law.sample(s)[0] == 1 ? 1 : 0;
    CHECK(std::abs(first / double(n) - 0.25) < 4 * std::sqrt(0.25 * 0.75 / n));
  }

  TEST_CASE("monomial uses 0^0 = 1") {
    const std::vector<double> z{0.0, 0.5};
    const CountVector x0{0, 2}, x1{1, 0};
    CHECK(monomial(z, x0) == 0.25);
    CHECK(monomial(z, x1) == 0.0);
  }
}
