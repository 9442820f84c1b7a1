#include <doctest.h>

#include <cmath>
#include <random>

#include "ics/diagnostics.hpp"
#include "ics/error.hpp"
#include "ics/inference_mcmc.hpp"
#include "ics/stats.hpp"

using namespace ics;

namespace {

ChainDraws ar1_chains(int chains, int n, double phi, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  ChainDraws out(static_cast<std::size_t>(chains));
  const double sd = std::sqrt(1.0 - phi * phi);
  for (auto& c : out) {
    double x = z(rng);
    for (int t = 0; t < n; ++t) {
      x = phi * x + sd * z(rng);
      c.push_back(x);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("empirical quantiles use the inverse ECDF") {
  const std::vector<double> s{-1.0, 0.0, 1.0};
  CHECK(empirical_quantile(s, 0.5) == 0.0);
  CHECK(empirical_quantile(s, 0.025) == -1.0);
  CHECK(empirical_quantile(s, 0.975) == 1.0);
  CHECK(empirical_quantile(s, 0.0) == -1.0);
  CHECK(empirical_quantile(s, 1.0) == 1.0);
  const std::vector<double> four{1.0, 2.0, 3.0, 4.0};
  CHECK(empirical_quantile(four, 0.5) == 2.0);
  CHECK(empirical_quantile(four, 0.51) == 3.0);
}

TEST_CASE("effective sample size of an AR(1) chain") {
  const double phi = 0.5;
  const auto chains = ar1_chains(4, 25000, phi, 11);
  const double n = 4.0 * 25000.0;
  const double expected = (1.0 - phi) / (1.0 + phi);
  const double ratio = effective_sample_size(chains) / n;
  CHECK(std::abs(ratio - expected) < 0.15 * expected);
  const auto acf = autocorrelation(chains, 5);
  REQUIRE(acf.size() == 5);
  CHECK(std::abs(acf[0] - phi) < 0.02);
  CHECK(std::abs(acf[1] - phi * phi) < 0.02);
  CHECK(split_rhat(chains) < 1.01);
}

TEST_CASE("R-hat flags chains stuck in separate modes") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> z(0.0, 0.3);
  ChainDraws chains(2);
  for (int t = 0; t < 2000; ++t) {
    chains[0].push_back(-3.0 + z(rng));
    chains[1].push_back(3.0 + z(rng));
  }
  CHECK(split_rhat(chains) > 1.5);
  const auto d = diagnose_draws(chains);
  CHECK(d.rhat > 1.01);
}

TEST_CASE("single chain uses the split rule") {
  const auto one = ar1_chains(1, 4000, 0.2, 3);
  const double r = split_rhat(one);
  CHECK(std::isfinite(r));
  CHECK(r < 1.01);
  ChainDraws trend(1);
  for (int t = 0; t < 1000; ++t) trend[0].push_back(t * 0.01);
  CHECK(split_rhat(trend) > 1.5);
  CHECK_THROWS_AS(split_rhat(ChainDraws{{1.0, 2.0, 3.0}}), InputError);
}

TEST_CASE("constant draws are degenerate") {
  const ChainDraws flat(3, std::vector<double>(100, 2.5));
  CHECK(std::isnan(split_rhat(flat)));
  CHECK(std::isnan(effective_sample_size(flat)));
  CHECK(diagnose_draws(flat).degenerate);
}

TEST_CASE("Monte Carlo error of the median") {
  CHECK(mcse_median(2.0, 400.0) == doctest::Approx(2.0 * std::sqrt(std::acos(-1.0) / 2.0) / 20.0));
}

TEST_CASE("Kolmogorov distribution and the uniformity test") {
  CHECK(kolmogorov_sf(1.0) == doctest::Approx(0.26999967167735456).epsilon(1e-10));
  CHECK(kolmogorov_sf(0.5) == doctest::Approx(0.9639452436648751).epsilon(1e-10));
  CHECK(kolmogorov_sf(0.1) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(kolmogorov_sf(3.0) < 1e-7);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> x, y;
  for (int i = 0; i < 500; ++i) {
    const double v = u(rng);
    x.push_back(v);
    y.push_back(v * v);
  }
  CHECK(ks_uniform_test(x).p_value > 0.01);
  CHECK(ks_uniform_test(y).p_value < 1e-6);
  const auto tiny = ks_uniform_test({0.5});
  CHECK(tiny.statistic == doctest::Approx(0.5));
}
