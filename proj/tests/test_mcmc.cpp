#include <doctest.h>

#include <omp.h>

#include <array>
#include <cmath>
#include <random>

#include "ics/diagnostics.hpp"
#include "ics/inference_mcmc.hpp"
#include "ics/samplers.hpp"
#include "ics/simulate.hpp"

using namespace ics;

namespace {

ChainConfig short_chains(std::uint64_t seed = 7) {
  ChainConfig c;
  c.burn_in = 1500;
  c.keep_iterations = 1500;
  c.thin = 3;
  c.n_chains = 2;
  c.seed = seed;
  return c;
}

Dataset study(Family f, std::uint64_t seed) {
  return simulate_dataset(ModelSpec{f}, default_truth(f), DesignPreset::table1(), seed);
}

bool same_draws(const ChainResult& a, const ChainResult& b) {
  if (a.draws.size() != b.draws.size()) return false;
  for (std::size_t c = 0; c < a.draws.size(); ++c)
    if (a.draws[c].rows() != b.draws[c].rows() || a.draws[c] != b.draws[c]) return false;
  return true;
}

}  // namespace

TEST_CASE("conjugate normal toy: posterior mean and variance") {
  // y_i ~ N(mu, 1), mu ~ N(0, 10^2)
  std::mt19937_64 rng(21);
  std::normal_distribution<double> z(1.7, 1.0);
  std::vector<double> y(40);
  double sum = 0.0;
  for (auto& v : y) sum += (v = z(rng));
  const double prior_prec = 0.01;
  const double post_var = 1.0 / (prior_prec + y.size());
  const double post_mean = post_var * sum;

  LogDensityFn ld = [&](const Eigen::VectorXd& x) {
    double s = -0.5 * prior_prec * x[0] * x[0];
    for (double v : y) s -= 0.5 * (v - x[0]) * (v - x[0]);
    return s;
  };
  ChainConfig cfg;
  cfg.burn_in = 5000;
  cfg.keep_iterations = 40000;
  cfg.thin = 1;
  cfg.n_chains = 4;
  cfg.seed = 3;
  std::vector<Eigen::VectorXd> inits;
  for (double s : {-2.0, 0.0, 2.0, 4.0}) inits.push_back(Eigen::VectorXd::Constant(1, s));
  const auto out = run_adaptive_metropolis(ld, inits, Eigen::VectorXd::Constant(1, 1.0), cfg);

  ChainDraws draws;
  std::vector<double> all;
  for (const auto& m : out.draws) {
    draws.emplace_back(m.col(0).data(), m.col(0).data() + m.rows());
    all.insert(all.end(), draws.back().begin(), draws.back().end());
  }
  double m = 0.0, v = 0.0;
  for (double x : all) m += x;
  m /= all.size();
  for (double x : all) v += (x - m) * (x - m);
  v /= all.size() - 1;
  const double ess = effective_sample_size(draws);
  CHECK(split_rhat(draws) < 1.01);
  CHECK(std::abs(m - post_mean) < 3.0 * std::sqrt(post_var / ess));
  CHECK(std::abs(v - post_var) < 3.0 * post_var * std::sqrt(2.0 / ess));
  for (double a : out.acceptance) {
    CHECK(a > 0.15);
    CHECK(a < 0.35);
  }
}

TEST_CASE("Metropolis kernel satisfies detailed balance on three states") {
  const std::array<double, 3> pi{0.2, 0.3, 0.5};
  Rng rng = make_substream(5, Stream::Chain, 0);
  std::uniform_int_distribution<int> other(1, 2);
  std::array<std::array<double, 3>, 3> flow{};
  std::array<double, 3> visits{};
  int s = 0;
  const long n = 600000;
  for (long t = 0; t < n; ++t) {
    const int prop = (s + other(rng)) % 3;
    const int next = metropolis_accept(std::log(pi[prop] / pi[s]), rng) ? prop : s;
    flow[s][next] += 1.0;
    visits[s] += 1.0;
    s = next;
  }
  for (int i = 0; i < 3; ++i) {
    CHECK(std::abs(visits[i] / n - pi[i]) < 0.01);
    for (int j = i + 1; j < 3; ++j) {
      // pi_i P_ij = pi_j P_ji, estimated by transition frequencies
      const double fij = flow[i][j] / n, fji = flow[j][i] / n;
      CHECK(std::abs(fij - fji) < 4.0 * std::sqrt((fij + fji) / n) + 1e-12);
    }
  }
  CHECK_FALSE(metropolis_accept(std::nan(""), rng));
}

TEST_CASE("adaptive scale reaches its target acceptance") {
  Rng rng = make_substream(9, Stream::Chain, 1);
  std::normal_distribution<double> z(0.0, 1.0);
  AdaptiveScale sc(0.01, 0.44);
  double x = 0.0;
  for (int t = 0; t < 20000; ++t) {
    const double y = x + sc.scale() * z(rng);
    const bool acc = metropolis_accept(-0.5 * (y * y - x * x), rng);
    if (acc) x = y;
    sc.update(acc);
  }
  sc.freeze();
  for (int t = 0; t < 20000; ++t) {
    const double y = x + sc.scale() * z(rng);
    const bool acc = metropolis_accept(-0.5 * (y * y - x * x), rng);
    if (acc) x = y;
    sc.update(acc);
  }
  CHECK(std::abs(sc.acceptance() - 0.44) < 0.03);
}

TEST_CASE("every family samples within its support") {
  for (Family f : {Family::PLA_LMM, Family::LVD_POIS, Family::LVD_NEGBIN, Family::VA_LMM,
                   Family::CIRC_HET, Family::VA_CONDITIONAL, Family::JOINT}) {
    CAPTURE(family_name(f));
    const ModelSpec spec{f};
    const auto res = run_mcmc(spec, PriorSpec{}, study(f, 30), short_chains());
    REQUIRE(res.draws.size() == 2);
    CHECK(res.draws[0].rows() == 500);
    for (std::size_t k = 0; k < res.names.size(); ++k) {
      const auto& name = res.names[k];
      CAPTURE(name);
      for (const auto& m : res.draws) {
        CHECK(m.col(static_cast<long>(k)).allFinite());
        if (name == "tau2" || name == "sigma2" || name == "nu2" || name == "dispersion" ||
            name.rfind("delta", 0) == 0)
          CHECK(m.col(static_cast<long>(k)).minCoeff() > 0.0);
        if (name == "rho") CHECK(m.col(static_cast<long>(k)).cwiseAbs().maxCoeff() < 0.95);
        if (name == "lambda_A") CHECK(m.col(static_cast<long>(k)).minCoeff() >= 0.0);
        if (name == "lambda_N") CHECK(m.col(static_cast<long>(k)).maxCoeff() <= 0.0);
      }
    }
    const FitResult fit = summarize_posterior(res);
    for (const auto& p : fit.params) {
      CAPTURE(p.name);
      CHECK(p.lower <= p.median);
      CHECK(p.median <= p.upper);
    }
  }
}

TEST_CASE("draws do not depend on the thread count") {
  const ModelData data = ModelData::build(study(Family::JOINT, 31));
  const ModelSpec spec{Family::JOINT};
  const auto a = run_mcmc(spec, PriorSpec{}, data, short_chains(4));
  const auto b = run_mcmc(spec, PriorSpec{}, data, short_chains(4));
  CHECK(same_draws(a, b));
  const int saved = omp_get_max_threads();
  omp_set_num_threads(3);
  const auto c = run_mcmc(spec, PriorSpec{}, data, short_chains(4));
  omp_set_num_threads(saved);
  CHECK(same_draws(a, c));
  const auto d = run_mcmc(spec, PriorSpec{}, data, short_chains(5));
  CHECK_FALSE(same_draws(a, d));

  const ModelSpec r0{Family::JOINT, DeltaGrouping::Coarse, true};
  const auto e = run_mcmc(r0, PriorSpec{}, data, short_chains(4));
  const auto g = run_mcmc(r0, PriorSpec{}, data, short_chains(4));
  CHECK(same_draws(e, g));
  const int rho = e.index_of("rho");
  if (rho >= 0)
    for (const auto& m : e.draws) CHECK(m.col(rho).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("zero kept iterations returns the initial state only") {
  ChainConfig cfg = short_chains();
  cfg.keep_iterations = 0;
  const auto res = run_mcmc(ModelSpec{Family::VA_LMM}, PriorSpec{}, study(Family::VA_LMM, 32), cfg);
  CHECK(res.initialization_only);
  REQUIRE(res.draws.size() == 2);
  CHECK(res.draws[0].rows() == 1);
  CHECK(summarize_posterior(res).initialization_only);
}

TEST_CASE("draws CSV and summary layout") {
  const auto res = run_mcmc(ModelSpec{Family::JOINT}, PriorSpec{}, study(Family::JOINT, 33), short_chains());
  const std::string csv = format_draws_csv(res);
  std::string header = "chain,iteration";
  for (const auto& n : res.names) header += "," + n;
  CHECK(csv.rfind(header + "\n", 0) == 0);
  long lines = 0;
  for (char ch : csv) lines += ch == '\n';
  CHECK(lines == 1 + 2 * 500);

  const FitResult fit = summarize_posterior(res);
  for (auto name : {"alpha_A", "beta_A_TZ", "beta_A_CIN", "beta_A_CARC", "lambda_A", "lambda_N", "rho",
                    "nu2", "sigma2", "alpha_N", "beta_N_TZ", "beta_N_CIN", "beta_N_CARC"})
    CHECK_NOTHROW(fit.at(name));
  CHECK_THROWS(fit.at("no_such_parameter"));
  CHECK_FALSE(fit.effects.empty());

  const auto report = diagnose(res);
  CHECK(report.names.size() == res.names.size());
  CHECK(report.text().find("rhat") != std::string::npos);
}

TEST_CASE("invalid configurations are rejected") {
  ChainConfig cfg = short_chains();
  cfg.n_chains = 0;
  CHECK_THROWS(run_mcmc(ModelSpec{Family::VA_LMM}, PriorSpec{}, study(Family::VA_LMM, 1), cfg));
  cfg = short_chains();
  cfg.thin = 0;
  CHECK_THROWS(run_mcmc(ModelSpec{Family::VA_LMM}, PriorSpec{}, study(Family::VA_LMM, 1), cfg));
  PriorSpec bad;
  bad.gamma_rate = -1.0;
  CHECK_THROWS(run_mcmc(ModelSpec{Family::VA_LMM}, bad, study(Family::VA_LMM, 1), short_chains()));
}
