// Acceptance suite: one PASS/FAIL line per criterion.
// Usage: acceptance [criterion numbers...]   (default: all)

#include <omp.h>

#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "../oracles.hpp"
#include "commands.hpp"
#include "ics/diagnostics.hpp"
#include "ics/inference_mcmc.hpp"
#include "ics/inference_ml.hpp"
#include "ics/marginal.hpp"
#include "ics/model.hpp"
#include "ics/power.hpp"
#include "ics/samplers.hpp"
#include "ics/simulate.hpp"
#include "ics/stats.hpp"

using namespace ics;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[1024];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

const std::vector<Family> kFamilies{Family::PLA_LMM, Family::LVD_POIS,       Family::LVD_NEGBIN,
                                    Family::VA_LMM,  Family::CIRC_HET,       Family::VA_CONDITIONAL,
                                    Family::JOINT};

// 1 ---------------------------------------------------------------------------
Verdict shifted_poisson() {
  double worst = 0.0;
  for (double mu : {0.1, 1.0, 5.0, 20.0}) {
    double total = 0.0;
    for (int n = 1; n <= 400; ++n) total += std::exp(shifted_poisson_logpmf(n, mu));
    worst = std::max(worst, std::abs(total - 1.0));
  }
  const double err = std::abs(shifted_poisson_logpmf(3, 2.0) - (-2.0 + std::log(2.0)));
  return {worst < 1e-10 && err < 1e-12,
          fmt("max |sum pmf - 1| = %.2e, |logpmf(3,2) - (-2 + ln 2)| = %.2e", worst, err)};
}

// 2 ---------------------------------------------------------------------------
Verdict joint_quadrature() {
  double worst = 0.0;
  const Dataset d = simulate_dataset(ModelSpec{Family::JOINT}, default_truth(Family::JOINT),
                                     DesignPreset::table1(), 101);
  const std::vector<std::size_t> pick{0, 25, 61};
  Dataset small;
  for (auto i : pick) small.specimens.push_back(d.specimens[i]);
  std::vector<ParamVector> points{default_truth(Family::JOINT).theta};
  ParamVector p = points[0];
  p.lambda_a = 0.6;
  p.lambda_n = -0.5;
  p.rho = 0.6;
  points.push_back(p);
  for (const auto& q : points) {
    const double ref = oracle::joint_grid_loglik(q, small);
    const double got = marginal_loglik(ModelSpec{Family::JOINT}, q, small);
    worst = std::max(worst, std::abs(got - ref) / std::abs(ref));
  }
  return {worst < 1e-6, fmt("3 specimens, 2 parameter points: max relative error %.2e", worst)};
}

// 3 ---------------------------------------------------------------------------
Verdict gradients() {
  double worst = 0.0;
  std::string where;
  for (Family f : kFamilies) {
    const ModelData data = ModelData::build(simulate_dataset(ModelSpec{f}, default_truth(f),
                                                             DesignPreset::table1(), 200 + static_cast<int>(f)));
    const auto r = oracle::check_gradient(ModelSpec{f}, default_truth(f).theta, data, 3, 300);
    if (r.worst_relative >= worst) {
      worst = r.worst_relative;
      where = family_name(f);
    }
  }
  return {worst < 1e-4, fmt("7 families x 3 points: max relative error %.2e (%s)", worst, where.c_str())};
}

// 4 ---------------------------------------------------------------------------
Verdict pla_recovery() {
  DesignPreset design;
  for (TissueType t : {TissueType::ControlEctocervix, TissueType::ControlTransformationZone,
                       TissueType::CIN2, TissueType::InvasiveCarcinoma}) {
    const auto b = DesignPreset::balanced(500, 10, t);
    design.specimens.insert(design.specimens.end(), b.specimens.begin(), b.specimens.end());
  }
  const auto truth = default_truth(Family::PLA_LMM);
  const Dataset d = simulate_dataset(truth.spec, truth, design, 404);
  const MLFit fit = fit_ml(truth.spec, ModelData::build(d));
  const double e_tau = std::abs(fit.theta_hat.tau2 / truth.theta.tau2 - 1.0);
  const double e_sig = std::abs(fit.theta_hat.sigma2 / truth.theta.sigma2 - 1.0);
  return {fit.converged && e_tau < 0.05 && e_sig < 0.05,
          fmt("2000 specimens x 10 fields: tau2 %.4f (%.2f%%), sigma2 %.4f (%.2f%%)%s",
              fit.theta_hat.tau2, 100 * e_tau, fit.theta_hat.sigma2, 100 * e_sig,
              fit.converged ? "" : ", not converged")};
}

// 5 ---------------------------------------------------------------------------
Verdict mcmc_engine() {
  std::mt19937_64 rng(55);
  std::normal_distribution<double> z(-0.8, 1.0);
  std::vector<double> y(30);
  double sum = 0.0;
  for (auto& v : y) sum += (v = z(rng));
  const double prior_prec = 0.04;
  const double post_var = 1.0 / (prior_prec + y.size());
  const double post_mean = post_var * sum;
  LogDensityFn ld = [&](const Eigen::VectorXd& x) {
    double s = -0.5 * prior_prec * x[0] * x[0];
    for (double v : y) s -= 0.5 * (v - x[0]) * (v - x[0]);
    return s;
  };
  ChainConfig cfg;
  cfg.burn_in = 5000;
  cfg.keep_iterations = 50000;
  cfg.thin = 1;
  cfg.n_chains = 4;
  cfg.seed = 5;
  std::vector<Eigen::VectorXd> inits;
  for (double s : {-3.0, -1.0, 1.0, 3.0}) inits.push_back(Eigen::VectorXd::Constant(1, s));
  const auto out = run_adaptive_metropolis(ld, inits, Eigen::VectorXd::Constant(1, 1.0), cfg);
  ChainDraws draws;
  std::vector<double> all;
  for (const auto& m : out.draws) {
    draws.emplace_back(m.col(0).data(), m.col(0).data() + m.rows());
    all.insert(all.end(), draws.back().begin(), draws.back().end());
  }
  const double m = mean(all), v = variance(all);
  const double ess = effective_sample_size(draws);
  const double se_m = std::sqrt(post_var / ess), se_v = post_var * std::sqrt(2.0 / ess);
  const bool toy = std::abs(m - post_mean) < 3 * se_m && std::abs(v - post_var) < 3 * se_v;

  // Metropolis on a discretized normal target over 7 states; the proposal
  // picks one of the other states uniformly, so every pair exchanges mass.
  const int k = 7;
  std::vector<double> pi(k);
  double zsum = 0.0;
  for (int i = 0; i < k; ++i) zsum += (pi[i] = std::exp(-0.5 * std::pow((i - 3) / 1.5, 2)));
  for (auto& p : pi) p /= zsum;
  Rng r = make_substream(77, Stream::Chain, 0);
  std::uniform_int_distribution<int> step(1, k - 1);
  std::vector<std::vector<double>> flow(k, std::vector<double>(k, 0.0));
  std::vector<double> visits(k, 0.0);
  int s = 3;
  const long n = 1000000;
  for (long t = 0; t < n; ++t) {
    const int prop = (s + step(r)) % k;
    const int next = metropolis_accept(std::log(pi[prop] / pi[s]), r) ? prop : s;
    flow[s][next] += 1.0;
    visits[s] += 1.0;
    s = next;
  }
  double worst_flow = 0.0, worst_freq = 0.0;
  for (int i = 0; i < k; ++i) {
    worst_freq = std::max(worst_freq, std::abs(visits[i] / n - pi[i]));
    for (int j = i + 1; j < k; ++j) {
      const double a = flow[i][j] / n, b = flow[j][i] / n;
      worst_flow = std::max(worst_flow, std::abs(a - b) / std::sqrt((a + b) / n));
    }
  }
  const bool balance = worst_flow < 4.0 && worst_freq < 0.01;
  return {toy && balance,
          fmt("toy mean %.5f vs %.5f (%.2f SE), var %.6f vs %.6f (%.2f SE); "
              "7-state flow imbalance max %.2f SE, max |freq - pi| %.4f",
              m, post_mean, std::abs(m - post_mean) / se_m, v, post_var, std::abs(v - post_var) / se_v,
              worst_flow, worst_freq)};
}

// 6 ---------------------------------------------------------------------------
ChainConfig desk_chains(std::uint64_t seed) {
  ChainConfig c;
  c.burn_in = 5000;
  c.keep_iterations = 5000;
  c.thin = 5;
  c.n_chains = 4;
  c.seed = seed;
  return c;
}

Verdict joint_recovery() {
  const int reps = 100;
  const TrueParams truth = default_truth(Family::JOINT);
  const auto names = parameter_names(truth.spec);
  const auto values = pack(truth.spec, truth.theta);
  const int np = static_cast<int>(names.size());
  std::vector<std::vector<int>> covered(reps, std::vector<int>(np, 0));
  std::vector<int> rho_negative(reps, 0), failed(reps, 0);
#pragma omp parallel for schedule(dynamic, 1)
  for (int r = 0; r < reps; ++r) {
    try {
      Rng seeds = make_substream(2024, Stream::Replicate, static_cast<std::uint64_t>(r));
      const std::uint64_t sim_seed = seeds(), chain_seed = seeds();
      const Dataset d = simulate_dataset(truth.spec, truth, DesignPreset::table1(), sim_seed);
      const FitResult fit = summarize_posterior(run_mcmc(truth.spec, PriorSpec{}, d, desk_chains(chain_seed)));
      for (int k = 0; k < np; ++k) {
        const auto& p = fit.at(names[k]);
        covered[r][k] = p.lower <= values[k] && values[k] <= p.upper;
      }
      rho_negative[r] = fit.at("rho").median < 0.0;
    } catch (const std::exception& e) {
      failed[r] = 1;
#pragma omp critical
      std::fprintf(stderr, "criterion 6 replicate %d failed: %s\n", r, e.what());
    }
  }
  bool ok = true;
  std::string detail = fmt("%d replicates, chains 5000/5000/5 x 4; coverage", reps);
  for (int k = 0; k < np; ++k) {
    int c = 0;
    for (int r = 0; r < reps; ++r) c += covered[r][k];
    ok = ok && c >= 90;
    detail += fmt(" %s=%d", names[k].c_str(), c);
  }
  int neg = 0, nfail = 0;
  for (int r = 0; r < reps; ++r) {
    neg += rho_negative[r];
    nfail += failed[r];
  }
  ok = ok && neg >= 95 && nfail == 0;
  detail += fmt("; rho median < 0 in %d", neg);
  if (nfail) detail += fmt("; %d replicate(s) failed", nfail);
  return {ok, detail};
}

// 7 ---------------------------------------------------------------------------
Verdict rho_zero_equivalence() {
  const TrueParams truth = default_truth(Family::JOINT);
  const Dataset d = simulate_dataset(truth.spec, truth, DesignPreset::table1(), 707);
  const ModelData data = ModelData::build(d);
  ChainConfig cfg = desk_chains(71);
  cfg.burn_in = 10000;
  cfg.keep_iterations = 20000;
  const FitResult joint =
      summarize_posterior(run_mcmc(ModelSpec{Family::JOINT, DeltaGrouping::Coarse, true}, PriorSpec{}, data, cfg));
  cfg.seed = 72;
  const FitResult area = summarize_posterior(run_mcmc(ModelSpec{Family::VA_LMM}, PriorSpec{}, data, cfg));
  cfg.seed = 73;
  const FitResult count = summarize_posterior(run_mcmc(ModelSpec{Family::LVD_POIS}, PriorSpec{}, data, cfg));
  bool ok = true;
  double worst = 0.0;
  std::string detail;
  for (const char* g : {"TZ", "CIN", "CARC"}) {
    const std::string b = std::string("beta_") + g;
    for (auto [jn, uni] : {std::pair{"beta_A_" + std::string(g), &area},
                           std::pair{"beta_N_" + std::string(g), &count}}) {
      const auto& x = joint.at(jn);
      const auto& u = uni->at(b);
      const double se = std::hypot(x.mcse_median, u.mcse_median);
      const double zval = std::abs(x.median - u.median) / se;
      worst = std::max(worst, zval);
      ok = ok && zval < 3.0;
      detail += fmt("%s %.4f/%.4f (%.2f SE) ", jn.c_str(), x.median, u.median, zval);
    }
  }
  return {ok, fmt("max %.2f MC SE; ", worst) + detail};
}

// 8 ---------------------------------------------------------------------------
Verdict delta_lrt() {
  const int null_reps = 500, alt_reps = 100;
  const int alt_factor = 200;
  TrueParams null_truth = default_truth(Family::CIRC_HET);
  null_truth.theta.delta = {1.0, 1.0, 1.0};
  const TrueParams alt_truth = default_truth(Family::CIRC_HET);
  std::vector<double> p_null(null_reps, std::nan(""));
  std::vector<int> reject(alt_reps, 0), bad(null_reps + alt_reps, 0);
#pragma omp parallel for schedule(dynamic, 4)
  for (int r = 0; r < null_reps + alt_reps; ++r) {
    const bool is_null = r < null_reps;
    try {
      const auto& t = is_null ? null_truth : alt_truth;
      const Dataset d = simulate_dataset(t.spec, t, DesignPreset::table1(is_null ? 1 : alt_factor),
                                         make_substream(808, Stream::Replicate, r)());
      const auto rep = delta_equality_test(ModelData::build(d), DeltaGrouping::Coarse);
      if (!rep.general.converged || !rep.constrained.converged) bad[r] = 1;
      if (is_null)
        p_null[r] = rep.test.p_value;
      else
        reject[r - null_reps] = rep.test.p_value < 0.05;
    } catch (const std::exception& e) {
      bad[r] = 1;
#pragma omp critical
      std::fprintf(stderr, "criterion 8 replicate %d failed: %s\n", r, e.what());
    }
  }
  int nbad = 0, nrej = 0;
  for (int b : bad) nbad += b;
  for (int v : reject) nrej += v;
  const auto ks = ks_uniform_test(p_null);
  const double rate = static_cast<double>(nrej) / alt_reps;
  return {ks.p_value > 0.01 && rate > 0.80 && nbad == 0,
          fmt("null: %d replicates, KS D = %.4f, p = %.3f; delta = (0.85, 0.98, 0.91) at %dx the "
              "study design: rejection %.2f over %d replicates; %d non-converged",
              null_reps, ks.statistic, ks.p_value, alt_factor, rate, alt_reps, nbad)};
}

// 9 ---------------------------------------------------------------------------
Verdict power() {
  PowerScenario s;
  s.group_means = {2.6, 5.0, 10.0};
  s.within_sd = 7.5;
  s.n_per_group = 25;
  s.alpha = 0.05;
  const double p = anova_power(s);
  const double dpar = difference_parameter(s);
  const auto mc = monte_carlo_power(s, 100000, 909);
  const bool ok = p >= 0.88 && p <= 0.92 && std::abs(mc.power - p) < 0.005 && std::abs(dpar - 0.504) <= 0.001;
  return {ok, fmt("power %.4f, Monte Carlo %.4f (SE %.4f, 1e5 replicates), difference parameter %.4f",
                  p, mc.power, mc.standard_error, dpar)};
}

// 10 --------------------------------------------------------------------------
std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "ics");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  return cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
}

Verdict determinism() {
  const fs::path root = fs::path(ICS_TEST_TMP) / "determinism";
  fs::remove_all(root);
  const std::vector<std::string> threads{"1", "2", "1", "4"};
  std::vector<std::map<std::string, std::string>> runs;
  bool codes = true;
  for (std::size_t i = 0; i < threads.size(); ++i) {
    const fs::path dir = root / ("run" + std::to_string(i));
    fs::create_directories(dir);
    codes &= cli({"simulate", "--seed", "31", "--out-dir", dir.string(), "--threads", threads[i]}) == 0;
    codes &= cli({"fit", "--method", "mcmc", "--family", "joint", "--seed", "32", "--burn-in", "2000",
                  "--keep", "2000", "--thin", "2", "--chains", "4", "--out-dir", dir.string(),
                  "--threads", threads[i]}) == 0;
    std::map<std::string, std::string> files;
    for (auto f : {"fields.csv", "vessels.csv", "truth.json", "summary_joint.json", "draws_joint.csv",
                   "diagnostics_joint.txt"})
      files[f] = slurp(dir / f);
    runs.push_back(std::move(files));
  }
  int mismatches = 0;
  for (std::size_t i = 1; i < runs.size(); ++i)
    for (const auto& [name, body] : runs[0]) mismatches += runs[i].at(name) != body || body.empty();
  omp_set_num_threads(omp_get_num_procs());
  return {codes && mismatches == 0,
          fmt("%zu runs (threads 1, 2, 1, 4), 6 output files each: %d mismatching file(s)%s", runs.size(),
              mismatches, codes ? "" : ", a command failed")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"shifted-Poisson pmf", shifted_poisson},
      {"joint quadrature vs dense grid", joint_quadrature},
      {"gradients vs central differences", gradients},
      {"PLA ML consistency", pla_recovery},
      {"MCMC engine validation", mcmc_engine},
      {"joint-model parameter recovery", joint_recovery},
      {"rho = 0 equivalence", rho_zero_equivalence},
      {"delta LRT calibration", delta_lrt},
      {"power reproduction", power},
      {"determinism", determinism},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failures += !v.pass;
    std::printf("%s criterion %d (%s): %s [%.1f s]\n", v.pass ? "PASS" : "FAIL", id,
                criteria[i].first.c_str(), v.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
