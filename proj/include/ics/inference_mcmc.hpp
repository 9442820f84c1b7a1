#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ics/diagnostics.hpp"
#include "ics/model.hpp"
#include "ics/samplers.hpp"

namespace ics {

struct ParamDiagnostics {
  double ess = 0.0;
  double rhat = 0.0;
  std::vector<double> acf;  // lags 1..50
  bool degenerate = false;  // every draw identical
};

/// Kept draws of every parameter of the family's layout, natural scale, with
/// the joint model's sign convention applied to each draw.
struct ChainResult {
  ModelSpec spec;
  PriorSpec priors;
  ChainConfig config;
  std::vector<std::string> names;
  std::vector<bool> free;
  std::vector<Eigen::MatrixXd> draws;  // per chain: kept x parameters
  std::vector<std::map<std::string, double>> acceptance;  // per chain, per update
  std::vector<ParamDiagnostics> diagnostics;               // per parameter
  ParamVector initial;
  bool initialization_only = false;  // keep_iterations == 0: draws hold the start state

  int n_params() const { return static_cast<int>(names.size()); }
  /// Draws of parameter k as one vector per chain.
  ChainDraws parameter(int k) const;
  int index_of(const std::string& name) const;
};

/// Runs `config.n_chains` independent chains. Update order per iteration:
///  Gaussian outcomes: coefficients (field effects integrated out), specimen
///   effects, field effects, then each variance from its conjugate Gamma
///   conditional on the precision scale;
///  counts: block random-walk Metropolis on the coefficients, per-specimen
///   random-walk Metropolis on the effects, conjugate specimen variance plus a
///   joint rescaling move of (tau2, a), then log dispersion;
///  joint model: area block as above (loading included in the Gibbs block),
///   count block, count effects, rho by a centred and a non-centred move, and
///   loading/effect rescaling moves for both outcomes.
/// Reproducible for fixed seed and config regardless of the thread count.
ChainResult run_mcmc(const ModelSpec& spec, const PriorSpec& priors, const ModelData& data,
                     const ChainConfig& config, std::optional<ParamVector> init = std::nullopt);
ChainResult run_mcmc(const ModelSpec& spec, const PriorSpec& priors, const Dataset& d,
                     const ChainConfig& config, std::optional<ParamVector> init = std::nullopt);

/// Fills ChainResult::diagnostics.
void compute_diagnostics(ChainResult& c, int max_lag = 50);

/// Same as compute_diagnostics for bare draws.
ParamDiagnostics diagnose_draws(const ChainDraws& draws, int max_lag = 50);

struct ParamSummary {
  std::string name;
  bool free = true;
  double median = 0.0;
  double lower = 0.0;  // 2.5% empirical quantile
  double upper = 0.0;  // 97.5%
  double mean = 0.0;
  double sd = 0.0;
  double ess = 0.0;
  double rhat = 0.0;
  double mcse_median = 0.0;
  bool degenerate = false;
};

struct EffectSummary {
  std::string parameter;
  std::string group;
  double median = 0.0;  // coefficient
  double lower = 0.0;
  double upper = 0.0;
  std::optional<double> ratio_median;  // exp scale for log/logit links
  std::optional<double> ratio_lower;
  std::optional<double> ratio_upper;
  std::string phrase;
};

struct FitResult {
  ModelSpec spec;
  std::vector<ParamSummary> params;
  std::vector<EffectSummary> effects;
  int n_chains = 0;
  long draws_per_chain = 0;
  bool initialization_only = false;

  const ParamSummary& at(const std::string& name) const;
  ParamVector medians() const;
};

FitResult summarize_posterior(const ChainResult& c);

struct ParamDifference {
  std::string name;
  double joint_median = 0.0;
  double independent_median = 0.0;
  double difference = 0.0;
  double mcse = 0.0;  // combined Monte Carlo SE of the difference
};

struct PairedFit {
  FitResult joint;
  FitResult independent;  // rho fixed at 0
  std::vector<ParamDifference> differences;
};

PairedFit fit_joint_and_independent(const ModelData& data, const PriorSpec& priors,
                                    const ChainConfig& config);

struct DiagnosticFlag {
  std::string name;
  double rhat = 0.0;
  double ess = 0.0;
  std::string reason;
};

struct DiagnosticsReport {
  std::vector<DiagnosticFlag> flags;
  std::vector<std::string> names;
  std::vector<std::vector<double>> acf;  // per parameter, lags 1..50
  double rhat_threshold = 1.01;
  double ess_threshold = 400.0;

  bool ok() const { return flags.empty(); }
  std::string text() const;
};

DiagnosticsReport diagnose(const ChainResult& c, double rhat_threshold = 1.01,
                           double ess_threshold = 400.0);

struct SensitivityRun {
  double factor = 1.0;
  FitResult fit;
  double max_shift_sd = 0.0;  // largest |median change| / posterior sd vs baseline
};

/// Reruns with prior variances scaled by each factor (defaults 10 and 0.1).
std::vector<SensitivityRun> prior_sensitivity(const ModelSpec& spec, const PriorSpec& priors,
                                              const ModelData& data, const ChainConfig& config,
                                              const FitResult& baseline,
                                              const std::vector<double>& factors = {10.0, 0.1});

/// Kept draws as CSV: chain,iteration,<parameter names>.
std::string format_draws_csv(const ChainResult& c);

}  // namespace ics
