#pragma once

#include <string>
#include <vector>

#include "ics/marginal.hpp"
#include "ics/model.hpp"
#include "ics/optimizer.hpp"

namespace ics {

struct MLOptions {
  OptimizerOptions optimizer;
  QuadratureOptions quadrature;
  double wald_level = 0.95;
};

/// Maximum-likelihood fit. Vectors are indexed by the family's canonical
/// parameter layout; parameters the design cannot identify are held at their
/// initial values and have no standard error (NaN).
struct MLFit {
  ModelSpec spec;
  ParamVector theta_hat;
  std::vector<std::string> names;
  std::vector<bool> free;
  std::vector<double> estimates;
  std::vector<double> standard_errors;  // observed information, delta method
  std::vector<double> ci_lower;         // Wald on the unconstrained scale, mapped back
  std::vector<double> ci_upper;
  double max_loglik = 0.0;
  bool converged = false;
  int iterations = 0;
  int evaluations = 0;
  double gradient_sup_norm = 0.0;
  std::string message;

  int n_free() const;
};

/// Crude moment-based starting values from group means and variances.
ParamVector initial_params(const ModelSpec& spec, const ModelData& data);

MLFit fit_ml(const ModelSpec& spec, const ModelData& data, const ParamVector& init,
             const MLOptions& opts = {});
MLFit fit_ml(const ModelSpec& spec, const Dataset& d, const ParamVector& init,
             const MLOptions& opts = {});
/// Fit from initial_params.
MLFit fit_ml(const ModelSpec& spec, const ModelData& data, const MLOptions& opts = {});

struct LrtResult {
  double statistic = 0.0;
  int df = 0;
  double p_value = 1.0;
  bool clamped = false;  // negative statistic set to 0
};

/// Likelihood-ratio test of a nested constrained fit, referred to chi^2_df.
LrtResult lrt(const MLFit& general, const MLFit& constrained, int df);
LrtResult lrt(double loglik_general, double loglik_constrained, int df);

struct OverdispersionReport {
  MLFit poisson;
  MLFit negbin;
  double delta_loglik = 0.0;  // negbin minus poisson
  double dispersion = 0.0;
  double dispersion_se = 0.0;
};

/// Fits the Poisson and negative-binomial count models and compares their
/// maximized log-likelihoods.
OverdispersionReport compare_overdispersion(const ModelData& data, const MLOptions& opts = {});
OverdispersionReport compare_overdispersion(const Dataset& d, const MLOptions& opts = {});

struct DeltaTestReport {
  MLFit general;
  MLFit constrained;
  LrtResult test;
};

/// Heteroscedastic circularity model against the all-multipliers-equal
/// special case.
DeltaTestReport delta_equality_test(const ModelData& data, DeltaGrouping grouping,
                                    const MLOptions& opts = {});

}  // namespace ics
