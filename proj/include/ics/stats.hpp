#pragma once

#include <span>
#include <vector>

namespace ics {

/// P(X > x) for X ~ chi^2_df.
double chi2_upper_tail(double x, double df);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// One-sample Kolmogorov-Smirnov test of Uniform(0, 1). The p-value uses the
/// asymptotic Kolmogorov distribution with the small-sample correction
/// sqrt(n) + 0.12 + 0.11 / sqrt(n).
KsResult ks_uniform_test(std::vector<double> sample);

/// Survival function of the Kolmogorov distribution.
double kolmogorov_sf(double t);

double mean(std::span<const double> x);
/// Sample variance with divisor n - 1.
double variance(std::span<const double> x);

}  // namespace ics
