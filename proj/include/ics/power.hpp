#pragma once

#include <cstdint>
#include <vector>

namespace ics {

struct PowerScenario {
  std::vector<double> group_means;
  double within_sd = 1.0;
  int n_per_group = 2;
  double alpha = 0.05;

  void validate() const;  // k >= 2, sd > 0, n >= 2, alpha in (0, 1)
};

/// SD of the group means (divisor k - 1) over the within-group SD.
double difference_parameter(const PowerScenario& s);

/// Noncentrality n * sum (mu_i - mean)^2 / sd^2 of the one-way F test.
double noncentrality(const PowerScenario& s);

/// P(F <= x) for F ~ noncentral F(d1, d2, lambda): Poisson mixture of
/// regularized incomplete beta terms summed outward from the Poisson mode
/// until the remaining Poisson mass is below `tol`.
double noncentral_f_cdf(double x, double d1, double d2, double lambda, double tol = 1e-12);

/// Power of the one-way ANOVA F test at level alpha.
double anova_power(const PowerScenario& s);

/// Smallest n_per_group (>= 2) whose power reaches target_power.
int required_n(PowerScenario s, double target_power, int max_n = 100000);

struct MonteCarloPower {
  double power = 0.0;
  double standard_error = 0.0;
  long replicates = 0;
};

/// Rejection rate of the F test on `replicates` simulated one-way samples;
/// replicate r uses substream (seed, Replicate, r).
MonteCarloPower monte_carlo_power(const PowerScenario& s, long replicates, std::uint64_t seed);

}  // namespace ics
