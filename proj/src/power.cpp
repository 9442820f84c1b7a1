#include "ics/power.hpp"

#include <cmath>

#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "ics/error.hpp"
#include "ics/simulate.hpp"

namespace ics {

void PowerScenario::validate() const {
  if (group_means.size() < 2) throw InputError("power: need at least two groups");
  for (double m : group_means)
    if (!std::isfinite(m)) throw InputError("power: group means must be finite");
  if (!(within_sd > 0.0) || !std::isfinite(within_sd))
    throw InputError("power: within_sd must be positive");
  if (n_per_group < 2) throw InputError("power: n_per_group must be at least 2");
  if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("power: alpha must lie in (0, 1)");
}

namespace {

double grand_mean(const std::vector<double>& m) {
  double s = 0.0;
  for (double v : m) s += v;
  return s / static_cast<double>(m.size());
}

double between_ss(const std::vector<double>& m) {
  const double g = grand_mean(m);
  double ss = 0.0;
  for (double v : m) ss += (v - g) * (v - g);
  return ss;
}

}  // namespace

double difference_parameter(const PowerScenario& s) {
  PowerScenario t = s;
  t.n_per_group = std::max(2, t.n_per_group);
  t.validate();
  const double k = static_cast<double>(s.group_means.size());
  return std::sqrt(between_ss(s.group_means) / (k - 1.0)) / s.within_sd;
}

double noncentrality(const PowerScenario& s) {
  s.validate();
  return s.n_per_group * between_ss(s.group_means) / (s.within_sd * s.within_sd);
}

double noncentral_f_cdf(double x, double d1, double d2, double lambda, double tol) {
  if (!(d1 > 0.0) || !(d2 > 0.0) || !(lambda >= 0.0))
    throw InputError("noncentral_f_cdf: invalid parameters");
  if (x <= 0.0) return 0.0;
  const double y = d1 * x / (d1 * x + d2);
  const double half = 0.5 * lambda;
  if (half == 0.0) return boost::math::ibeta(0.5 * d1, 0.5 * d2, y);

  auto poisson_weight = [&](double j) {
    return std::exp(-half + j * std::log(half) - std::lgamma(j + 1.0));
  };
  auto term = [&](double j) { return boost::math::ibeta(0.5 * d1 + j, 0.5 * d2, y); };

  const double mode = std::floor(half);
  double sum = 0.0, mass = 0.0;
  // Upward from the mode.
  for (double j = mode;; j += 1.0) {
    const double w = poisson_weight(j);
    sum += w * term(j);
    mass += w;
    if (1.0 - mass < tol || (j > mode + 10.0 && w < tol * 1e-3)) break;
  }
  // Downward from the mode.
  for (double j = mode - 1.0; j >= 0.0; j -= 1.0) {
    const double w = poisson_weight(j);
    sum += w * term(j);
    mass += w;
    if (1.0 - mass < tol || w < tol * 1e-3) break;
  }
  return std::min(1.0, sum);
}

double anova_power(const PowerScenario& s) {
  s.validate();
  const double k = static_cast<double>(s.group_means.size());
  const double d1 = k - 1.0;
  const double d2 = k * (s.n_per_group - 1.0);
  const double crit = boost::math::quantile(boost::math::complement(boost::math::fisher_f(d1, d2), s.alpha));
  return 1.0 - noncentral_f_cdf(crit, d1, d2, noncentrality(s));
}

int required_n(PowerScenario s, double target_power, int max_n) {
  if (!(target_power > 0.0 && target_power < 1.0))
    throw InputError("required_n: target power must lie in (0, 1)");
  s.n_per_group = 2;
  s.validate();
  for (int n = 2; n <= max_n; ++n) {
    s.n_per_group = n;
    if (anova_power(s) >= target_power) return n;
  }
  throw NumericalError("required_n: target power not reached by n = " + std::to_string(max_n));
}

MonteCarloPower monte_carlo_power(const PowerScenario& s, long replicates, std::uint64_t seed) {
  s.validate();
  if (replicates < 1) throw InputError("monte_carlo_power: replicates must be positive");
  const int k = static_cast<int>(s.group_means.size());
  const double d1 = k - 1.0;
  const double d2 = k * (s.n_per_group - 1.0);
  const double crit = boost::math::quantile(boost::math::complement(boost::math::fisher_f(d1, d2), s.alpha));
  long rejections = 0;
#pragma omp parallel for reduction(+ : rejections) schedule(static)
  for (long r = 0; r < replicates; ++r) {
    Rng rng = make_substream(seed, Stream::Replicate, static_cast<std::uint64_t>(r));
    const auto sample = simulate_power_scenario(s.group_means, s.within_sd, s.n_per_group, rng);
    std::vector<double> sum(k, 0.0), ss(k, 0.0);
    for (std::size_t t = 0; t < sample.y.size(); ++t) sum[sample.group[t]] += sample.y[t];
    double grand = 0.0;
    for (double v : sum) grand += v;
    grand /= static_cast<double>(sample.y.size());
    for (std::size_t t = 0; t < sample.y.size(); ++t) {
      const double d = sample.y[t] - sum[sample.group[t]] / s.n_per_group;
      ss[sample.group[t]] += d * d;
    }
    double between = 0.0, within = 0.0;
    for (int g = 0; g < k; ++g) {
      const double m = sum[g] / s.n_per_group;
      between += s.n_per_group * (m - grand) * (m - grand);
      within += ss[g];
    }
    const double f = (between / d1) / (within / d2);
    if (f > crit) ++rejections;
  }
  MonteCarloPower out;
  out.replicates = replicates;
  out.power = static_cast<double>(rejections) / replicates;
  out.standard_error = std::sqrt(out.power * (1.0 - out.power) / replicates);
  return out;
}

}  // namespace ics
