#include "ics/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "ics/error.hpp"

namespace ics {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

ChainDraws split(const ChainDraws& chains) {
  std::size_t n = std::numeric_limits<std::size_t>::max();
  for (const auto& c : chains) n = std::min(n, c.size());
  if (chains.empty() || n < 4) throw InputError("diagnostics need at least 4 draws per chain");
  const std::size_t half = n / 2;
  ChainDraws out;
  for (const auto& c : chains) {
    // With odd length the middle draw is dropped.
    out.emplace_back(c.begin(), c.begin() + half);
    out.emplace_back(c.begin() + (n - half), c.begin() + n);
  }
  return out;
}

double chain_mean(const std::vector<double>& c) {
  double s = 0.0;
  for (double v : c) s += v;
  return s / static_cast<double>(c.size());
}

double chain_var(const std::vector<double>& c, double m) {
  double s = 0.0;
  for (double v : c) s += (v - m) * (v - m);
  return s / static_cast<double>(c.size() - 1);
}

/// Autocovariance at `lag` with divisor n.
double autocov(const std::vector<double>& c, double m, std::size_t lag) {
  const std::size_t n = c.size();
  double s = 0.0;
  for (std::size_t t = 0; t + lag < n; ++t) s += (c[t] - m) * (c[t + lag] - m);
  return s / static_cast<double>(n);
}

bool all_identical(const ChainDraws& chains) {
  const double first = chains.front().front();
  for (const auto& c : chains)
    for (double v : c)
      if (v != first) return false;
  return true;
}

}  // namespace

double empirical_quantile(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw InputError("empirical_quantile: no draws");
  if (!(p >= 0.0 && p <= 1.0)) throw InputError("empirical_quantile: p outside [0, 1]");
  const double n = static_cast<double>(sorted.size());
  // Guard the ceiling against representation error in n * p.
  auto k = static_cast<std::size_t>(std::ceil(n * p - 1e-9));
  k = std::clamp<std::size_t>(k, 1, sorted.size());
  return sorted[k - 1];
}

double split_rhat(const ChainDraws& chains) {
  const ChainDraws s = split(chains);
  if (all_identical(s)) return kNaN;
  const std::size_t m = s.size();
  const double n = static_cast<double>(s.front().size());
  std::vector<double> means(m);
  double w = 0.0;
  for (std::size_t c = 0; c < m; ++c) {
    means[c] = chain_mean(s[c]);
    w += chain_var(s[c], means[c]);
  }
  w /= static_cast<double>(m);
  const double b = n * chain_var(means, chain_mean(means));
  if (w == 0.0) return std::numeric_limits<double>::infinity();
  const double var_plus = (n - 1.0) / n * w + b / n;
  return std::sqrt(var_plus / w);
}

double effective_sample_size(const ChainDraws& chains) {
  const ChainDraws s = split(chains);
  if (all_identical(s)) return kNaN;
  const std::size_t m = s.size();
  const std::size_t n = s.front().size();
  const double nd = static_cast<double>(n);
  std::vector<double> means(m), vars(m);
  double w = 0.0;
  for (std::size_t c = 0; c < m; ++c) {
    means[c] = chain_mean(s[c]);
    vars[c] = chain_var(s[c], means[c]);
    w += vars[c];
  }
  w /= static_cast<double>(m);
  const double b_over_n = chain_var(means, chain_mean(means));
  const double var_plus = (nd - 1.0) / nd * w + b_over_n;
  if (!(var_plus > 0.0)) return kNaN;

  auto rho_at = [&](std::size_t lag) {
    double acov = 0.0;
    for (std::size_t c = 0; c < m; ++c) acov += autocov(s[c], means[c], lag);
    acov /= static_cast<double>(m);
    return 1.0 - (w - acov) / var_plus;
  };

  // Geyer: sum of adjacent pairs while positive, made monotone.
  double tau = -1.0;
  double prev_pair = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t + 1 < n; t += 2) {
    double pair = (t == 0 ? 1.0 : rho_at(t)) + rho_at(t + 1);
    if (pair < 0.0) break;
    pair = std::min(pair, prev_pair);
    prev_pair = pair;
    tau += 2.0 * pair;
  }
  const double total = static_cast<double>(m) * nd;
  // Antithetic chains can push tau below its usual floor; cap the estimate.
  tau = std::max(tau, 1.0 / std::log10(total));
  return total / tau;
}

std::vector<double> autocorrelation(const ChainDraws& chains, int max_lag) {
  if (chains.empty()) throw InputError("autocorrelation: no chains");
  std::vector<double> out(static_cast<std::size_t>(std::max(0, max_lag)), 0.0);
  int used = 0;
  for (const auto& c : chains) {
    if (c.size() < 2) continue;
    const double m = chain_mean(c);
    const double v0 = autocov(c, m, 0);
    ++used;
    for (int k = 1; k <= max_lag; ++k) {
      const double r = v0 > 0.0 && static_cast<std::size_t>(k) < c.size()
                           ? autocov(c, m, static_cast<std::size_t>(k)) / v0
                           : (v0 > 0.0 ? 0.0 : kNaN);
      out[k - 1] += r;
    }
  }
  for (auto& v : out) v = used ? v / used : kNaN;
  return out;
}

double mcse_median(double posterior_sd, double ess) {
  if (!(ess > 0.0)) return kNaN;
  return posterior_sd * std::sqrt(std::numbers::pi / 2.0) / std::sqrt(ess);
}

}  // namespace ics
