#pragma once

#include <vector>

namespace ics {

/// Gauss-Hermite rule for the weight exp(-x^2): nodes ascending.
struct GaussHermiteRule {
  std::vector<double> nodes;
  std::vector<double> weights;
  /// log(weight) + node^2, the factor used when integrating a density that
  /// has been re-centred and re-scaled onto the rule.
  std::vector<double> log_weight_plus_sq;
};

/// Rule with `n` nodes (Golub-Welsch). Cached per n; thread-safe.
const GaussHermiteRule& gauss_hermite(int n);

}  // namespace ics
