#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ics/rng.hpp"

namespace ics {

/// Metropolis-Hastings acceptance for a log ratio.
inline bool metropolis_accept(double log_ratio, Rng& rng) {
  if (std::isnan(log_ratio)) return false;
  if (log_ratio >= 0.0) return true;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return std::log(u(rng)) < log_ratio;
}

/// Scalar random-walk scale tuned by Robbins-Monro towards a target
/// acceptance rate while adapting; fixed once frozen.
class AdaptiveScale {
 public:
  explicit AdaptiveScale(double initial = 1.0, double target = 0.44)
      : log_scale_(std::log(initial)), target_(target) {}

  double scale() const { return std::exp(log_scale_); }
  void update(bool accepted) {
    ++tries_;
    accepts_ += accepted;
    if (frozen_) return;
    ++steps_;
    log_scale_ += ((accepted ? 1.0 : 0.0) - target_) / std::pow(steps_, 0.6);
    log_scale_ = std::clamp(log_scale_, -20.0, 5.0);
  }
  void freeze() {
    frozen_ = true;
    tries_ = accepts_ = 0;
  }
  /// Acceptance rate since the last freeze (or start).
  double acceptance() const { return tries_ ? static_cast<double>(accepts_) / tries_ : 0.0; }

 private:
  double log_scale_;
  double target_;
  double steps_ = 0.0;
  long tries_ = 0, accepts_ = 0;
  bool frozen_ = false;
};

/// Block random-walk proposal: Gaussian with the running empirical
/// covariance of the chain (plus a small ridge), scaled by an AdaptiveScale
/// with the 2.38^2 / d factor folded in. Adaptation stops at freeze().
class AdaptiveBlockProposal {
 public:
  AdaptiveBlockProposal(Eigen::VectorXd initial_sd, double target = 0.234);

  int dim() const { return static_cast<int>(mean_.size()); }
  Eigen::VectorXd propose(const Eigen::VectorXd& x, Rng& rng) const;
  /// Record the current state after an accept/reject decision.
  void update(const Eigen::VectorXd& x, bool accepted);
  void freeze() { scale_.freeze(); frozen_ = true; }
  double acceptance() const { return scale_.acceptance(); }

 private:
  void refresh_factor();

  Eigen::VectorXd initial_sd_;
  Eigen::VectorXd mean_;
  Eigen::MatrixXd m2_;
  Eigen::MatrixXd factor_;
  double count_ = 0.0;
  long since_refresh_ = 0;
  AdaptiveScale scale_;
  bool frozen_ = false;
};

struct ChainConfig {
  long burn_in = 50000;
  long keep_iterations = 50000;
  long thin = 20;
  int n_chains = 4;
  std::uint64_t seed = 1;
  double target_scalar = 0.44;
  double target_block = 0.234;
  double init_spread = 0.3;  // jitter of chain starting points, unconstrained scale

  void validate() const;
  long kept_per_chain() const { return keep_iterations / thin; }
};

/// Draws of a generic target on R^d from the adaptive block kernel, chains
/// in parallel. Returns draws[chain] as kept x d, plus acceptance rates.
struct GenericChains {
  std::vector<Eigen::MatrixXd> draws;
  std::vector<double> acceptance;
};

using LogDensityFn = std::function<double(const Eigen::VectorXd&)>;

GenericChains run_adaptive_metropolis(const LogDensityFn& log_density,
                                      const std::vector<Eigen::VectorXd>& inits,
                                      const Eigen::VectorXd& initial_sd,
                                      const ChainConfig& config);

}  // namespace ics
