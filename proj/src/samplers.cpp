#include "ics/samplers.hpp"

#include "ics/error.hpp"

namespace ics {

AdaptiveBlockProposal::AdaptiveBlockProposal(Eigen::VectorXd initial_sd, double target)
    : initial_sd_(std::move(initial_sd)),
      mean_(Eigen::VectorXd::Zero(initial_sd_.size())),
      m2_(Eigen::MatrixXd::Zero(initial_sd_.size(), initial_sd_.size())),
      scale_(1.0, target) {
  factor_ = initial_sd_.asDiagonal();
}

void AdaptiveBlockProposal::refresh_factor() {
  Eigen::MatrixXd cov = m2_ / std::max(1.0, count_ - 1.0);
  const Eigen::VectorXd ridge = 1e-6 * initial_sd_.array().square();
  cov.diagonal() += ridge;
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() == Eigen::Success) factor_ = llt.matrixL();
}

Eigen::VectorXd AdaptiveBlockProposal::propose(const Eigen::VectorXd& x, Rng& rng) const {
  std::normal_distribution<double> n01(0.0, 1.0);
  Eigen::VectorXd e(x.size());
  for (Eigen::Index k = 0; k < e.size(); ++k) e[k] = n01(rng);
  const double s = scale_.scale() * 2.38 / std::sqrt(static_cast<double>(x.size()));
  return x + s * (factor_ * e);
}

void AdaptiveBlockProposal::update(const Eigen::VectorXd& x, bool accepted) {
  scale_.update(accepted);
  if (frozen_) return;
  count_ += 1.0;
  const Eigen::VectorXd delta = x - mean_;
  mean_ += delta / count_;
  m2_ += delta * (x - mean_).transpose();
  // Empirical covariance takes over once it has some support.
  if (count_ >= 200 && ++since_refresh_ >= 50) {
    since_refresh_ = 0;
    refresh_factor();
  }
}

void ChainConfig::validate() const {
  if (burn_in < 0) throw InputError("burn_in must be >= 0");
  if (keep_iterations < 0) throw InputError("keep_iterations must be >= 0");
  if (thin < 1) throw InputError("thin must be >= 1");
  if (n_chains < 1) throw InputError("n_chains must be >= 1");
  if (!(target_scalar > 0.0 && target_scalar < 1.0) || !(target_block > 0.0 && target_block < 1.0))
    throw InputError("target acceptance rates must lie in (0, 1)");
}

GenericChains run_adaptive_metropolis(const LogDensityFn& log_density,
                                      const std::vector<Eigen::VectorXd>& inits,
                                      const Eigen::VectorXd& initial_sd,
                                      const ChainConfig& config) {
  config.validate();
  if (static_cast<int>(inits.size()) != config.n_chains)
    throw InputError("one initial point per chain is required");
  GenericChains out;
  out.draws.resize(inits.size());
  out.acceptance.resize(inits.size());
  std::string error;
#pragma omp parallel for schedule(static, 1)
  for (int c = 0; c < config.n_chains; ++c) {
    Rng rng = make_substream(config.seed, Stream::Chain, static_cast<std::uint64_t>(c));
    AdaptiveBlockProposal prop(initial_sd, config.target_block);
    Eigen::VectorXd x = inits[c];
    double lp = log_density(x);
    if (!std::isfinite(lp)) {
#pragma omp critical(ics_generic_error)
      error = "log density not finite at the initial point of chain " + std::to_string(c);
      continue;
    }
    Eigen::MatrixXd kept(config.kept_per_chain(), x.size());
    long row = 0;
    const long total = config.burn_in + config.keep_iterations;
    for (long it = 0; it < total; ++it) {
      if (it == config.burn_in) prop.freeze();
      const Eigen::VectorXd y = prop.propose(x, rng);
      const double lq = log_density(y);
      const bool acc = metropolis_accept(lq - lp, rng);
      if (acc) {
        x = y;
        lp = lq;
      }
      prop.update(x, acc);
      if (it >= config.burn_in && (it - config.burn_in + 1) % config.thin == 0 && row < kept.rows())
        kept.row(row++) = x.transpose();
    }
    out.draws[c] = std::move(kept);
    out.acceptance[c] = prop.acceptance();
  }
  if (!error.empty()) throw NumericalError(error);
  return out;
}

}  // namespace ics
