#include "ics/inference_mcmc.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "ics/inference_ml.hpp"
#include "ics/parameterization.hpp"

namespace ics {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double draw_normal(Rng& rng) {
  std::normal_distribution<double> n01(0.0, 1.0);
  return n01(rng);
}

double draw_gamma(double shape, double rate, Rng& rng) {
  std::gamma_distribution<double> g(shape, 1.0 / rate);
  return g(rng);
}

/// Joint-model reporting convention: lambda_A >= 0, lambda_N <= 0, with rho
/// reflected alongside either loading (both reflections are exact
/// symmetries of the likelihood).
ParamVector with_sign_convention(const ModelSpec& spec, ParamVector p) {
  if (spec.family != Family::JOINT) return p;
  if (p.lambda_a < 0.0) {
    p.lambda_a = -p.lambda_a;
    p.rho = -p.rho;
  }
  if (p.lambda_n > 0.0) {
    p.lambda_n = -p.lambda_n;
    p.rho = -p.rho;
  }
  if (spec.rho_zero) p.rho = 0.0;
  return p;
}

/// One chain's state and update kernels.
class Sampler {
 public:
  Sampler(const ModelSpec& spec, const PriorSpec& priors, const ModelData& data,
          const std::vector<bool>& free, ParamVector init, Rng rng, const ChainConfig& config)
      : spec_(spec), priors_(priors), data_(data), rng_(std::move(rng)), theta_(std::move(init)) {
    const int ns = data.n_specimens();
    const auto names = parameter_names(spec);
    auto is_free = [&](const std::string& name) {
      for (std::size_t k = 0; k < names.size(); ++k)
        if (names[k] == name) return free.empty() || free[k];
      return false;
    };
    static constexpr std::array<const char*, 3> groups{"TZ", "CIN", "CARC"};
    const std::string beta_prefix = spec.family == Family::JOINT ? "beta_A_" : "beta_";
    for (int g = 0; g < 3; ++g) {
      beta_free_[g] = is_free(beta_prefix + groups[g]);
      beta_n_free_[g] = spec.family == Family::JOINT ? is_free(std::string("beta_N_") + groups[g])
                                                      : beta_free_[g];
    }
    const auto layout = parameter_layout(spec);
    for (const auto& info : layout)
      if (info.name.rfind("delta_", 0) == 0) delta_free_.push_back(is_free(info.name));

    latent_.a.assign(ns, 0.0);
    if (spec.family == Family::JOINT) latent_.a_count.assign(ns, 0.0);
    if (spec.has_field_effect()) latent_.b.assign(data.fields.size(), 0.0);

    if (spec.has_count_outcome()) {
      const int dim = 1 + free_count(beta_n_free_) + (spec.family == Family::JOINT ? 1 : 0);
      count_block_.emplace(Eigen::VectorXd::Constant(dim, 0.05), config.target_block);
      effect_scales_.assign(ns, AdaptiveScale(0.3, config.target_scalar));
      for (const auto& f : data.fields) kappa_const_size_ += f.n - 1;
    }
  }

  void sweep() {
    switch (spec_.family) {
      case Family::PLA_LMM:
      case Family::VA_LMM:
      case Family::CIRC_HET:
      case Family::VA_CONDITIONAL:
        gaussian_coefficients();
        gaussian_effects();
        if (spec_.has_field_effect()) field_effects();
        error_variance();
        specimen_variance();
        if (spec_.has_field_effect()) field_variances();
        break;
      case Family::LVD_POIS:
      case Family::LVD_NEGBIN:
        count_coefficients();
        count_effects();
        specimen_variance();
        tau_rescale();
        if (spec_.family == Family::LVD_NEGBIN) dispersion();
        break;
      case Family::JOINT:
        gaussian_coefficients();
        gaussian_effects();
        field_effects();
        error_variance();
        field_variances();
        count_coefficients();
        count_effects();
        if (!spec_.rho_zero) {
          rho_centred();
          rho_noncentred();
        }
        loading_rescale(true);
        loading_rescale(false);
        break;
    }
  }

  void freeze() {
    if (count_block_) count_block_->freeze();
    for (auto& s : effect_scales_) s.freeze();
    tau_scale_.freeze();
    kappa_scale_.freeze();
    rho_scale_.freeze();
    rho_nc_scale_.freeze();
    area_scale_.freeze();
    count_scale_.freeze();
  }

  const ParamVector& theta() const { return theta_; }
  const LatentState& latent() const { return latent_; }

  std::map<std::string, double> acceptance() const {
    std::map<std::string, double> out;
    if (!spec_.has_count_outcome()) return out;
    out["count_block"] = count_block_->acceptance();
    double s = 0.0;
    for (const auto& e : effect_scales_) s += e.acceptance();
    out["count_effects"] = effect_scales_.empty() ? 0.0 : s / effect_scales_.size();
    if (spec_.family == Family::JOINT) {
      if (!spec_.rho_zero) {
        out["rho_centred"] = rho_scale_.acceptance();
        out["rho_noncentred"] = rho_nc_scale_.acceptance();
      }
      out["scale_area"] = area_scale_.acceptance();
      out["scale_count"] = count_scale_.acceptance();
    } else {
      out["tau_rescale"] = tau_scale_.acceptance();
      if (spec_.family == Family::LVD_NEGBIN) out["dispersion"] = kappa_scale_.acceptance();
    }
    return out;
  }

 private:
  static int free_count(const std::array<bool, 3>& f) {
    return static_cast<int>(std::count(f.begin(), f.end(), true));
  }

  double loading_area() const { return spec_.family == Family::JOINT ? theta_.lambda_a : 1.0; }
  double rho() const { return spec_.rho_zero ? 0.0 : theta_.rho; }

  GaussianObs obs(const FieldData& f) const {
    return gaussian_obs(spec_.family == Family::JOINT ? Family::VA_LMM : spec_.family, f);
  }

  // ---- Gaussian outcome -------------------------------------------------

  /// Intercept, free group effects, gamma and (joint) the area loading, drawn
  /// from their Gaussian conditional with the field effects integrated out.
  void gaussian_coefficients() {
    const bool joint = spec_.family == Family::JOINT;
    const bool cond = spec_.family == Family::VA_CONDITIONAL;
    std::vector<int> beta_cols;
    for (int g = 0; g < 3; ++g)
      if (beta_free_[g]) beta_cols.push_back(g);
    const int p = 1 + static_cast<int>(beta_cols.size()) + (cond ? 1 : 0) + (joint ? 1 : 0);
    Eigen::MatrixXd prec = Eigen::MatrixXd::Zero(p, p);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd x(p);
    for (const auto& f : data_.fields) {
      const auto o = obs(f);
      const double w = 1.0 / (field_variance(spec_, theta_, f) + theta_.sigma2 / o.n);
      int c = 0;
      x[c++] = 1.0;
      for (int g : beta_cols) x[c++] = f.group == g + 1 ? 1.0 : 0.0;
      if (cond) x[c++] = 1.0 / f.n;
      double y = o.mean;
      if (joint)
        x[c++] = latent_.a[f.specimen];
      else
        y -= latent_.a[f.specimen];
      prec.noalias() += w * x * x.transpose();
      rhs.noalias() += w * y * x;
    }
    const int n_fixed = p - (joint ? 1 : 0);
    for (int k = 0; k < n_fixed; ++k) prec(k, k) += priors_.fixed_precision;
    Eigen::LLT<Eigen::MatrixXd> llt(prec);
    if (llt.info() != Eigen::Success) return;
    const Eigen::VectorXd mean = llt.solve(rhs);
    Eigen::VectorXd draw;
    for (int attempt = 0; attempt < 100; ++attempt) {
      Eigen::VectorXd z(p);
      for (int k = 0; k < p; ++k) z[k] = draw_normal(rng_);
      draw = mean + llt.matrixU().solve(z);
      if (!joint || std::abs(draw[p - 1]) <= priors_.lambda_bound) break;
      draw.resize(0);
    }
    if (draw.size() == 0) return;  // truncation region has negligible mass; keep state
    int c = 0;
    theta_.alpha = draw[c++];
    for (int g : beta_cols) theta_.beta[g] = draw[c++];
    if (cond) theta_.gamma = draw[c++];
    if (joint) theta_.lambda_a = draw[c++];
  }

  /// Specimen effects of the Gaussian outcome, field effects integrated out.
  void gaussian_effects() {
    const double load = loading_area();
    const double r = rho();
    for (int i = 0; i < data_.n_specimens(); ++i) {
      double prior_prec, prior_mean;
      if (spec_.family == Family::JOINT) {
        prior_prec = 1.0 / (1.0 - r * r);
        prior_mean = r * latent_.a_count[i];
      } else {
        prior_prec = 1.0 / theta_.tau2;
        prior_mean = 0.0;
      }
      double sw = 0.0, swr = 0.0;
      for (int j = data_.specimen_begin[i]; j < data_.specimen_begin[i + 1]; ++j) {
        const auto& f = data_.fields[j];
        const auto o = obs(f);
        const double w = 1.0 / (field_variance(spec_, theta_, f) + theta_.sigma2 / o.n);
        sw += w;
        swr += w * (o.mean - gaussian_fixed_mean(spec_, theta_, f));
      }
      const double post_prec = prior_prec + load * load * sw;
      const double post_mean = (prior_prec * prior_mean + load * swr) / post_prec;
      latent_.a[i] = post_mean + draw_normal(rng_) / std::sqrt(post_prec);
    }
  }

  void field_effects() {
    const double load = loading_area();
    for (std::size_t j = 0; j < data_.fields.size(); ++j) {
      const auto& f = data_.fields[j];
      const auto o = obs(f);
      const double r = o.mean - gaussian_fixed_mean(spec_, theta_, f) - load * latent_.a[f.specimen];
      const double lik_prec = o.n / theta_.sigma2;
      const double prec = 1.0 / field_variance(spec_, theta_, f) + lik_prec;
      latent_.b[j] = lik_prec * r / prec + draw_normal(rng_) / std::sqrt(prec);
    }
  }

  void error_variance() {
    const double load = loading_area();
    double ss = 0.0, n = 0.0;
    for (std::size_t j = 0; j < data_.fields.size(); ++j) {
      const auto& f = data_.fields[j];
      const auto o = obs(f);
      const double b = spec_.has_field_effect() ? latent_.b[j] : 0.0;
      const double r = o.mean - gaussian_fixed_mean(spec_, theta_, f) - load * latent_.a[f.specimen] - b;
      ss += o.ss + o.n * r * r;
      n += o.n;
    }
    theta_.sigma2 =
        1.0 / draw_gamma(priors_.gamma_shape + 0.5 * n, priors_.gamma_rate + 0.5 * ss, rng_);
  }

  void specimen_variance() {
    double ss = 0.0;
    for (double a : latent_.a) ss += a * a;
    theta_.tau2 = 1.0 / draw_gamma(priors_.gamma_shape + 0.5 * latent_.a.size(),
                                   priors_.gamma_rate + 0.5 * ss, rng_);
  }

  /// nu2 from the fields whose variance is nu2 itself; each free circularity
  /// multiplier through its own group precision 1/(delta nu2).
  void field_variances() {
    const bool het = spec_.family == Family::CIRC_HET && !spec_.delta_equal;
    const std::size_t slots = het ? theta_.delta.size() : 0;
    std::vector<double> slot_ss(slots, 0.0), slot_n(slots, 0.0);
    double ss = 0.0, n = 0.0;
    for (std::size_t j = 0; j < data_.fields.size(); ++j) {
      const double b2 = latent_.b[j] * latent_.b[j];
      const int s = het ? delta_slot(spec_, data_.fields[j].tissue) : -1;
      if (s >= 0 && delta_free_[s]) {
        slot_ss[s] += b2;
        slot_n[s] += 1.0;
      } else {
        ss += b2;
        n += 1.0;
      }
    }
    theta_.nu2 =
        1.0 / draw_gamma(priors_.gamma_shape + 0.5 * n, priors_.gamma_rate + 0.5 * ss, rng_);
    for (std::size_t s = 0; s < slots; ++s) {
      if (!delta_free_[s]) continue;
      const double phi = draw_gamma(priors_.gamma_shape + 0.5 * slot_n[s],
                                    priors_.gamma_rate + 0.5 * slot_ss[s], rng_);
      theta_.delta[s] = 1.0 / (phi * theta_.nu2);
    }
  }

  // ---- count outcome ----------------------------------------------------

  double count_effect(int i) const {
    return spec_.family == Family::JOINT ? theta_.lambda_n * latent_.a_count[i] : latent_.a[i];
  }

  /// Count log-likelihood of one field up to terms free of the linear
  /// predictor and of the dispersion.
  double count_term(const FieldData& f, double eta) const {
    const double k = f.n - 1;
    const double mu = std::exp(eta);
    if (spec_.family == Family::LVD_NEGBIN) {
      const double kappa = theta_.dispersion;
      return -kappa * std::log1p(mu / kappa) + k * (eta - std::log(kappa + mu));
    }
    return k * eta - mu;
  }

  double count_loglik(const ParamVector& p, bool use_count_latent, const std::vector<double>& effects) const {
    double total = 0.0;
    for (const auto& f : data_.fields) {
      const double e = use_count_latent ? p.lambda_n * effects[f.specimen] : effects[f.specimen];
      total += count_term(f, count_fixed_eta(spec_, p, f) + e);
    }
    return total;
  }

  double count_loglik_current() const {
    const bool joint = spec_.family == Family::JOINT;
    return count_loglik(theta_, joint, joint ? latent_.a_count : latent_.a);
  }

  double specimen_count_loglik(int i, double effect) const {
    double total = 0.0;
    for (int j = data_.specimen_begin[i]; j < data_.specimen_begin[i + 1]; ++j) {
      const auto& f = data_.fields[j];
      total += count_term(f, count_fixed_eta(spec_, theta_, f) + effect);
    }
    return total;
  }

  Eigen::VectorXd count_block_vector(const ParamVector& p) const {
    const bool joint = spec_.family == Family::JOINT;
    Eigen::VectorXd x(count_block_->dim());
    int c = 0;
    x[c++] = joint ? p.alpha_n : p.alpha;
    for (int g = 0; g < 3; ++g)
      if (beta_n_free_[g]) x[c++] = joint ? p.beta_n[g] : p.beta[g];
    if (joint) x[c++] = p.lambda_n;
    return x;
  }

  void set_count_block(ParamVector& p, const Eigen::VectorXd& x) const {
    const bool joint = spec_.family == Family::JOINT;
    int c = 0;
    (joint ? p.alpha_n : p.alpha) = x[c++];
    for (int g = 0; g < 3; ++g)
      if (beta_n_free_[g]) (joint ? p.beta_n[g] : p.beta[g]) = x[c++];
    if (joint) p.lambda_n = x[c++];
  }

  double count_block_logprior(const Eigen::VectorXd& x) const {
    const bool joint = spec_.family == Family::JOINT;
    const int nfixed = static_cast<int>(x.size()) - (joint ? 1 : 0);
    double lp = 0.0;
    for (int k = 0; k < nfixed; ++k) lp += -0.5 * priors_.fixed_precision * x[k] * x[k];
    if (joint && std::abs(x[x.size() - 1]) > priors_.lambda_bound)
      return -std::numeric_limits<double>::infinity();
    return lp;
  }

  void count_coefficients() {
    const bool joint = spec_.family == Family::JOINT;
    const auto& effects = joint ? latent_.a_count : latent_.a;
    const Eigen::VectorXd x = count_block_vector(theta_);
    const Eigen::VectorXd y = count_block_->propose(x, rng_);
    const double lq = count_block_logprior(y);
    bool acc = false;
    if (std::isfinite(lq)) {
      ParamVector prop = theta_;
      set_count_block(prop, y);
      const double ratio = lq + count_loglik(prop, joint, effects) - count_block_logprior(x) -
                           count_loglik(theta_, joint, effects);
      acc = metropolis_accept(ratio, rng_);
      if (acc) theta_ = prop;
    }
    count_block_->update(acc ? y : x, acc);
  }

  void count_effects() {
    const bool joint = spec_.family == Family::JOINT;
    auto& a = joint ? latent_.a_count : latent_.a;
    const double load = joint ? theta_.lambda_n : 1.0;
    const double r = rho();
    for (int i = 0; i < data_.n_specimens(); ++i) {
      double prior_mean = 0.0, prior_var = theta_.tau2;
      if (joint) {
        prior_mean = r * latent_.a[i];
        prior_var = 1.0 - r * r;
      }
      const double cur = a[i];
      const double next = cur + effect_scales_[i].scale() * draw_normal(rng_);
      const double ratio = specimen_count_loglik(i, load * next) -
                           specimen_count_loglik(i, load * cur) -
                           0.5 * ((next - prior_mean) * (next - prior_mean) -
                                  (cur - prior_mean) * (cur - prior_mean)) /
                               prior_var;
      const bool acc = metropolis_accept(ratio, rng_);
      if (acc) a[i] = next;
      effect_scales_[i].update(acc);
    }
  }

  /// (tau2, a) -> (c^2 tau2, c a): the effects' prior density and the
  /// Jacobian cancel, leaving the likelihood and the tau2 prior.
  void tau_rescale() {
    const double u = tau_scale_.scale() * draw_normal(rng_);
    const double c = std::exp(u);
    std::vector<double> scaled(latent_.a);
    for (auto& v : scaled) v *= c;
    const double tau2_new = theta_.tau2 * c * c;
    auto log_prior = [&](double tau2) {
      return gamma_logpdf(1.0 / tau2, priors_.gamma_shape, priors_.gamma_rate) - std::log(tau2);
    };
    const double ratio = count_loglik(theta_, false, scaled) - count_loglik(theta_, false, latent_.a) +
                         log_prior(tau2_new) - log_prior(theta_.tau2);
    const bool acc = metropolis_accept(ratio, rng_);
    if (acc) {
      latent_.a = std::move(scaled);
      theta_.tau2 = tau2_new;
    }
    tau_scale_.update(acc);
  }

  double dispersion_loglik(double kappa) {
    const double saved = theta_.dispersion;
    theta_.dispersion = kappa;
    double total = count_loglik_current();
    for (const auto& f : data_.fields)
      for (int m = 0; m < f.n - 1; ++m) total += std::log(kappa + m);
    theta_.dispersion = saved;
    return total;
  }

  void dispersion() {
    const double cur = theta_.dispersion;
    const double next = cur * std::exp(kappa_scale_.scale() * draw_normal(rng_));
    const double ratio = dispersion_loglik(next) - dispersion_loglik(cur) +
                         gamma_logpdf(next, priors_.gamma_shape, priors_.gamma_rate) -
                         gamma_logpdf(cur, priors_.gamma_shape, priors_.gamma_rate) +
                         std::log(next) - std::log(cur);
    const bool acc = std::isfinite(next) && next > 0.0 && metropolis_accept(ratio, rng_);
    if (acc) theta_.dispersion = next;
    kappa_scale_.update(acc);
  }

  // ---- joint model ------------------------------------------------------

  double rho_from_z(double z) const { return priors_.rho_bound * std::tanh(z); }
  double z_from_rho(double r) const { return std::atanh(r / priors_.rho_bound); }
  static double log_jacobian(double z) {
    const double t = std::tanh(z);
    return std::log1p(-t * t);
  }

  double latent_pair_logdensity(double r) const {
    double total = 0.0;
    for (int i = 0; i < data_.n_specimens(); ++i)
      total += bivariate_normal_logpdf(latent_.a[i], latent_.a_count[i], r);
    return total;
  }

  void rho_centred() {
    const double z = z_from_rho(theta_.rho);
    const double zn = z + rho_scale_.scale() * draw_normal(rng_);
    const double rn = rho_from_z(zn);
    bool acc = false;
    if (std::abs(rn) < priors_.rho_bound) {
      const double ratio = latent_pair_logdensity(rn) - latent_pair_logdensity(theta_.rho) +
                           log_jacobian(zn) - log_jacobian(z);
      acc = metropolis_accept(ratio, rng_);
      if (acc) theta_.rho = rn;
    }
    rho_scale_.update(acc);
  }

  /// rho moved with the standardized count-effect innovations held fixed:
  /// a_N = rho a_A + sqrt(1 - rho^2) e. Only the count likelihood changes.
  void rho_noncentred() {
    const double r = theta_.rho;
    const double z = z_from_rho(r);
    const double zn = z + rho_nc_scale_.scale() * draw_normal(rng_);
    const double rn = rho_from_z(zn);
    bool acc = false;
    if (std::abs(rn) < priors_.rho_bound) {
      const double s = std::sqrt(1.0 - r * r), sn = std::sqrt(1.0 - rn * rn);
      std::vector<double> moved(latent_.a_count.size());
      for (std::size_t i = 0; i < moved.size(); ++i) {
        const double e = (latent_.a_count[i] - r * latent_.a[i]) / s;
        moved[i] = rn * latent_.a[i] + sn * e;
      }
      const double ratio = count_loglik(theta_, true, moved) -
                           count_loglik(theta_, true, latent_.a_count) + log_jacobian(zn) -
                           log_jacobian(z);
      acc = metropolis_accept(ratio, rng_);
      if (acc) {
        theta_.rho = rn;
        latent_.a_count = std::move(moved);
      }
    }
    rho_nc_scale_.update(acc);
  }

  /// (lambda, a) -> (c lambda, a / c) for one outcome: the likelihood is
  /// unchanged, the effects' density and the Jacobian c^(1 - I) are not.
  void loading_rescale(bool area) {
    AdaptiveScale& sc = area ? area_scale_ : count_scale_;
    double& lambda = area ? theta_.lambda_a : theta_.lambda_n;
    std::vector<double>& a = area ? latent_.a : latent_.a_count;
    const double u = sc.scale() * draw_normal(rng_);
    const double c = std::exp(u);
    bool acc = false;
    if (std::abs(c * lambda) <= priors_.lambda_bound) {
      const double r = rho();
      const double before = latent_pair_logdensity(r);
      for (auto& v : a) v /= c;
      const double after = latent_pair_logdensity(r);
      const double ratio = after - before + (1.0 - static_cast<double>(a.size())) * u;
      acc = metropolis_accept(ratio, rng_);
      if (acc) {
        lambda *= c;
      } else {
        for (auto& v : a) v *= c;
      }
    }
    sc.update(acc);
  }

  const ModelSpec& spec_;
  const PriorSpec& priors_;
  const ModelData& data_;
  Rng rng_;
  ParamVector theta_;
  LatentState latent_;
  std::array<bool, 3> beta_free_{};
  std::array<bool, 3> beta_n_free_{};
  std::vector<bool> delta_free_;
  std::optional<AdaptiveBlockProposal> count_block_;
  std::vector<AdaptiveScale> effect_scales_;
  long kappa_const_size_ = 0;
  AdaptiveScale tau_scale_{0.1, 0.44};
  AdaptiveScale kappa_scale_{0.3, 0.44};
  AdaptiveScale rho_scale_{0.3, 0.44};
  AdaptiveScale rho_nc_scale_{0.3, 0.44};
  AdaptiveScale area_scale_{0.05, 0.44};
  AdaptiveScale count_scale_{0.05, 0.44};
};

std::string component_report(const ModelSpec& spec, const PriorSpec& priors, const ParamVector& theta,
                             const LatentState& latent, const ModelData& data) {
  std::ostringstream msg;
  msg << "logprior=" << logprior(spec, priors, theta);
  try {
    msg << " loglik=" << loglik_conditional(spec, theta, latent, data);
    msg << " latent=" << latent_logdensity(spec, theta, latent, data);
  } catch (const std::exception& e) {
    msg << " (" << e.what() << ")";
  }
  return msg.str();
}

/// Starting point for chain c: free parameters jittered on the unconstrained
/// scale (chain 0 starts at the supplied values).
ParamVector chain_start(const Parameterization& param, const ParamVector& base, int c,
                        const ChainConfig& config) {
  if (c == 0 || config.init_spread <= 0.0) return base;
  Rng rng = make_substream(config.seed ^ 0x5bd1e995ULL, Stream::Chain, static_cast<std::uint64_t>(c));
  auto z = param.to_unconstrained(base);
  for (auto& v : z) v += config.init_spread * draw_normal(rng);
  return param.natural(z);
}

}  // namespace

ChainDraws ChainResult::parameter(int k) const {
  ChainDraws out;
  for (const auto& m : draws) {
    out.emplace_back(static_cast<std::size_t>(m.rows()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) out.back()[r] = m(r, k);
  }
  return out;
}

int ChainResult::index_of(const std::string& name) const {
  for (int k = 0; k < n_params(); ++k)
    if (names[k] == name) return k;
  return -1;
}

ChainResult run_mcmc(const ModelSpec& spec, const PriorSpec& priors, const ModelData& data,
                     const ChainConfig& config, std::optional<ParamVector> init) {
  spec.validate();
  priors.validate();
  config.validate();
  if (data.n_specimens() < 1) throw InputError("run_mcmc: empty dataset");

  ParamVector start = init ? *init : initial_params(spec, data);
  if (static_cast<int>(start.delta.size()) < spec.delta_count())
    start.delta.resize(static_cast<std::size_t>(spec.delta_count()), 1.0);
  validate_params(spec, start);
  if (spec.family == Family::JOINT && std::abs(start.rho) >= priors.rho_bound)
    throw InputError("run_mcmc: initial rho outside the prior bounds");

  ChainResult res;
  res.spec = spec;
  res.priors = priors;
  res.config = config;
  res.names = parameter_names(spec);
  res.free = free_mask(spec, data);
  res.initial = start;

  const Parameterization param(spec, priors, res.free, start);
  const int np = res.n_params();
  res.draws.resize(static_cast<std::size_t>(config.n_chains));
  res.acceptance.resize(static_cast<std::size_t>(config.n_chains));

  if (config.keep_iterations == 0) {
    res.initialization_only = true;
    for (int c = 0; c < config.n_chains; ++c) {
      const auto v = pack(spec, with_sign_convention(spec, chain_start(param, start, c, config)));
      res.draws[c] = Eigen::Map<const Eigen::RowVectorXd>(v.data(), np);
    }
    compute_diagnostics(res);
    return res;
  }

  std::string error;
#pragma omp parallel for schedule(static, 1)
  for (int c = 0; c < config.n_chains; ++c) {
    try {
      const ParamVector theta0 = chain_start(param, start, c, config);
      Sampler sampler(spec, priors, data, res.free, theta0,
                      make_substream(config.seed, Stream::Chain, static_cast<std::uint64_t>(c)),
                      config);
      {
        // Latents start at zero; check the state the first sweep starts from.
        const double lp = logpost(spec, priors, sampler.theta(), sampler.latent(), data);
        if (!std::isfinite(lp))
          throw NumericalError("non-finite log posterior at initialization of chain " +
                               std::to_string(c) + ": " +
                               component_report(spec, priors, sampler.theta(), sampler.latent(), data));
      }
      Eigen::MatrixXd kept(config.kept_per_chain(), np);
      long row = 0;
      const long total = config.burn_in + config.keep_iterations;
      for (long it = 0; it < total; ++it) {
        if (it == config.burn_in) sampler.freeze();
        sampler.sweep();
        if (it >= config.burn_in && (it - config.burn_in + 1) % config.thin == 0 &&
            row < kept.rows()) {
          const auto v = pack(spec, with_sign_convention(spec, sampler.theta()));
          for (int k = 0; k < np; ++k) kept(row, k) = v[k];
          ++row;
        }
      }
      res.draws[c] = std::move(kept);
      res.acceptance[c] = sampler.acceptance();
    } catch (const std::exception& e) {
#pragma omp critical(ics_mcmc_error)
      if (error.empty()) error = e.what();
    }
  }
  if (!error.empty()) throw NumericalError(error);
  compute_diagnostics(res);
  return res;
}

ChainResult run_mcmc(const ModelSpec& spec, const PriorSpec& priors, const Dataset& d,
                     const ChainConfig& config, std::optional<ParamVector> init) {
  return run_mcmc(spec, priors, ModelData::build(d), config, std::move(init));
}

ParamDiagnostics diagnose_draws(const ChainDraws& draws, int max_lag) {
  ParamDiagnostics out;
  bool identical = true;
  const double first = draws.empty() || draws.front().empty() ? 0.0 : draws.front().front();
  for (const auto& c : draws)
    for (double v : c) identical = identical && v == first;
  out.degenerate = identical;
  try {
    out.rhat = split_rhat(draws);
    out.ess = effective_sample_size(draws);
  } catch (const InputError&) {
    out.rhat = kNaN;
    out.ess = kNaN;
  }
  out.acf = autocorrelation(draws, max_lag);
  return out;
}

void compute_diagnostics(ChainResult& c, int max_lag) {
  c.diagnostics.clear();
  for (int k = 0; k < c.n_params(); ++k) c.diagnostics.push_back(diagnose_draws(c.parameter(k), max_lag));
}

const ParamSummary& FitResult::at(const std::string& name) const {
  for (const auto& p : params)
    if (p.name == name) return p;
  throw InputError("no parameter named " + name);
}

ParamVector FitResult::medians() const {
  std::vector<double> v;
  for (const auto& p : params) v.push_back(p.median);
  return unpack(spec, v);
}

FitResult summarize_posterior(const ChainResult& c) {
  FitResult out;
  out.spec = c.spec;
  out.n_chains = static_cast<int>(c.draws.size());
  out.draws_per_chain = c.draws.empty() ? 0 : c.draws.front().rows();
  out.initialization_only = c.initialization_only;
  for (int k = 0; k < c.n_params(); ++k) {
    ParamSummary s;
    s.name = c.names[k];
    s.free = c.free.empty() || c.free[k];
    std::vector<double> pooled;
    for (const auto& m : c.draws)
      for (Eigen::Index r = 0; r < m.rows(); ++r) pooled.push_back(m(r, k));
    if (pooled.empty()) throw InputError("summarize_posterior: no draws");
    std::sort(pooled.begin(), pooled.end());
    s.median = empirical_quantile(pooled, 0.5);
    s.lower = empirical_quantile(pooled, 0.025);
    s.upper = empirical_quantile(pooled, 0.975);
    double sum = 0.0;
    for (double v : pooled) sum += v;
    s.mean = sum / pooled.size();
    double ss = 0.0;
    for (double v : pooled) ss += (v - s.mean) * (v - s.mean);
    s.sd = pooled.size() > 1 ? std::sqrt(ss / (pooled.size() - 1)) : 0.0;
    if (k < static_cast<int>(c.diagnostics.size())) {
      s.ess = c.diagnostics[k].ess;
      s.rhat = c.diagnostics[k].rhat;
      s.degenerate = c.diagnostics[k].degenerate;
    } else {
      s.ess = s.rhat = kNaN;
    }
    s.mcse_median = mcse_median(s.sd, s.ess);
    out.params.push_back(s);
  }
  for (const auto& row : effect_table(out.medians(), c.spec)) {
    const auto& s = out.at(row.parameter);
    EffectSummary e;
    e.parameter = row.parameter;
    e.group = row.group;
    e.median = s.median;
    e.lower = s.lower;
    e.upper = s.upper;
    if (row.ratio) {
      e.ratio_median = std::exp(s.median);
      e.ratio_lower = std::exp(s.lower);
      e.ratio_upper = std::exp(s.upper);
      e.phrase = fold_change_phrase(*e.ratio_median);
    }
    out.effects.push_back(e);
  }
  return out;
}

PairedFit fit_joint_and_independent(const ModelData& data, const PriorSpec& priors,
                                    const ChainConfig& config) {
  PairedFit out;
  const ModelSpec joint{Family::JOINT};
  ModelSpec independent{Family::JOINT};
  independent.rho_zero = true;
  out.joint = summarize_posterior(run_mcmc(joint, priors, data, config));
  out.independent = summarize_posterior(run_mcmc(independent, priors, data, config));
  for (const auto& p : out.independent.params) {
    const auto& q = out.joint.at(p.name);
    ParamDifference d;
    d.name = p.name;
    d.joint_median = q.median;
    d.independent_median = p.median;
    d.difference = q.median - p.median;
    d.mcse = std::sqrt(q.mcse_median * q.mcse_median + p.mcse_median * p.mcse_median);
    out.differences.push_back(d);
  }
  return out;
}

DiagnosticsReport diagnose(const ChainResult& c, double rhat_threshold, double ess_threshold) {
  DiagnosticsReport rep;
  rep.rhat_threshold = rhat_threshold;
  rep.ess_threshold = ess_threshold;
  for (int k = 0; k < c.n_params(); ++k) {
    const auto& d = c.diagnostics.at(k);
    rep.names.push_back(c.names[k]);
    rep.acf.push_back(d.acf);
    if (!c.free.empty() && !c.free[k]) continue;
    std::string reason;
    if (d.degenerate) {
      reason = "degenerate draws";
    } else {
      if (!(d.rhat <= rhat_threshold)) reason = "rhat";
      if (!(d.ess >= ess_threshold)) reason += reason.empty() ? "ess" : ",ess";
    }
    if (!reason.empty()) rep.flags.push_back({c.names[k], d.rhat, d.ess, reason});
  }
  return rep;
}

std::string DiagnosticsReport::text() const {
  std::ostringstream out;
  char buf[256];
  out << "convergence flags (rhat > " << rhat_threshold << " or ess < " << ess_threshold << ")\n";
  if (flags.empty()) out << "  none\n";
  for (const auto& f : flags) {
    std::snprintf(buf, sizeof buf, "  %-16s rhat=%.4f ess=%.1f [%s]\n", f.name.c_str(), f.rhat,
                  f.ess, f.reason.c_str());
    out << buf;
  }
  out << "\nautocorrelation by lag\n";
  std::snprintf(buf, sizeof buf, "%-16s", "parameter");
  out << buf;
  const std::size_t lags = acf.empty() ? 0 : acf.front().size();
  for (std::size_t l = 1; l <= lags; ++l) {
    std::snprintf(buf, sizeof buf, " %7zu", l);
    out << buf;
  }
  out << '\n';
  for (std::size_t k = 0; k < names.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%-16s", names[k].c_str());
    out << buf;
    for (double v : acf[k]) {
      std::snprintf(buf, sizeof buf, " %7.3f", v);
      out << buf;
    }
    out << '\n';
  }
  return out.str();
}

std::vector<SensitivityRun> prior_sensitivity(const ModelSpec& spec, const PriorSpec& priors,
                                              const ModelData& data, const ChainConfig& config,
                                              const FitResult& baseline,
                                              const std::vector<double>& factors) {
  std::vector<SensitivityRun> out;
  for (double f : factors) {
    SensitivityRun run;
    run.factor = f;
    run.fit = summarize_posterior(run_mcmc(spec, priors.scaled(f), data, config));
    for (std::size_t k = 0; k < run.fit.params.size(); ++k) {
      const auto& b = baseline.params[k];
      if (!b.free || !(b.sd > 0.0)) continue;
      run.max_shift_sd = std::max(run.max_shift_sd, std::abs(run.fit.params[k].median - b.median) / b.sd);
    }
    out.push_back(std::move(run));
  }
  return out;
}

std::string format_draws_csv(const ChainResult& c) {
  std::string out = "chain,iteration";
  for (const auto& n : c.names) out += "," + n;
  out += '\n';
  char buf[64];
  for (std::size_t ch = 0; ch < c.draws.size(); ++ch) {
    const auto& m = c.draws[ch];
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      const long iter = c.initialization_only ? 0 : c.config.burn_in + (r + 1) * c.config.thin;
      out += std::to_string(ch) + "," + std::to_string(iter);
      for (Eigen::Index k = 0; k < m.cols(); ++k) {
        std::snprintf(buf, sizeof buf, ",%.17g", m(r, k));
        out += buf;
      }
      out += '\n';
    }
  }
  return out;
}

}  // namespace ics
