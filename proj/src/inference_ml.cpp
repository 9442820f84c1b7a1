#include "ics/inference_ml.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "ics/dual.hpp"
#include "ics/parameterization.hpp"

namespace ics {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct GroupMoments {
  std::array<double, kCoarseGroups> sum{};
  std::array<int, kCoarseGroups> count{};

  void add(int g, double y) {
    sum[g] += y;
    count[g] += 1;
  }
  double mean(int g, double fallback) const { return count[g] ? sum[g] / count[g] : fallback; }
};

/// Intercept and group effects from group means; returns the residual
/// variance of the observations around their group means.
template <class GetY>
double fixed_effects_from_means(const ModelData& data, GetY get_y, double& alpha,
                                std::array<double, 3>& beta) {
  GroupMoments m;
  double total = 0.0;
  for (const auto& f : data.fields) {
    const double y = get_y(f);
    m.add(f.group, y);
    total += y;
  }
  const double overall = total / std::max(1, data.n_fields());
  alpha = m.mean(0, overall);
  for (int g = 1; g < kCoarseGroups; ++g) beta[g - 1] = m.count[g] ? m.mean(g, alpha) - alpha : 0.0;
  double ss = 0.0;
  for (const auto& f : data.fields) {
    const double r = get_y(f) - m.mean(f.group, overall);
    ss += r * r;
  }
  return data.n_fields() > 1 ? ss / (data.n_fields() - 1) : 1.0;
}

double pooled_within(const ModelData& data, bool circularity) {
  double ss = 0.0, df = 0.0;
  for (const auto& f : data.fields) {
    ss += circularity ? f.logit_circ.ss : f.log_area.ss;
    df += f.n - 1;
  }
  return df > 0 && ss > 0 ? ss / df : 1.0;
}

/// Reporting convention for the two sign symmetries of the joint model:
/// lambda_A >= 0 and lambda_N <= 0, with rho flipped alongside.
void apply_sign_convention(const Parameterization& param, Eigen::VectorXd& z) {
  if (param.spec().family != Family::JOINT) return;
  const auto names = param.free_names();
  int ia = -1, in = -1, ir = -1;
  for (int k = 0; k < static_cast<int>(names.size()); ++k) {
    if (names[k] == "lambda_A") ia = k;
    if (names[k] == "lambda_N") in = k;
    if (names[k] == "rho") ir = k;
  }
  if (ia >= 0 && z[ia] < 0.0) {
    z[ia] = -z[ia];
    if (ir >= 0) z[ir] = -z[ir];
  }
  if (in >= 0 && z[in] > 0.0) {
    z[in] = -z[in];
    if (ir >= 0) z[ir] = -z[ir];
  }
}

}  // namespace

int MLFit::n_free() const {
  return static_cast<int>(std::count(free.begin(), free.end(), true));
}

ParamVector initial_params(const ModelSpec& spec, const ModelData& data) {
  spec.validate();
  ParamVector p = default_params(spec);
  const auto count_y = [](const FieldData& f) { return std::log(f.n - 1 + 0.5); };

  switch (spec.family) {
    case Family::PLA_LMM: {
      const double v = fixed_effects_from_means(
          data, [](const FieldData& f) { return f.pla; }, p.alpha, p.beta);
      p.tau2 = std::max(v / 3.0, 1e-3);
      p.sigma2 = std::max(2.0 * v / 3.0, 1e-3);
      break;
    }
    case Family::VA_LMM:
    case Family::VA_CONDITIONAL:
    case Family::CIRC_HET: {
      const bool circ = spec.family == Family::CIRC_HET;
      const double v = fixed_effects_from_means(
          data, [&](const FieldData& f) { return circ ? f.logit_circ.mean : f.log_area.mean; },
          p.alpha, p.beta);
      p.sigma2 = pooled_within(data, circ);
      p.tau2 = std::max(v / 2.0, 1e-3);
      p.nu2 = std::max(v / 2.0, 1e-3);
      break;
    }
    case Family::LVD_POIS:
    case Family::LVD_NEGBIN: {
      const double v = fixed_effects_from_means(data, count_y, p.alpha, p.beta);
      p.tau2 = std::clamp(v / 2.0, 0.02, 1.0);
      p.dispersion = 5.0;
      break;
    }
    case Family::JOINT: {
      const double v = fixed_effects_from_means(
          data, [](const FieldData& f) { return f.log_area.mean; }, p.alpha, p.beta);
      p.sigma2 = pooled_within(data, false);
      p.lambda_a = std::sqrt(std::max(v / 2.0, 1e-3));
      p.nu2 = std::max(v / 2.0, 1e-3);
      fixed_effects_from_means(data, count_y, p.alpha_n, p.beta_n);
      p.lambda_n = -0.2;
      p.rho = 0.0;
      break;
    }
  }
  return p;
}

MLFit fit_ml(const ModelSpec& spec, const ModelData& data, const ParamVector& init,
             const MLOptions& opts) {
  spec.validate();
  validate_params(spec, init);
  if (data.n_specimens() < 1) throw InputError("fit_ml: empty dataset");

  const auto mask = free_mask(spec, data);
  const Parameterization param(spec, PriorSpec{}, mask, init);
  const int nf = param.n_free();
  if (nf > kMaxDual) throw InputError("fit_ml: too many free parameters");

  ObjectiveFn objective = [&](const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
    const auto vg = marginal_loglik_gradient(param, std::span<const double>(x.data(), x.size()),
                                             data, opts.quadrature);
    grad.resize(x.size());
    for (Eigen::Index k = 0; k < x.size(); ++k) grad[k] = -vg.gradient[k];
    return -vg.value;
  };

  const auto z0v = param.to_unconstrained(init);
  Eigen::VectorXd z0 = Eigen::Map<const Eigen::VectorXd>(z0v.data(), nf);
  OptimizerResult opt = minimize_bfgs(objective, z0, opts.optimizer);
  if (!std::isfinite(opt.value))
    throw NumericalError("fit_ml: log-likelihood not finite at the initial values");

  apply_sign_convention(param, opt.x);
  const std::span<const double> zs(opt.x.data(), opt.x.size());

  MLFit fit;
  fit.spec = spec;
  fit.theta_hat = param.natural(zs);
  fit.max_loglik = -opt.value;
  fit.converged = opt.converged;
  fit.iterations = opt.iterations;
  fit.evaluations = opt.evaluations;
  fit.gradient_sup_norm = opt.gradient.size() ? opt.gradient.cwiseAbs().maxCoeff() : 0.0;
  fit.message = opt.message;
  fit.names = parameter_names(spec);
  fit.free = mask.empty() ? std::vector<bool>(fit.names.size(), true) : mask;
  fit.estimates = pack(spec, fit.theta_hat);

  const std::size_t np = fit.names.size();
  fit.standard_errors.assign(np, kNaN);
  fit.ci_lower.assign(np, kNaN);
  fit.ci_upper.assign(np, kNaN);

  Eigen::MatrixXd info = fd_hessian(objective, opt.x, opts.optimizer.fd_step);
  Eigen::LLT<Eigen::MatrixXd> llt(info);
  if (!info.allFinite() || llt.info() != Eigen::Success) {
    fit.message += "; observed information not positive definite, no standard errors";
    return fit;
  }
  const Eigen::MatrixXd cov = llt.solve(Eigen::MatrixXd::Identity(nf, nf));
  const auto jac = param.jacobian_diag(zs);
  const double q = boost::math::quantile(boost::math::normal(),
                                         0.5 + 0.5 * opts.wald_level);
  const auto& layout = param.layout();
  for (int k = 0; k < nf; ++k) {
    const int idx = param.free_indices()[k];
    const double se_z = std::sqrt(cov(k, k));
    fit.standard_errors[idx] = std::abs(jac[k]) * se_z;
    const double lo = param.to_natural(layout[idx].support, opt.x[k] - q * se_z);
    const double hi = param.to_natural(layout[idx].support, opt.x[k] + q * se_z);
    fit.ci_lower[idx] = std::min(lo, hi);
    fit.ci_upper[idx] = std::max(lo, hi);
  }
  return fit;
}

MLFit fit_ml(const ModelSpec& spec, const Dataset& d, const ParamVector& init,
             const MLOptions& opts) {
  return fit_ml(spec, ModelData::build(d), init, opts);
}

MLFit fit_ml(const ModelSpec& spec, const ModelData& data, const MLOptions& opts) {
  return fit_ml(spec, data, initial_params(spec, data), opts);
}

LrtResult lrt(double loglik_general, double loglik_constrained, int df) {
  if (df <= 0) throw InputError("lrt: degrees of freedom must be positive");
  if (!std::isfinite(loglik_general) || !std::isfinite(loglik_constrained))
    throw NumericalError("lrt: non-finite log-likelihood");
  LrtResult r;
  r.df = df;
  r.statistic = 2.0 * (loglik_general - loglik_constrained);
  if (r.statistic < 0.0) {
    r.statistic = 0.0;
    r.clamped = true;
  }
  r.p_value = r.statistic == 0.0 ? 1.0 : boost::math::gamma_q(0.5 * df, 0.5 * r.statistic);
  return r;
}

LrtResult lrt(const MLFit& general, const MLFit& constrained, int df) {
  return lrt(general.max_loglik, constrained.max_loglik, df);
}

OverdispersionReport compare_overdispersion(const ModelData& data, const MLOptions& opts) {
  OverdispersionReport rep;
  const ModelSpec pois{Family::LVD_POIS};
  const ModelSpec nb{Family::LVD_NEGBIN};
  rep.poisson = fit_ml(pois, data, opts);
  ParamVector init = rep.poisson.theta_hat;
  init.dispersion = 10.0;
  rep.negbin = fit_ml(nb, data, init, opts);
  rep.delta_loglik = rep.negbin.max_loglik - rep.poisson.max_loglik;
  rep.dispersion = rep.negbin.theta_hat.dispersion;
  rep.dispersion_se = rep.negbin.standard_errors.back();
  return rep;
}

OverdispersionReport compare_overdispersion(const Dataset& d, const MLOptions& opts) {
  return compare_overdispersion(ModelData::build(d), opts);
}

DeltaTestReport delta_equality_test(const ModelData& data, DeltaGrouping grouping,
                                    const MLOptions& opts) {
  ModelSpec general{Family::CIRC_HET, grouping, false, false};
  ModelSpec constrained{Family::CIRC_HET, grouping, false, true};
  DeltaTestReport rep;
  rep.constrained = fit_ml(constrained, data, opts);
  ParamVector init = rep.constrained.theta_hat;
  init.delta.assign(static_cast<std::size_t>(general.delta_count()), 1.0);
  rep.general = fit_ml(general, data, init, opts);
  const int df = rep.general.n_free() - rep.constrained.n_free();
  if (df <= 0) throw InputError("delta test: the design identifies no multiplier");
  rep.test = lrt(rep.general, rep.constrained, df);
  return rep;
}

}  // namespace ics
