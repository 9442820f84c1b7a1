#include "ics/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <tuple>
#include <limits>
#include <numbers>

namespace ics {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

constexpr std::array<std::string_view, 7> kFamilyNames{
    "pla_lmm", "lvd_pois", "lvd_negbin", "va_lmm", "circ_het", "va_conditional", "joint"};

double logistic_logit(double p) { return std::log(p) - std::log1p(-p); }

void check_latent_dims(const ModelSpec& spec, const LatentState& latent, const ModelData& data) {
  const auto ns = static_cast<std::size_t>(data.n_specimens());
  if (latent.a.size() != ns)
    throw InputError("latent.a has " + std::to_string(latent.a.size()) + " entries, expected " +
                     std::to_string(ns));
  if (spec.family == Family::JOINT && latent.a_count.size() != ns)
    throw InputError("latent.a_count has wrong dimension");
  if (spec.has_field_effect() && latent.b.size() != data.fields.size())
    throw InputError("latent.b has " + std::to_string(latent.b.size()) + " entries, expected " +
                     std::to_string(data.fields.size()));
}

double gaussian_field_loglik(const GaussianObs& obs, double mean, double sigma2) {
  const double n = obs.n;
  const double dev = obs.mean - mean;
  return -0.5 * n * (kLog2Pi + std::log(sigma2)) - 0.5 * (obs.ss + n * dev * dev) / sigma2;
}

}  // namespace

std::string_view family_name(Family f) { return kFamilyNames[static_cast<int>(f)]; }

std::optional<Family> parse_family(std::string_view name) {
  for (std::size_t i = 0; i < kFamilyNames.size(); ++i)
    if (kFamilyNames[i] == name) return static_cast<Family>(i);
  return std::nullopt;
}

void ModelSpec::validate() const {
  if (rho_zero && family != Family::JOINT)
    throw InputError("constraint rho_zero is only defined for the joint family");
  if (delta_equal && family != Family::CIRC_HET)
    throw InputError("constraint delta_equal is only defined for circ_het");
  if (delta_grouping == DeltaGrouping::Fine && family != Family::CIRC_HET)
    throw InputError("fine delta grouping is only defined for circ_het");
}

int ModelSpec::delta_count() const {
  if (family != Family::CIRC_HET || delta_equal) return 0;
  return delta_grouping == DeltaGrouping::Coarse ? 3 : 5;
}

bool ModelSpec::has_field_effect() const {
  return family == Family::VA_LMM || family == Family::CIRC_HET ||
         family == Family::VA_CONDITIONAL || family == Family::JOINT;
}

bool ModelSpec::has_count_outcome() const {
  return family == Family::LVD_POIS || family == Family::LVD_NEGBIN || family == Family::JOINT;
}

bool ModelSpec::has_gaussian_outcome() const {
  return family != Family::LVD_POIS && family != Family::LVD_NEGBIN;
}

ParamVector default_params(const ModelSpec& spec) {
  ParamVector p;
  p.delta.assign(static_cast<std::size_t>(spec.delta_count()), 1.0);
  return p;
}

std::vector<ParamInfo> parameter_layout(const ModelSpec& spec) {
  std::vector<ParamInfo> out;
  ParamVector p = default_params(spec);
  for_each_param(spec, p, [&](const std::string& name, Support s, double&) {
    out.push_back({name, s});
  });
  return out;
}

std::vector<std::string> parameter_names(const ModelSpec& spec) {
  std::vector<std::string> out;
  for (auto& info : parameter_layout(spec)) out.push_back(info.name);
  return out;
}

std::vector<double> pack(const ModelSpec& spec, const ParamVector& p) {
  std::vector<double> out;
  for_each_param(spec, p, [&](const std::string&, Support, const double& v) { out.push_back(v); });
  return out;
}

ParamVector unpack(const ModelSpec& spec, std::span<const double> values) {
  return unpack(spec, values, default_params(spec));
}

ParamVector unpack(const ModelSpec& spec, std::span<const double> values, ParamVector base) {
  if (static_cast<int>(base.delta.size()) < spec.delta_count())
    base.delta.resize(static_cast<std::size_t>(spec.delta_count()), 1.0);
  std::size_t k = 0;
  for_each_param(spec, base, [&](const std::string& name, Support, double& v) {
    if (k >= values.size()) throw InputError("unpack: missing value for " + name);
    v = values[k++];
  });
  if (k != values.size()) throw InputError("unpack: too many values");
  return base;
}

void validate_params(const ModelSpec& spec, const ParamVector& p) {
  for_each_param(spec, p, [&](const std::string& name, Support s, const double& v) {
    if (!std::isfinite(v)) throw InputError("parameter " + name + " is not finite");
    if (s == Support::Positive && !(v > 0.0))
      throw InputError("parameter " + name + " must be positive");
    if (s == Support::Correlation && !(std::abs(v) < 1.0))
      throw InputError("parameter " + name + " must lie in (-1, 1)");
  });
}

void PriorSpec::validate() const {
  if (!(fixed_precision > 0.0) || !std::isfinite(fixed_precision))
    throw InputError("prior fixed-effect precision must be positive");
  if (!(gamma_shape > 0.0) || !(gamma_rate > 0.0))
    throw InputError("prior Gamma hyperparameters must be positive");
  if (!(lambda_bound > 0.0) || !std::isfinite(lambda_bound))
    throw InputError("lambda bound must be finite and positive");
  if (!(rho_bound > 0.0 && rho_bound < 1.0)) throw InputError("rho bound must lie in (0, 1)");
}

PriorSpec PriorSpec::scaled(double factor) const {
  PriorSpec out = *this;
  out.fixed_precision /= factor;
  out.gamma_shape /= factor;
  out.gamma_rate /= factor;
  return out;
}

ModelData ModelData::build(const Dataset& d) {
  ModelData out;
  out.specimen_begin.push_back(0);
  for (std::size_t i = 0; i < d.specimens.size(); ++i) {
    for (const auto& f : d.specimens[i].fields) {
      FieldData fd;
      fd.specimen = static_cast<int>(i);
      fd.tissue = f.tissue;
      fd.group = static_cast<int>(coarse(f.tissue));
      fd.n = f.lvd();
      fd.pla = f.pla;
      double sa = 0.0, sc = 0.0;
      for (const auto& v : f.vessels) {
        sa += std::log(v.area);
        sc += logistic_logit(v.circularity);
      }
      const double n = fd.n;
      fd.log_area.mean = sa / n;
      fd.logit_circ.mean = sc / n;
      for (const auto& v : f.vessels) {
        const double da = std::log(v.area) - fd.log_area.mean;
        const double dc = logistic_logit(v.circularity) - fd.logit_circ.mean;
        fd.log_area.ss += da * da;
        fd.logit_circ.ss += dc * dc;
      }
      out.n_vessels += f.vessels.size();
      out.group_fields[fd.group] += 1;
      out.tissue_fields[static_cast<int>(fd.tissue)] += 1;
      out.fields.push_back(fd);
    }
    out.specimen_begin.push_back(static_cast<int>(out.fields.size()));
  }
  out.canonical.resize(out.fields.size());
  std::iota(out.canonical.begin(), out.canonical.end(), 0);
  auto key = [&](int j) {
    const auto& f = out.fields[j];
    return std::make_tuple(static_cast<int>(f.tissue), f.n, f.log_area.mean, f.log_area.ss,
                           f.logit_circ.mean, f.logit_circ.ss, f.pla);
  };
  for (std::size_t i = 0; i + 1 < out.specimen_begin.size(); ++i)
    std::stable_sort(out.canonical.begin() + out.specimen_begin[i],
                     out.canonical.begin() + out.specimen_begin[i + 1],
                     [&](int a, int b) { return key(a) < key(b); });
  return out;
}

GaussianObs gaussian_obs(Family family, const FieldData& f) {
  switch (family) {
    case Family::PLA_LMM:
      return {1, f.pla, 0.0};
    case Family::CIRC_HET:
      return {f.n, f.logit_circ.mean, f.logit_circ.ss};
    default:
      return {f.n, f.log_area.mean, f.log_area.ss};
  }
}

int delta_slot(const ModelSpec& spec, TissueType t) {
  if (t == TissueType::InvasiveCarcinoma) return -1;
  if (spec.delta_grouping == DeltaGrouping::Fine) return static_cast<int>(t);
  return static_cast<int>(coarse(t));
}

std::vector<bool> free_mask(const ModelSpec& spec, const ModelData& data) {
  std::vector<bool> mask;
  ParamVector p = default_params(spec);
  // Without reference fields the intercept takes the place of the first
  // present group's coefficient, which is then held.
  int anchor = -1;
  if (data.group_fields[0] == 0)
    for (int g = 1; g < kCoarseGroups && anchor < 0; ++g)
      if (data.group_fields[g] > 0) anchor = g;
  for_each_param(spec, p, [&](const std::string& name, Support, double&) {
    bool is_free = true;
    auto group_of = [](std::string_view suffix) {
      if (suffix == "TZ") return 1;
      if (suffix == "CIN") return 2;
      return 3;
    };
    if (name.rfind("beta_", 0) == 0) {
      const auto suffix = std::string_view(name).substr(name.rfind('_') + 1);
      is_free = data.group_fields[group_of(suffix)] > 0 && group_of(suffix) != anchor;
    } else if (name.rfind("delta_", 0) == 0) {
      const auto suffix = std::string_view(name).substr(6);
      if (spec.delta_grouping == DeltaGrouping::Fine) {
        auto t = parse_tissue(suffix);
        is_free = t && data.tissue_fields[static_cast<int>(*t)] > 0;
      } else {
        is_free = data.group_fields[suffix == "ECTO" ? 0 : group_of(suffix)] > 0;
      }
      // With no carcinoma fields the reference multiplier is unanchored.
      is_free = is_free && data.group_fields[3] > 0;
    }
    mask.push_back(is_free);
  });
  return mask;
}

double normal_logpdf(double x, double mean, double var) {
  const double d = x - mean;
  return -0.5 * (kLog2Pi + std::log(var) + d * d / var);
}

double gamma_logpdf(double x, double shape, double rate) {
  if (!(x > 0.0)) return kNegInf;
  return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

double bivariate_normal_logpdf(double x, double y, double rho) {
  const double one_m = 1.0 - rho * rho;
  return -kLog2Pi - 0.5 * std::log(one_m) - 0.5 * (x * x - 2.0 * rho * x * y + y * y) / one_m;
}

double shifted_poisson_logpmf(int n, double mu) {
  if (n < 1) throw InputError("shifted Poisson count must be >= 1");
  if (!(mu >= 0.0)) throw InputError("shifted Poisson mean must be >= 0");
  const double k = n - 1;
  if (mu == 0.0) return k == 0 ? 0.0 : kNegInf;
  return k * std::log(mu) - mu - std::lgamma(k + 1.0);
}

double shifted_negbin_logpmf(int n, double mu, double kappa) {
  if (n < 1) throw InputError("shifted negative binomial count must be >= 1");
  if (!(mu >= 0.0) || !(kappa > 0.0)) throw InputError("negative binomial parameters invalid");
  const double k = n - 1;
  if (mu == 0.0) return k == 0 ? 0.0 : kNegInf;
  // lgamma(k + kappa) - lgamma(kappa) loses all precision for large kappa;
  // the finite product does not.
  double ratio = 0.0;
  if (k <= 1000.0) {
    for (int m = 0; m < n - 1; ++m) ratio += std::log(kappa + m);
  } else {
    ratio = std::lgamma(k + kappa) - std::lgamma(kappa);
  }
  return ratio - std::lgamma(k + 1.0) - kappa * std::log1p(mu / kappa) +
         k * (std::log(mu) - std::log(kappa + mu));
}

double loglik_conditional(const ModelSpec& spec, const ParamVector& theta,
                          const LatentState& latent, const ModelData& data) {
  spec.validate();
  validate_params(spec, theta);
  check_latent_dims(spec, latent, data);

  double total = 0.0;
  for (std::size_t j = 0; j < data.fields.size(); ++j) {
    const auto& f = data.fields[j];
    const double b = spec.has_field_effect() ? latent.b[j] : 0.0;
    switch (spec.family) {
      case Family::PLA_LMM:
      case Family::VA_LMM:
      case Family::CIRC_HET:
      case Family::VA_CONDITIONAL: {
        const double mean = gaussian_fixed_mean(spec, theta, f) + latent.a[f.specimen] + b;
        total += gaussian_field_loglik(gaussian_obs(spec.family, f), mean, theta.sigma2);
        break;
      }
      case Family::LVD_POIS:
        total += shifted_poisson_logpmf(
            f.n, std::exp(count_fixed_eta(spec, theta, f) + latent.a[f.specimen]));
        break;
      case Family::LVD_NEGBIN:
        total += shifted_negbin_logpmf(
            f.n, std::exp(count_fixed_eta(spec, theta, f) + latent.a[f.specimen]),
            theta.dispersion);
        break;
      case Family::JOINT: {
        const double mean =
            gaussian_fixed_mean(spec, theta, f) + theta.lambda_a * latent.a[f.specimen] + b;
        total += gaussian_field_loglik(gaussian_obs(spec.family, f), mean, theta.sigma2);
        total += shifted_poisson_logpmf(
            f.n, std::exp(count_fixed_eta(spec, theta, f) +
                          theta.lambda_n * latent.a_count[f.specimen]));
        break;
      }
    }
  }
  return total;
}

double loglik_conditional(const ModelSpec& spec, const ParamVector& theta,
                          const LatentState& latent, const Dataset& d) {
  return loglik_conditional(spec, theta, latent, ModelData::build(d));
}

double latent_logdensity(const ModelSpec& spec, const ParamVector& theta,
                         const LatentState& latent, const ModelData& data) {
  check_latent_dims(spec, latent, data);
  double total = 0.0;
  const int ns = data.n_specimens();
  if (spec.family == Family::JOINT) {
    const double rho = spec.rho_zero ? 0.0 : theta.rho;
    for (int i = 0; i < ns; ++i)
      total += bivariate_normal_logpdf(latent.a[i], latent.a_count[i], rho);
  } else {
    for (int i = 0; i < ns; ++i) total += normal_logpdf(latent.a[i], 0.0, theta.tau2);
  }
  if (spec.has_field_effect()) {
    for (std::size_t j = 0; j < data.fields.size(); ++j)
      total += normal_logpdf(latent.b[j], 0.0, field_variance(spec, theta, data.fields[j]));
  }
  return total;
}

double logprior(const ModelSpec& spec, const PriorSpec& priors, const ParamVector& theta) {
  double total = 0.0;
  const double fixed_var = 1.0 / priors.fixed_precision;
  bool in_support = true;
  for_each_param(spec, theta, [&](const std::string& name, Support s, const double& v) {
    if (!in_support) return;
    if (!std::isfinite(v)) {
      in_support = false;
      return;
    }
    switch (s) {
      case Support::Real:
        total += normal_logpdf(v, 0.0, fixed_var);
        break;
      case Support::Positive:
        if (!(v > 0.0)) {
          in_support = false;
        } else if (name.rfind("delta_", 0) == 0) {
          // Multipliers: Gamma prior on the group's field precision.
          total += gamma_logpdf(1.0 / (v * theta.nu2), priors.gamma_shape, priors.gamma_rate);
        } else if (name == "dispersion") {
          total += gamma_logpdf(v, priors.gamma_shape, priors.gamma_rate);
        } else {
          total += gamma_logpdf(1.0 / v, priors.gamma_shape, priors.gamma_rate);
        }
        break;
      case Support::Loading:
        if (std::abs(v) > priors.lambda_bound) in_support = false;
        else total -= std::log(2.0 * priors.lambda_bound);
        break;
      case Support::Correlation:
        if (std::abs(v) >= priors.rho_bound) in_support = false;
        else total -= std::log(2.0 * priors.rho_bound);
        break;
    }
  });
  return in_support ? total : kNegInf;
}

double logpost(const ModelSpec& spec, const PriorSpec& priors, const ParamVector& theta,
               const LatentState& latent, const ModelData& data) {
  const double lp = logprior(spec, priors, theta);
  if (lp == kNegInf) return kNegInf;
  return lp + loglik_conditional(spec, theta, latent, data) +
         latent_logdensity(spec, theta, latent, data);
}

double logpost(const ModelSpec& spec, const PriorSpec& priors, const ParamVector& theta,
               const LatentState& latent, const Dataset& d) {
  return logpost(spec, priors, theta, latent, ModelData::build(d));
}

double icc(double between_var, double residual_var) {
  if (!(between_var > 0.0) || !(residual_var > 0.0))
    throw InputError("icc: variances must be positive");
  return between_var / (between_var + residual_var);
}

Link outcome_link(Family family) {
  switch (family) {
    case Family::PLA_LMM:
      return Link::Identity;
    case Family::CIRC_HET:
      return Link::Logit;
    default:
      return Link::Log;
  }
}

std::string fold_change_phrase(double ratio) {
  char buf[64];
  if (ratio >= 1.0) std::snprintf(buf, sizeof(buf), "%.2f-fold increase", ratio);
  else std::snprintf(buf, sizeof(buf), "%.2f-fold reduction", 1.0 / ratio);
  return buf;
}

std::vector<EffectRow> effect_table(const ParamVector& theta, const ModelSpec& spec) {
  static constexpr std::array<const char*, 3> groups{"TZ", "CIN", "CARC"};
  std::vector<EffectRow> rows;
  auto add = [&](const std::string& prefix, const std::array<double, 3>& beta, bool exponentiate) {
    for (int k = 0; k < 3; ++k) {
      EffectRow r;
      r.parameter = prefix + groups[k];
      r.group = groups[k];
      r.coefficient = beta[k];
      if (exponentiate) {
        r.ratio = std::exp(beta[k]);
        r.phrase = fold_change_phrase(*r.ratio);
      }
      rows.push_back(std::move(r));
    }
  };
  if (spec.family == Family::JOINT) {
    add("beta_A_", theta.beta, true);
    add("beta_N_", theta.beta_n, true);
  } else {
    add("beta_", theta.beta, outcome_link(spec.family) != Link::Identity);
  }
  return rows;
}

}  // namespace ics
