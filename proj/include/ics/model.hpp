#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ics/domain.hpp"
#include "ics/error.hpp"

namespace ics {

// ---------------------------------------------------------------------------
// Model families and their parameters
// ---------------------------------------------------------------------------

enum class Family {
  PLA_LMM,         // %LA, specimen effect + field error
  LVD_POIS,        // 1 + Poisson(mu), log mu = alpha + beta + a
  LVD_NEGBIN,      // 1 + NegBin(mu, kappa)
  VA_LMM,          // log area, specimen + field effects
  CIRC_HET,        // logit circularity, field variance scaled by delta per group
  VA_CONDITIONAL,  // VA_LMM with gamma / n_ij covariate
  JOINT,           // log area and shifted-Poisson LVD with linked specimen effects
};

std::string_view family_name(Family f);
std::optional<Family> parse_family(std::string_view name);

/// Grouping of the circularity field-variance multipliers: coarse gives one
/// multiplier per 4-level group, fine splits CIN into its three grades.
enum class DeltaGrouping { Coarse, Fine };

struct ModelSpec {
  Family family = Family::JOINT;
  DeltaGrouping delta_grouping = DeltaGrouping::Coarse;
  bool rho_zero = false;     // JOINT only
  bool delta_equal = false;  // CIRC_HET only: every multiplier fixed at 1

  /// Throws InputError when a constraint flag is set on a family that does
  /// not define it.
  void validate() const;

  /// Number of free field-variance multipliers (reference group excluded).
  int delta_count() const;

  bool has_field_effect() const;
  bool has_count_outcome() const;
  bool has_gaussian_outcome() const;
};

/// Parameter set for one model. In JOINT, `alpha`/`beta` belong to the
/// vessel-area outcome and `alpha_n`/`beta_n` to the count outcome. `beta`
/// holds effects for TZ, CIN and CARC against the ectocervix reference.
template <class T>
struct Params {
  T alpha{0.0};
  std::array<T, 3> beta{T(0.0), T(0.0), T(0.0)};
  T tau2{1.0};
  T nu2{1.0};
  T sigma2{1.0};
  std::vector<T> delta;  // carcinoma multiplier is fixed at 1 and not stored
  T gamma{0.0};
  T alpha_n{0.0};
  std::array<T, 3> beta_n{T(0.0), T(0.0), T(0.0)};
  T lambda_a{0.0};
  T lambda_n{0.0};
  T rho{0.0};
  T dispersion{1.0};
};

using ParamVector = Params<double>;

template <class T>
Params<T> cast_params(const ParamVector& p) {
  Params<T> out;
  out.alpha = p.alpha;
  for (int k = 0; k < 3; ++k) {
    out.beta[k] = p.beta[k];
    out.beta_n[k] = p.beta_n[k];
  }
  out.tau2 = p.tau2;
  out.nu2 = p.nu2;
  out.sigma2 = p.sigma2;
  out.delta.assign(p.delta.begin(), p.delta.end());
  out.gamma = p.gamma;
  out.alpha_n = p.alpha_n;
  out.lambda_a = p.lambda_a;
  out.lambda_n = p.lambda_n;
  out.rho = p.rho;
  out.dispersion = p.dispersion;
  return out;
}

/// ParamVector with every entry the family uses sized and set to a neutral
/// value (zero effects, unit variances and multipliers).
ParamVector default_params(const ModelSpec& spec);

enum class Support { Real, Positive, Loading, Correlation };

struct ParamInfo {
  std::string name;
  Support support;
};

/// Visits every parameter of the family in canonical order, calling
/// f(name, support, value_ref).
template <class P, class F>
void for_each_param(const ModelSpec& spec, P& p, F&& f) {
  static constexpr std::array<const char*, 3> groups{"TZ", "CIN", "CARC"};
  if (spec.family == Family::JOINT) {
    f(std::string("alpha_A"), Support::Real, p.alpha);
    for (int k = 0; k < 3; ++k) f(std::string("beta_A_") + groups[k], Support::Real, p.beta[k]);
    f(std::string("lambda_A"), Support::Loading, p.lambda_a);
    f(std::string("nu2"), Support::Positive, p.nu2);
    f(std::string("sigma2"), Support::Positive, p.sigma2);
    f(std::string("alpha_N"), Support::Real, p.alpha_n);
    for (int k = 0; k < 3; ++k) f(std::string("beta_N_") + groups[k], Support::Real, p.beta_n[k]);
    f(std::string("lambda_N"), Support::Loading, p.lambda_n);
    if (!spec.rho_zero) f(std::string("rho"), Support::Correlation, p.rho);
    return;
  }
  f(std::string("alpha"), Support::Real, p.alpha);
  for (int k = 0; k < 3; ++k) f(std::string("beta_") + groups[k], Support::Real, p.beta[k]);
  if (spec.family == Family::VA_CONDITIONAL) f(std::string("gamma"), Support::Real, p.gamma);
  f(std::string("tau2"), Support::Positive, p.tau2);
  if (spec.has_field_effect()) f(std::string("nu2"), Support::Positive, p.nu2);
  if (spec.has_gaussian_outcome()) f(std::string("sigma2"), Support::Positive, p.sigma2);
  if (spec.family == Family::CIRC_HET) {
    static constexpr std::array<const char*, 3> coarse_slots{"ECTO", "TZ", "CIN"};
    static constexpr std::array<const char*, 5> fine_slots{"ECTO", "TZ", "CIN1", "CIN2", "CIN3"};
    const int n = spec.delta_count();
    if (static_cast<int>(p.delta.size()) < n)
      throw InputError("ParamVector.delta has " + std::to_string(p.delta.size()) +
                       " entries, family needs " + std::to_string(n));
    for (int k = 0; k < n; ++k) {
      const char* slot =
          spec.delta_grouping == DeltaGrouping::Coarse ? coarse_slots[k] : fine_slots[k];
      f(std::string("delta_") + slot, Support::Positive, p.delta[k]);
    }
  }
  if (spec.family == Family::LVD_NEGBIN)
    f(std::string("dispersion"), Support::Positive, p.dispersion);
}

std::vector<ParamInfo> parameter_layout(const ModelSpec& spec);
std::vector<std::string> parameter_names(const ModelSpec& spec);
std::vector<double> pack(const ModelSpec& spec, const ParamVector& p);
ParamVector unpack(const ModelSpec& spec, std::span<const double> values);
ParamVector unpack(const ModelSpec& spec, std::span<const double> values, ParamVector base);

/// Throws InputError for parameters outside their natural support.
void validate_params(const ModelSpec& spec, const ParamVector& p);

// ---------------------------------------------------------------------------
// Priors and latent state
// ---------------------------------------------------------------------------

struct PriorSpec {
  double fixed_precision = 1e-6;  // Normal(0, precision) on alpha, beta, gamma
  double gamma_shape = 1e-3;      // Gamma(shape, rate) on each precision
  double gamma_rate = 1e-3;
  double lambda_bound = 10.0;  // Uniform(-b, b) on loadings
  double rho_bound = 0.95;     // Uniform(-b, b) on rho

  void validate() const;
  /// Hyperparameters for the sensitivity reruns: variances of the vague
  /// priors multiplied by `factor`.
  PriorSpec scaled(double factor) const;
};

/// Latent effects. `a` holds the specimen effects (a^A in JOINT), `a_count`
/// the count-outcome specimen effects of JOINT, `b` one effect per field in
/// dataset order for families with a field level.
struct LatentState {
  std::vector<double> a;
  std::vector<double> a_count;
  std::vector<double> b;
};

// ---------------------------------------------------------------------------
// Compiled data
// ---------------------------------------------------------------------------

/// Field mean and within-field sum of squares of a transformed vessel outcome.
struct GaussianSummary {
  double mean = 0.0;
  double ss = 0.0;
};

struct FieldData {
  int specimen = 0;
  int group = 0;  // coarse group index, 0 = reference
  TissueType tissue = TissueType::ControlEctocervix;
  int n = 1;  // vessel count (LVD)
  double pla = 0.0;
  GaussianSummary log_area;
  GaussianSummary logit_circ;
};

/// Sufficient statistics of a Dataset, flattened in dataset order.
struct ModelData {
  std::vector<FieldData> fields;
  std::vector<int> specimen_begin;  // field range of specimen i: [begin[i], begin[i+1])
  std::size_t n_vessels = 0;
  std::array<int, kCoarseGroups> group_fields{};
  std::array<int, kTissueCodes> tissue_fields{};
  /// Field indices with each specimen's range sorted by content, so sums
  /// over a specimen's fields do not depend on the input order.
  std::vector<int> canonical;

  static ModelData build(const Dataset& d);
  int n_specimens() const { return static_cast<int>(specimen_begin.size()) - 1; }
  int n_fields() const { return static_cast<int>(fields.size()); }
  const FieldData& sorted_field(int j) const {
    return fields[canonical.empty() ? j : canonical[j]];
  }
};

/// Gaussian observation of one field for the family: count, mean and
/// within-field sum of squares (n = 1, ss = 0 for %LA).
struct GaussianObs {
  int n;
  double mean;
  double ss;
};
GaussianObs gaussian_obs(Family family, const FieldData& f);

/// Index into Params::delta for a tissue, or -1 for the carcinoma reference.
int delta_slot(const ModelSpec& spec, TissueType t);

/// Parameters that the data can identify: beta for groups without fields and
/// multipliers for absent tissue slots are held at their defaults.
std::vector<bool> free_mask(const ModelSpec& spec, const ModelData& data);

template <class T>
T group_effect(const std::array<T, 3>& beta, int group) {
  return group == 0 ? T(0.0) : beta[group - 1];
}

/// Variance of the field effect b_ij for a field (0 for %LA).
template <class T>
T field_variance(const ModelSpec& spec, const Params<T>& p, const FieldData& f) {
  if (!spec.has_field_effect()) return T(0.0);
  if (spec.family == Family::CIRC_HET && !spec.delta_equal) {
    const int slot = delta_slot(spec, f.tissue);
    if (slot >= 0) return p.delta[slot] * p.nu2;
  }
  return p.nu2;
}

/// Fixed part of the Gaussian outcome mean for a field (excludes random
/// effects).
template <class T>
T gaussian_fixed_mean(const ModelSpec& spec, const Params<T>& p, const FieldData& f) {
  T m = p.alpha + group_effect(p.beta, f.group);
  if (spec.family == Family::VA_CONDITIONAL) m = m + p.gamma / static_cast<double>(f.n);
  return m;
}

/// Fixed part of the log count mean for a field.
template <class T>
T count_fixed_eta(const ModelSpec& spec, const Params<T>& p, const FieldData& f) {
  if (spec.family == Family::JOINT) return p.alpha_n + group_effect(p.beta_n, f.group);
  return p.alpha + group_effect(p.beta, f.group);
}

// ---------------------------------------------------------------------------
// Kernels
// ---------------------------------------------------------------------------

/// log P(N = n) for N = 1 + Poisson(mu).
double shifted_poisson_logpmf(int n, double mu);

/// log P(N = n) for N = 1 + K, K negative binomial with mean mu and
/// Var K = mu + mu^2 / kappa.
double shifted_negbin_logpmf(int n, double mu, double kappa);

/// Log conditional density of the observed outcomes given latent effects.
double loglik_conditional(const ModelSpec& spec, const ParamVector& theta,
                          const LatentState& latent, const ModelData& data);
double loglik_conditional(const ModelSpec& spec, const ParamVector& theta,
                          const LatentState& latent, const Dataset& d);

/// Log density of the latent effects given the parameters.
double latent_logdensity(const ModelSpec& spec, const ParamVector& theta,
                         const LatentState& latent, const ModelData& data);

/// Sum of log prior densities; -inf outside the support. Gamma priors are
/// densities of the precisions 1/variance.
double logprior(const ModelSpec& spec, const PriorSpec& priors, const ParamVector& theta);

double logpost(const ModelSpec& spec, const PriorSpec& priors, const ParamVector& theta,
               const LatentState& latent, const ModelData& data);
double logpost(const ModelSpec& spec, const PriorSpec& priors, const ParamVector& theta,
               const LatentState& latent, const Dataset& d);

double normal_logpdf(double x, double mean, double var);
double gamma_logpdf(double x, double shape, double rate);
/// Standard bivariate normal log density with correlation rho.
double bivariate_normal_logpdf(double x, double y, double rho);

/// Intra-cluster correlation between / (between + residual).
double icc(double between_var, double residual_var);

enum class Link { Identity, Log, Logit };
Link outcome_link(Family family);

struct EffectRow {
  std::string parameter;  // e.g. beta_N_CARC
  std::string group;      // TZ, CIN, CARC
  double coefficient = 0.0;
  std::optional<double> ratio;  // exp(beta) for log/logit links
  std::string phrase;           // "3.85-fold reduction", empty for identity link
};

/// Group effects relative to the ectocervix reference.
std::vector<EffectRow> effect_table(const ParamVector& theta, const ModelSpec& spec);
std::string fold_change_phrase(double ratio);

}  // namespace ics
