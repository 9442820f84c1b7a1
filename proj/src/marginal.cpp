#include "ics/marginal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "ics/dual.hpp"
#include "ics/quadrature.hpp"

namespace ics {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

using std::exp;
using std::log;
using std::log1p;

template <class T>
T log_sum_exp(const std::vector<T>& xs) {
  double m = -std::numeric_limits<double>::infinity();
  for (const auto& x : xs) m = std::max(m, value(x));
  if (!std::isfinite(m)) return T(m);
  T s(0.0);
  for (const auto& x : xs) s += exp(x - m);
  return log(s) + m;
}

/// Fields of one specimen sharing a coarse group: for a Poisson count part
/// the specimen likelihood only depends on these totals.
struct CountCell {
  int group = 0;
  double k_sum = 0.0;  // sum of N - 1
  double fields = 0.0;
  double log_fact = 0.0;  // sum of log((N - 1)!)
};

std::vector<CountCell> count_cells(const ModelData& data, int i) {
  std::vector<CountCell> cells;
  for (int j = data.specimen_begin[i]; j < data.specimen_begin[i + 1]; ++j) {
    const auto& f = data.sorted_field(j);
    auto it = std::find_if(cells.begin(), cells.end(),
                           [&](const CountCell& c) { return c.group == f.group; });
    if (it == cells.end()) {
      cells.push_back({f.group, 0.0, 0.0, 0.0});
      it = cells.end() - 1;
    }
    const double k = f.n - 1;
    it->k_sum += k;
    it->fields += 1.0;
    it->log_fact += std::lgamma(k + 1.0);
  }
  return cells;
}

// ---------------------------------------------------------------------------
// Gaussian families: closed form
// ---------------------------------------------------------------------------

template <class T>
T gaussian_specimen(const ModelSpec& spec, const Params<T>& p, const ModelData& data, int i) {
  T total(0.0), s0(0.0), s1(0.0), q(0.0), logdet(0.0);
  const T log_sigma2 = log(p.sigma2);
  int m = 0;
  for (int j = data.specimen_begin[i]; j < data.specimen_begin[i + 1]; ++j, ++m) {
    const auto& f = data.sorted_field(j);
    const auto obs = gaussian_obs(spec.family, f);
    const double n = obs.n;
    const T w = field_variance(spec, p, f) + p.sigma2 / n;
    // Within-field deviations: independent of the field mean.
    if (obs.n > 1) {
      total += -0.5 * (n - 1.0) * kLog2Pi - 0.5 * (n - 1.0) * log_sigma2 - 0.5 * std::log(n) -
               0.5 * obs.ss / p.sigma2;
    }
    const T r = obs.mean - gaussian_fixed_mean(spec, p, f);
    s0 += 1.0 / w;
    s1 += r / w;
    q += r * r / w;
    logdet += log(w);
  }
  // Field means share the specimen effect: covariance diag(w) + tau2 * 11'.
  const T denom = 1.0 + p.tau2 * s0;
  total += -0.5 * m * kLog2Pi - 0.5 * (logdet + log(denom)) -
           0.5 * (q - p.tau2 * s1 * s1 / denom);
  return total;
}

// ---------------------------------------------------------------------------
// Count families: 1-D adaptive Gauss-Hermite over the specimen effect
// ---------------------------------------------------------------------------

template <class T>
T count_given_effect(const ModelSpec& spec, const Params<T>& p, const ModelData& data, int i,
                     const std::vector<CountCell>& cells, double a) {
  T total(0.0);
  if (spec.family == Family::LVD_NEGBIN) {
    const T& kappa = p.dispersion;
    for (int j = data.specimen_begin[i]; j < data.specimen_begin[i + 1]; ++j) {
      const auto& f = data.sorted_field(j);
      const int k = f.n - 1;
      const T eta = count_fixed_eta(spec, p, f) + a;
      const T mu = exp(eta);
      // lgamma(k + kappa) - lgamma(kappa) as a finite product: stays exact as
      // kappa grows towards the Poisson limit.
      for (int m = 0; m < k; ++m) total += log(kappa + static_cast<double>(m));
      total += -std::lgamma(k + 1.0) - kappa * log1p(mu / kappa) + k * (eta - log(kappa + mu));
    }
    return total;
  }
  for (const auto& c : cells) {
    const T eta = (spec.family == Family::JOINT ? p.alpha_n + group_effect(p.beta_n, c.group)
                                                : p.alpha + group_effect(p.beta, c.group)) +
                  a;
    total += c.k_sum * eta - c.fields * exp(eta) - c.log_fact;
  }
  return total;
}

struct Mode1D {
  double mode = 0.0;
  double scale = 1.0;
  bool ok = false;
};

Mode1D count_mode(const ModelSpec& spec, const ParamVector& p, const ModelData& data, int i,
                  const std::vector<CountCell>& cells, const QuadratureOptions& opts) {
  auto derivs = [&](double a, double& g, double& h) {
    g = -a / p.tau2;
    h = -1.0 / p.tau2;
    if (spec.family == Family::LVD_NEGBIN) {
      const double kappa = p.dispersion;
      for (int j = data.specimen_begin[i]; j < data.specimen_begin[i + 1]; ++j) {
        const auto& f = data.sorted_field(j);
        const double k = f.n - 1;
        const double mu = std::exp(count_fixed_eta(spec, p, f) + a);
        g += k - (k + kappa) * mu / (kappa + mu);
        h -= (k + kappa) * mu * kappa / ((kappa + mu) * (kappa + mu));
      }
    } else {
      for (const auto& c : cells) {
        const double mu = std::exp(p.alpha + group_effect(p.beta, c.group) + a);
        g += c.k_sum - c.fields * mu;
        h -= c.fields * mu;
      }
    }
  };
  auto objective = [&](double a) {
    return count_given_effect(spec, p, data, i, cells, a) - 0.5 * a * a / p.tau2;
  };

  Mode1D out;
  double a = 0.0;
  double fa = objective(a);
  for (int it = 0; it < opts.max_newton; ++it) {
    double g = 0.0, h = 0.0;
    derivs(a, g, h);
    if (!std::isfinite(g) || !(h < 0.0)) return out;
    double step = -g / h;
    double next = a + step;
    double fn = objective(next);
    int halvings = 0;
    while (!(fn >= fa - 1e-12 * std::abs(fa)) && halvings < 40) {
      step *= 0.5;
      next = a + step;
      fn = objective(next);
      ++halvings;
    }
    a = next;
    fa = fn;
    if (std::abs(step) < opts.newton_tol * (1.0 + std::abs(a))) {
      derivs(a, g, h);
      if (!(h < 0.0) || !std::isfinite(a)) return out;
      out.mode = a;
      out.scale = 1.0 / std::sqrt(-h);
      out.ok = true;
      return out;
    }
  }
  return out;
}

template <class T>
T count_specimen(const ModelSpec& spec, const Params<T>& p, const ParamVector& pd,
                 const ModelData& data, int i, const QuadratureOptions& opts) {
  const auto cells = count_cells(data, i);
  if (pd.tau2 == 0.0) return count_given_effect(spec, p, data, i, cells, 0.0);

  Mode1D mode = count_mode(spec, pd, data, i, cells, opts);
  int nodes = opts.nodes;
  if (!mode.ok) {
    // Non-adaptive fallback on the prior scale with a wider rule.
    mode.mode = 0.0;
    mode.scale = std::sqrt(pd.tau2);
    nodes = std::min(200, 2 * opts.nodes);
  }
  const auto& rule = gauss_hermite(nodes);
  const double spread = std::numbers::sqrt2 * mode.scale;
  const T log_tau2 = log(p.tau2);
  std::vector<T> terms;
  terms.reserve(rule.nodes.size());
  for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
    const double a = mode.mode + spread * rule.nodes[k];
    terms.push_back(rule.log_weight_plus_sq[k] + count_given_effect(spec, p, data, i, cells, a) -
                    0.5 * kLog2Pi - 0.5 * log_tau2 - 0.5 * a * a / p.tau2);
  }
  T result = log_sum_exp(terms) + std::log(spread);
  if (!std::isfinite(value(result))) {
    std::ostringstream msg;
    msg << "quadrature non-finite for specimen " << i << " (mode " << mode.mode << ", scale "
        << mode.scale << ", nodes " << nodes << ", adaptive " << mode.ok << ")";
    throw NumericalError(msg.str());
  }
  return result;
}

// ---------------------------------------------------------------------------
// JOINT: field effects integrated analytically, 2-D quadrature over (a^A, a^N)
// ---------------------------------------------------------------------------

template <class T>
struct JointAreaTerms {
  T constant{0.0};  // everything independent of a^A
  T s0{0.0};        // sum 1/w
  T s1{0.0};        // sum r/w
  T q{0.0};         // sum r^2/w
};

template <class T>
JointAreaTerms<T> joint_area_terms(const ModelSpec& spec, const Params<T>& p,
                                   const ModelData& data, int i) {
  JointAreaTerms<T> out;
  const T log_sigma2 = log(p.sigma2);
  for (int j = data.specimen_begin[i]; j < data.specimen_begin[i + 1]; ++j) {
    const auto& f = data.sorted_field(j);
    const double n = f.n;
    const T w = p.nu2 + p.sigma2 / n;
    out.constant += -0.5 * n * kLog2Pi - 0.5 * (n - 1.0) * log_sigma2 - 0.5 * std::log(n) -
                    0.5 * f.log_area.ss / p.sigma2 - 0.5 * log(w);
    const T r = f.log_area.mean - gaussian_fixed_mean(spec, p, f);
    out.s0 += 1.0 / w;
    out.s1 += r / w;
    out.q += r * r / w;
  }
  return out;
}

struct Mode2D {
  double m1 = 0.0, m2 = 0.0;
  double l11 = 1.0, l21 = 0.0, l22 = 1.0;  // Cholesky factor of the posterior covariance
  bool ok = false;
};

Mode2D joint_mode(const ParamVector& p, double rho, const JointAreaTerms<double>& area,
                  const std::vector<CountCell>& cells, const QuadratureOptions& opts) {
  const double one_m = 1.0 - rho * rho;
  auto objective = [&](double x, double y) {
    double v = -0.5 * (area.q - 2.0 * p.lambda_a * x * area.s1 +
                       p.lambda_a * p.lambda_a * x * x * area.s0);
    for (const auto& c : cells) {
      const double eta = p.alpha_n + group_effect(p.beta_n, c.group) + p.lambda_n * y;
      v += c.k_sum * eta - c.fields * std::exp(eta);
    }
    return v - 0.5 * (x * x - 2.0 * rho * x * y + y * y) / one_m;
  };
  auto derivs = [&](double x, double y, double g[2], double h[3]) {
    double count_g = 0.0, count_h = 0.0;
    for (const auto& c : cells) {
      const double mu = std::exp(p.alpha_n + group_effect(p.beta_n, c.group) + p.lambda_n * y);
      count_g += c.k_sum - c.fields * mu;
      count_h += c.fields * mu;
    }
    g[0] = p.lambda_a * (area.s1 - p.lambda_a * x * area.s0) - (x - rho * y) / one_m;
    g[1] = p.lambda_n * count_g - (y - rho * x) / one_m;
    h[0] = -p.lambda_a * p.lambda_a * area.s0 - 1.0 / one_m;
    h[1] = rho / one_m;
    h[2] = -p.lambda_n * p.lambda_n * count_h - 1.0 / one_m;
  };

  Mode2D out;
  double x = 0.0, y = 0.0;
  double fx = objective(x, y);
  for (int it = 0; it < opts.max_newton; ++it) {
    double g[2], h[3];
    derivs(x, y, g, h);
    const double det = h[0] * h[2] - h[1] * h[1];
    if (!std::isfinite(det) || !(det > 0.0) || !(h[0] < 0.0)) return out;
    double dx = -(h[2] * g[0] - h[1] * g[1]) / det;
    double dy = -(-h[1] * g[0] + h[0] * g[1]) / det;
    double nx = x + dx, ny = y + dy;
    double fn = objective(nx, ny);
    int halvings = 0;
    while (!(fn >= fx - 1e-12 * std::abs(fx)) && halvings < 40) {
      dx *= 0.5;
      dy *= 0.5;
      nx = x + dx;
      ny = y + dy;
      fn = objective(nx, ny);
      ++halvings;
    }
    x = nx;
    y = ny;
    fx = fn;
    if (std::abs(dx) + std::abs(dy) < opts.newton_tol * (1.0 + std::abs(x) + std::abs(y))) {
      derivs(x, y, g, h);
      // Posterior covariance = (-H)^{-1}; factor it.
      const double a = -h[0], b = -h[1], c = -h[2];
      const double d = a * c - b * b;
      if (!(d > 0.0)) return out;
      const double c11 = c / d, c12 = -b / d, c22 = a / d;
      out.m1 = x;
      out.m2 = y;
      out.l11 = std::sqrt(c11);
      out.l21 = c12 / out.l11;
      out.l22 = std::sqrt(c22 - out.l21 * out.l21);
      out.ok = std::isfinite(out.l22);
      return out;
    }
  }
  return out;
}

template <class T>
T joint_specimen(const ModelSpec& spec, const Params<T>& p, const ParamVector& pd,
                 const ModelData& data, int i, const QuadratureOptions& opts) {
  const auto cells = count_cells(data, i);
  const auto area = joint_area_terms(spec, p, data, i);
  const double rho_d = spec.rho_zero ? 0.0 : pd.rho;
  JointAreaTerms<double> area_d{value(area.constant), value(area.s0), value(area.s1),
                                value(area.q)};

  Mode2D mode = joint_mode(pd, rho_d, area_d, cells, opts);
  int nodes = opts.nodes;
  if (!mode.ok) {
    mode = Mode2D{};
    mode.l11 = 1.0;
    mode.l21 = rho_d;
    mode.l22 = std::sqrt(1.0 - rho_d * rho_d);
    nodes = std::min(200, 2 * opts.nodes);
  }
  const auto& rule = gauss_hermite(nodes);
  const double sq2 = std::numbers::sqrt2;

  const T rho = spec.rho_zero ? T(0.0) : p.rho;
  const T one_m = 1.0 - rho * rho;
  const T prior_const = -kLog2Pi - 0.5 * log(one_m);
  T log_fact(0.0);
  for (const auto& c : cells) log_fact += c.log_fact;

  std::vector<T> terms;
  terms.reserve(rule.nodes.size() * rule.nodes.size());
  for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
    for (std::size_t l = 0; l < rule.nodes.size(); ++l) {
      const double u = sq2 * rule.nodes[k], v = sq2 * rule.nodes[l];
      const double x = mode.m1 + mode.l11 * u;
      const double y = mode.m2 + mode.l21 * u + mode.l22 * v;
      T term = rule.log_weight_plus_sq[k] + rule.log_weight_plus_sq[l];
      term += -0.5 * (area.q - 2.0 * x * (p.lambda_a * area.s1) +
                      x * x * (p.lambda_a * p.lambda_a * area.s0));
      for (const auto& c : cells) {
        const T eta = p.alpha_n + group_effect(p.beta_n, c.group) + p.lambda_n * y;
        term += c.k_sum * eta - c.fields * exp(eta);
      }
      term += prior_const - 0.5 * (x * x - 2.0 * x * y * rho + y * y) / one_m;
      terms.push_back(term);
    }
  }
  T result = log_sum_exp(terms) + std::log(2.0 * mode.l11 * mode.l22) + area.constant - log_fact;
  if (!std::isfinite(value(result))) {
    std::ostringstream msg;
    msg << "joint quadrature non-finite for specimen " << i << " (mode " << mode.m1 << ","
        << mode.m2 << ", nodes " << nodes << ", adaptive " << mode.ok << ")";
    throw NumericalError(msg.str());
  }
  return result;
}

template <class T>
T specimen_marginal(const ModelSpec& spec, const Params<T>& p, const ParamVector& pd,
                    const ModelData& data, int i, const QuadratureOptions& opts) {
  switch (spec.family) {
    case Family::PLA_LMM:
    case Family::VA_LMM:
    case Family::CIRC_HET:
    case Family::VA_CONDITIONAL:
      return gaussian_specimen(spec, p, data, i);
    case Family::LVD_POIS:
    case Family::LVD_NEGBIN:
      return count_specimen(spec, p, pd, data, i, opts);
    case Family::JOINT:
      return joint_specimen(spec, p, pd, data, i, opts);
  }
  return T(0.0);
}

/// Sum in ascending order of value: the result does not depend on the order
/// in which specimens appear.
template <class T>
T ordered_sum(std::vector<T> xs) {
  std::sort(xs.begin(), xs.end(), [](const T& a, const T& b) { return value(a) < value(b); });
  T s(0.0);
  for (const auto& x : xs) s += x;
  return s;
}

void check_theta(const ModelSpec& spec, const ParamVector& theta, const ModelData& data) {
  spec.validate();
  ParamVector probe = theta;
  if (probe.tau2 == 0.0) probe.tau2 = 1.0;  // tau2 = 0 means "no specimen effect"
  validate_params(spec, probe);
  if (data.n_specimens() < 1) throw InputError("marginal_loglik: empty data");
}

}  // namespace

std::vector<double> marginal_loglik_contributions(const ModelSpec& spec, const ParamVector& theta,
                                                  const ModelData& data,
                                                  const QuadratureOptions& opts) {
  check_theta(spec, theta, data);
  const int ns = data.n_specimens();
  std::vector<double> out(static_cast<std::size_t>(ns));
  std::string error;
#pragma omp parallel for schedule(dynamic, 4)
  for (int i = 0; i < ns; ++i) {
    try {
      out[i] = specimen_marginal<double>(spec, theta, theta, data, i, opts);
    } catch (const std::exception& e) {
#pragma omp critical(ics_marginal_error)
      if (error.empty()) error = e.what();
    }
  }
  if (!error.empty()) throw NumericalError(error);
  return out;
}

double marginal_loglik(const ModelSpec& spec, const ParamVector& theta, const ModelData& data,
                       const QuadratureOptions& opts) {
  return ordered_sum(marginal_loglik_contributions(spec, theta, data, opts));
}

double marginal_loglik(const ModelSpec& spec, const ParamVector& theta, const Dataset& d,
                       const QuadratureOptions& opts) {
  return marginal_loglik(spec, theta, ModelData::build(d), opts);
}

double marginal_loglik_serial(const ModelSpec& spec, const ParamVector& theta,
                              const ModelData& data, const QuadratureOptions& opts) {
  check_theta(spec, theta, data);
  std::vector<double> out;
  for (int i = 0; i < data.n_specimens(); ++i)
    out.push_back(specimen_marginal<double>(spec, theta, theta, data, i, opts));
  return ordered_sum(std::move(out));
}

ValueGradient marginal_loglik_gradient(const Parameterization& param, std::span<const double> z,
                                       const ModelData& data, const QuadratureOptions& opts) {
  const int nf = param.n_free();
  if (nf > kMaxDual) throw InputError("too many free parameters for the gradient");
  if (static_cast<int>(z.size()) != nf) throw InputError("gradient: wrong parameter count");
  std::vector<Dual> zd;
  for (int k = 0; k < nf; ++k) zd.push_back(Dual::variable(z[k], k));
  const Params<Dual> pd = param.from_unconstrained<Dual>(zd);
  const ParamVector pv = param.natural(z);
  const ModelSpec& spec = param.spec();
  check_theta(spec, pv, data);

  const int ns = data.n_specimens();
  std::vector<Dual> contrib(static_cast<std::size_t>(ns));
  std::string error;
#pragma omp parallel for schedule(dynamic, 4)
  for (int i = 0; i < ns; ++i) {
    try {
      contrib[i] = specimen_marginal<Dual>(spec, pd, pv, data, i, opts);
    } catch (const std::exception& e) {
#pragma omp critical(ics_marginal_error)
      if (error.empty()) error = e.what();
    }
  }
  if (!error.empty()) throw NumericalError(error);
  const Dual total = ordered_sum(std::move(contrib));
  ValueGradient out;
  out.value = total.v;
  out.gradient.assign(total.d.begin(), total.d.begin() + nf);
  return out;
}

}  // namespace ics
