#pragma once

// Reference computations used by the unit tests and the acceptance binary.
// They work from the raw Dataset (per-vessel values, dense covariance
// matrices, brute-force grids) and share no code with the library's
// likelihood paths.

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ics/marginal.hpp"
#include "ics/model.hpp"
#include "ics/parameterization.hpp"

namespace oracle {

inline constexpr double kLog2Pi = 1.8378770664093453;

inline int group_of(ics::TissueType t) { return static_cast<int>(ics::coarse(t)); }
inline double beta_of(const std::array<double, 3>& b, int g) { return g == 0 ? 0.0 : b[g - 1]; }

inline double logit(double p) { return std::log(p / (1.0 - p)); }

inline double log_poisson(int k, double log_mu) {
  return k * log_mu - std::exp(log_mu) - std::lgamma(k + 1.0);
}

inline double log_negbin(int k, double log_mu, double kappa) {
  const double mu = std::exp(log_mu);
  return std::lgamma(k + kappa) - std::lgamma(kappa) - std::lgamma(k + 1.0) +
         kappa * std::log(kappa / (kappa + mu)) + k * std::log(mu / (kappa + mu));
}

inline double log_mvn(const Eigen::VectorXd& r, const Eigen::MatrixXd& cov) {
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  const Eigen::MatrixXd L = llt.matrixL();
  const Eigen::VectorXd w = L.triangularView<Eigen::Lower>().solve(r);
  return -0.5 * r.size() * kLog2Pi - L.diagonal().array().log().sum() - 0.5 * w.squaredNorm();
}

inline double log_sum_exp(const std::vector<double>& v) {
  const double m = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

/// Marginal log-likelihood of a Gaussian family via the dense covariance of
/// every observation of a specimen.
inline double gaussian_dense_loglik(const ics::ModelSpec& spec, const ics::ParamVector& p,
                                    const ics::Dataset& d) {
  using ics::Family;
  double total = 0.0;
  for (const auto& s : d.specimens) {
    std::vector<double> y, m;
    std::vector<int> field;
    std::vector<double> fvar;
    for (std::size_t j = 0; j < s.fields.size(); ++j) {
      const auto& f = s.fields[j];
      const int g = group_of(f.tissue);
      double mean = p.alpha + beta_of(p.beta, g);
      if (spec.family == Family::PLA_LMM) {
        y.push_back(f.pla);
        m.push_back(mean);
        field.push_back(static_cast<int>(j));
        continue;
      }
      if (spec.family == Family::VA_CONDITIONAL) mean += p.gamma / f.lvd();
      double v = p.nu2;
      if (spec.family == Family::CIRC_HET && !spec.delta_equal) {
        int slot = -1;
        if (spec.delta_grouping == ics::DeltaGrouping::Coarse) {
          slot = g <= 2 ? g : -1;
        } else {
          slot = f.tissue == ics::TissueType::InvasiveCarcinoma ? -1 : static_cast<int>(f.tissue);
        }
        if (slot >= 0) v *= p.delta[slot];
      }
      fvar.push_back(v);
      for (const auto& ves : f.vessels) {
        y.push_back(spec.family == Family::CIRC_HET ? logit(ves.circularity) : std::log(ves.area));
        m.push_back(mean);
        field.push_back(static_cast<int>(j));
      }
    }
    const auto n = static_cast<Eigen::Index>(y.size());
    Eigen::MatrixXd cov = Eigen::MatrixXd::Constant(n, n, p.tau2);
    Eigen::VectorXd r(n);
    for (Eigen::Index a = 0; a < n; ++a) {
      r[a] = y[a] - m[a];
      cov(a, a) += p.sigma2;
      if (spec.family != Family::PLA_LMM)
        for (Eigen::Index b = 0; b < n; ++b)
          if (field[a] == field[b]) cov(a, b) += fvar[field[a]];
    }
    total += log_mvn(r, cov);
  }
  return total;
}

/// Count families: trapezoid rule over the specimen effect on
/// [-half_width sd, half_width sd] with `points` nodes.
inline double count_trapezoid_loglik(const ics::ModelSpec& spec, const ics::ParamVector& p,
                                     const ics::Dataset& d, int points = 200001,
                                     double half_width = 10.0) {
  const double sd = std::sqrt(p.tau2);
  const double h = 2.0 * half_width * sd / (points - 1);
  double total = 0.0;
  std::vector<double> terms(static_cast<std::size_t>(points));
  for (const auto& s : d.specimens) {
    for (int k = 0; k < points; ++k) {
      const double a = -half_width * sd + k * h;
      double lp = -0.5 * (kLog2Pi + std::log(p.tau2)) - 0.5 * a * a / p.tau2;
      for (const auto& f : s.fields) {
        const double eta = p.alpha + beta_of(p.beta, group_of(f.tissue)) + a;
        lp += spec.family == ics::Family::LVD_NEGBIN ? log_negbin(f.lvd() - 1, eta, p.dispersion)
                                                      : log_poisson(f.lvd() - 1, eta);
      }
      terms[k] = lp + std::log(h) + ((k == 0 || k == points - 1) ? std::log(0.5) : 0.0);
    }
    total += log_sum_exp(terms);
  }
  return total;
}

/// Joint model: dense-covariance Gaussian density of the log areas for a
/// given area effect, Poisson terms for a given count effect, and a
/// trapezoid grid over the bivariate normal specimen effects.
inline double joint_grid_loglik(const ics::ParamVector& p, const ics::Dataset& d, bool rho_zero = false,
                                int points = 1601, double half_width = 9.0) {
  const double rho = rho_zero ? 0.0 : p.rho;
  const double h = 2.0 * half_width / (points - 1);
  std::vector<double> grid(static_cast<std::size_t>(points)), tw(grid.size());
  for (int k = 0; k < points; ++k) {
    grid[k] = -half_width + k * h;
    tw[k] = std::log(h) + ((k == 0 || k == points - 1) ? std::log(0.5) : 0.0);
  }
  const double det = 1.0 - rho * rho;
  double total = 0.0;
  for (const auto& s : d.specimens) {
    std::vector<double> r;
    std::vector<int> field;
    std::vector<std::pair<int, int>> counts;  // (n - 1, group)
    for (std::size_t j = 0; j < s.fields.size(); ++j) {
      const auto& f = s.fields[j];
      const int g = group_of(f.tissue);
      for (const auto& v : f.vessels) {
        r.push_back(std::log(v.area) - p.alpha - beta_of(p.beta, g));
        field.push_back(static_cast<int>(j));
      }
      counts.emplace_back(f.lvd() - 1, g);
    }
    const auto n = static_cast<Eigen::Index>(r.size());
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index a = 0; a < n; ++a) {
      cov(a, a) += p.sigma2;
      for (Eigen::Index b = 0; b < n; ++b)
        if (field[a] == field[b]) cov(a, b) += p.nu2;
    }
    const Eigen::VectorXd rv = Eigen::Map<const Eigen::VectorXd>(r.data(), n);
    std::vector<double> fa(grid.size()), fn(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) {
      fa[k] = log_mvn(rv - Eigen::VectorXd::Constant(n, p.lambda_a * grid[k]), cov);
      double c = 0.0;
      for (const auto& [y, g] : counts)
        c += log_poisson(y, p.alpha_n + beta_of(p.beta_n, g) + p.lambda_n * grid[k]);
      fn[k] = c;
    }
    // log-sum-exp over the grid, accumulated row by row
    double m = -INFINITY;
    std::vector<double> row(grid.size());
    std::vector<double> rows(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
      for (std::size_t k = 0; k < grid.size(); ++k) {
        const double x = grid[i], y = grid[k];
        const double q = (x * x - 2.0 * rho * x * y + y * y) / det;
        row[k] = fa[i] + fn[k] - kLog2Pi - 0.5 * std::log(det) - 0.5 * q + tw[i] + tw[k];
      }
      rows[i] = log_sum_exp(row);
      m = std::max(m, rows[i]);
    }
    total += log_sum_exp(rows);
  }
  return total;
}

struct GradientCheck {
  double worst_relative = 0.0;
  std::string detail;
};

/// Compares the library gradient on the unconstrained scale with central
/// differences of marginal_loglik at `points` random points near `centre`.
inline GradientCheck check_gradient(const ics::ModelSpec& spec, const ics::ParamVector& centre,
                                    const ics::ModelData& data, int points, std::uint64_t seed,
                                    double step = 1e-5) {
  const ics::Parameterization param(spec, ics::PriorSpec{}, ics::free_mask(spec, data), centre);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> jitter(0.0, 0.25);
  GradientCheck out;
  for (int t = 0; t < points; ++t) {
    std::vector<double> z = param.to_unconstrained(centre);
    for (auto& v : z) v += jitter(rng);
    const auto vg = ics::marginal_loglik_gradient(param, z, data);
    for (std::size_t k = 0; k < z.size(); ++k) {
      auto zp = z, zm = z;
      zp[k] += step;
      zm[k] -= step;
      const double fd = (ics::marginal_loglik(spec, param.natural(zp), data) -
                         ics::marginal_loglik(spec, param.natural(zm), data)) /
                        (2.0 * step);
      const double rel = std::abs(vg.gradient[k] - fd) / std::max(1.0, std::abs(fd));
      if (rel > out.worst_relative) {
        out.worst_relative = rel;
        out.detail = param.free_names()[k] + ": analytic " + std::to_string(vg.gradient[k]) +
                     " vs finite difference " + std::to_string(fd);
      }
    }
  }
  return out;
}

}  // namespace oracle
