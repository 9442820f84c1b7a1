#pragma once

#include <span>
#include <vector>

#include "ics/model.hpp"
#include "ics/parameterization.hpp"

namespace ics {

struct QuadratureOptions {
  int nodes = 20;  // Gauss-Hermite nodes per latent dimension
  int max_newton = 60;
  double newton_tol = 1e-11;
};

/// Log-likelihood with latent effects integrated out. Gaussian families are
/// marginalized in closed form; count families and JOINT use adaptive
/// Gauss-Hermite quadrature centred at each specimen's conditional mode (in
/// JOINT the field effects are integrated analytically first, leaving a 2-D
/// integral over the specimen pair). Specimens are evaluated in parallel and
/// reduced in a fixed order.
double marginal_loglik(const ModelSpec& spec, const ParamVector& theta, const ModelData& data,
                       const QuadratureOptions& opts = {});
double marginal_loglik(const ModelSpec& spec, const ParamVector& theta, const Dataset& d,
                       const QuadratureOptions& opts = {});

/// Single-threaded reference with the same per-specimen arithmetic.
double marginal_loglik_serial(const ModelSpec& spec, const ParamVector& theta,
                              const ModelData& data, const QuadratureOptions& opts = {});

/// Per-specimen contributions, in dataset order.
std::vector<double> marginal_loglik_contributions(const ModelSpec& spec, const ParamVector& theta,
                                                  const ModelData& data,
                                                  const QuadratureOptions& opts = {});

struct ValueGradient {
  double value = 0.0;
  std::vector<double> gradient;  // with respect to the unconstrained free parameters
};

/// Marginal log-likelihood and its exact gradient on the unconstrained scale
/// (forward-mode differentiation through the closed forms and through the
/// quadrature sums at fixed, mode-centred nodes).
ValueGradient marginal_loglik_gradient(const Parameterization& param, std::span<const double> z,
                                       const ModelData& data, const QuadratureOptions& opts = {});

}  // namespace ics
