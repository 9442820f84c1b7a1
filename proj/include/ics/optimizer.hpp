#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ics {

/// Objective returning f(x) and writing grad f(x) into `grad`. Minimized.
using ObjectiveFn = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad)>;

struct OptimizerOptions {
  int max_iterations = 500;
  double grad_tol = 1e-6;        // sup-norm of the gradient
  double rel_tol = 1e-10;        // relative objective change
  double fd_step = 1e-5;         // for finite-difference Hessians of the gradient
  int polish_steps = 8;          // Newton steps tried when quasi-Newton stalls
};

struct OptimizerResult {
  Eigen::VectorXd x;
  double value = 0.0;
  Eigen::VectorXd gradient;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  std::string message;
};

/// Symmetrized central-difference Hessian of a gradient function.
Eigen::MatrixXd fd_hessian(const ObjectiveFn& f, const Eigen::VectorXd& x, double step);

/// BFGS with a finite-difference initial Hessian and backtracking line
/// search; when the objective stops changing before the gradient is small,
/// a few damped Newton steps (finite-difference Hessian) are attempted.
/// `converged` is set only when the gradient sup-norm is below grad_tol.
OptimizerResult minimize_bfgs(const ObjectiveFn& f, Eigen::VectorXd x0,
                              const OptimizerOptions& opts = {});

}  // namespace ics
