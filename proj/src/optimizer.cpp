#include "ics/optimizer.hpp"

#include <cmath>
#include <limits>

namespace ics {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Evaluator {
  const ObjectiveFn& f;
  int count = 0;

  double operator()(const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    ++count;
    try {
      const double v = f(x, g);
      if (!std::isfinite(v) || !g.allFinite()) return kInf;
      return v;
    } catch (const std::exception&) {
      return kInf;
    }
  }
};

double sup_norm(const Eigen::VectorXd& g) { return g.size() ? g.cwiseAbs().maxCoeff() : 0.0; }

/// Positive-definite version of a symmetric matrix: eigenvalues replaced by
/// their absolute values, floored.
Eigen::MatrixXd make_positive(const Eigen::MatrixXd& h) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
  Eigen::VectorXd ev = es.eigenvalues().cwiseAbs();
  const double floor = std::max(1e-8, 1e-10 * ev.maxCoeff());
  for (Eigen::Index i = 0; i < ev.size(); ++i) ev[i] = std::max(ev[i], floor);
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

/// Backtracking search along p. Returns false when no decrease was found.
bool line_search(Evaluator& eval, const Eigen::VectorXd& x, double fx, const Eigen::VectorXd& g,
                 Eigen::VectorXd p, Eigen::VectorXd& x_new, double& f_new,
                 Eigen::VectorXd& g_new) {
  const double max_step = 5.0;
  const double pmax = sup_norm(p);
  if (pmax > max_step) p *= max_step / pmax;
  const double slope = g.dot(p);
  double t = 1.0;
  for (int k = 0; k < 60; ++k) {
    x_new = x + t * p;
    f_new = eval(x_new, g_new);
    if (f_new <= fx + 1e-4 * t * slope) return true;
    t *= 0.5;
  }
  // Accept a plain non-increase; near the optimum the Armijo margin is below
  // rounding.
  return f_new <= fx && std::isfinite(f_new);
}

}  // namespace

Eigen::MatrixXd fd_hessian(const ObjectiveFn& f, const Eigen::VectorXd& x, double step) {
  const Eigen::Index n = x.size();
  Eigen::MatrixXd h(n, n);
  Eigen::VectorXd gp(n), gm(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double hi = step * std::max(1.0, std::abs(x[i]));
    Eigen::VectorXd xp = x, xm = x;
    xp[i] += hi;
    xm[i] -= hi;
    f(xp, gp);
    f(xm, gm);
    h.col(i) = (gp - gm) / (2.0 * hi);
  }
  return 0.5 * (h + h.transpose());
}

OptimizerResult minimize_bfgs(const ObjectiveFn& f, Eigen::VectorXd x0,
                              const OptimizerOptions& opts) {
  Evaluator eval{f};
  OptimizerResult res;
  const Eigen::Index n = x0.size();
  Eigen::VectorXd x = std::move(x0), g(n);
  double fx = eval(x, g);
  if (!std::isfinite(fx)) {
    res.x = x;
    res.value = fx;
    res.gradient = g;
    res.evaluations = eval.count;
    res.message = "objective not finite at the starting point";
    return res;
  }

  auto hessian_at = [&](const Eigen::VectorXd& at) {
    return fd_hessian(
        [&](const Eigen::VectorXd& xx, Eigen::VectorXd& gg) { return eval(xx, gg); }, at,
        opts.fd_step);
  };

  Eigen::MatrixXd inv_h;
  {
    Eigen::MatrixXd h0 = hessian_at(x);
    if (h0.allFinite()) {
      inv_h = make_positive(h0).inverse();
    } else {
      inv_h = Eigen::MatrixXd::Identity(n, n);
    }
  }

  auto newton_polish = [&]() {
    for (int k = 0; k < opts.polish_steps; ++k) {
      if (sup_norm(g) < opts.grad_tol) return;
      Eigen::MatrixXd h = hessian_at(x);
      if (!h.allFinite()) return;
      Eigen::VectorXd p = -make_positive(h).ldlt().solve(g);
      // Full step first: close to the optimum the decrease can fall below
      // the rounding of f, so a tie with a smaller gradient also counts.
      Eigen::VectorXd xn = x + p, gn(n);
      double fn = eval(xn, gn);
      const bool tie = fn <= fx + 1e-13 * (1.0 + std::abs(fx)) && sup_norm(gn) < sup_norm(g);
      if (!(fn < fx || tie) && !line_search(eval, x, fx, g, p, xn, fn, gn)) return;
      x = xn;
      fx = fn;
      g = gn;
      ++res.iterations;
    }
  };

  int stall = 0;
  for (; res.iterations < opts.max_iterations; ++res.iterations) {
    if (sup_norm(g) < opts.grad_tol) break;
    Eigen::VectorXd p = -inv_h * g;
    if (!(g.dot(p) < 0.0)) {
      inv_h = Eigen::MatrixXd::Identity(n, n);
      p = -g;
    }
    Eigen::VectorXd xn(n), gn(n);
    double fn = kInf;
    if (!line_search(eval, x, fx, g, p, xn, fn, gn)) {
      newton_polish();
      break;
    }
    const Eigen::VectorXd s = xn - x;
    const Eigen::VectorXd y = gn - g;
    const double rel = std::abs(fn - fx) / (1.0 + std::abs(fx));
    x = xn;
    g = gn;
    fx = fn;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      const double r = 1.0 / sy;
      const Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n) - r * s * y.transpose();
      inv_h = v * inv_h * v.transpose() + r * s * s.transpose();
    }
    stall = rel < opts.rel_tol ? stall + 1 : 0;
    if (stall >= 2 && sup_norm(g) >= opts.grad_tol) {
      newton_polish();
      break;
    }
  }

  res.x = x;
  res.value = fx;
  res.gradient = g;
  res.evaluations = eval.count;
  res.converged = sup_norm(g) < opts.grad_tol;
  if (res.converged)
    res.message = "gradient below tolerance";
  else if (res.iterations >= opts.max_iterations)
    res.message = "iteration limit reached";
  else
    res.message = "stalled with gradient sup-norm " + std::to_string(sup_norm(g));
  return res;
}

}  // namespace ics
