#include "ics/quadrature.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>

#include <Eigen/Eigenvalues>

#include "ics/error.hpp"

namespace ics {

namespace {

GaussHermiteRule build_rule(int n) {
  // Jacobi matrix of the Hermite recurrence: off-diagonal sqrt(k/2).
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd sub(n > 1 ? n - 1 : 0);
  for (int k = 1; k < n; ++k) sub(k - 1) = std::sqrt(0.5 * k);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
  if (solver.info() != Eigen::Success) throw NumericalError("Gauss-Hermite eigensolve failed");

  GaussHermiteRule rule;
  const double mass = std::sqrt(std::numbers::pi);
  for (int k = 0; k < n; ++k) {
    const double x = solver.eigenvalues()(k);
    const double v0 = solver.eigenvectors()(0, k);
    rule.nodes.push_back(x);
    rule.weights.push_back(mass * v0 * v0);
  }
  // Symmetrize to remove eigensolver round-off.
  for (int k = 0; k < n / 2; ++k) {
    const int m = n - 1 - k;
    const double x = 0.5 * (rule.nodes[m] - rule.nodes[k]);
    const double w = 0.5 * (rule.weights[m] + rule.weights[k]);
    rule.nodes[k] = -x;
    rule.nodes[m] = x;
    rule.weights[k] = rule.weights[m] = w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  for (int k = 0; k < n; ++k)
    rule.log_weight_plus_sq.push_back(std::log(rule.weights[k]) + rule.nodes[k] * rule.nodes[k]);
  return rule;
}

}  // namespace

const GaussHermiteRule& gauss_hermite(int n) {
  if (n < 1 || n > 200) throw InputError("Gauss-Hermite node count must be in [1, 200]");
  static std::mutex mutex;
  static std::map<int, std::unique_ptr<GaussHermiteRule>> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto& slot = cache[n];
  if (!slot) slot = std::make_unique<GaussHermiteRule>(build_rule(n));
  return *slot;
}

}  // namespace ics
