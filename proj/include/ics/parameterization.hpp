#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "ics/model.hpp"

namespace ics {

/// Maps the free parameters of a family to an unconstrained vector:
/// log for variances and multipliers, tanh for rho within its bound and the
/// algebraic sigmoid z / sqrt(1 + z^2) for loadings within theirs. Held
/// (non-free) parameters keep the values of `base`.
class Parameterization {
 public:
  Parameterization(ModelSpec spec, PriorSpec bounds, std::vector<bool> free_mask,
                   ParamVector base);

  const ModelSpec& spec() const { return spec_; }
  const PriorSpec& bounds() const { return bounds_; }
  const std::vector<ParamInfo>& layout() const { return layout_; }
  const std::vector<int>& free_indices() const { return free_; }
  const ParamVector& base() const { return base_; }
  int n_free() const { return static_cast<int>(free_.size()); }
  std::vector<std::string> free_names() const;

  std::vector<double> to_unconstrained(const ParamVector& p) const;
  ParamVector natural(std::span<const double> z) const;
  /// d(natural)/dz for each free parameter.
  std::vector<double> jacobian_diag(std::span<const double> z) const;

  template <class T>
  Params<T> from_unconstrained(std::span<const T> z) const {
    Params<T> out = cast_params<T>(base_);
    std::size_t idx = 0, k = 0;
    for_each_param(spec_, out, [&](const std::string&, Support s, T& v) {
      if (k < free_.size() && free_[k] == static_cast<int>(idx)) {
        v = to_natural(s, z[k]);
        ++k;
      }
      ++idx;
    });
    return out;
  }

  template <class T>
  T to_natural(Support s, const T& z) const {
    using std::exp;
    using std::sqrt;
    using std::tanh;
    switch (s) {
      case Support::Real:
        return z;
      case Support::Positive:
        return exp(z);
      case Support::Loading:
        return bounds_.lambda_bound * z / sqrt(1.0 + z * z);
      case Support::Correlation:
        return bounds_.rho_bound * tanh(z);
    }
    return z;
  }

  double to_unconstrained_scalar(Support s, double x) const;

 private:
  ModelSpec spec_;
  PriorSpec bounds_;
  ParamVector base_;
  std::vector<ParamInfo> layout_;
  std::vector<int> free_;
};

}  // namespace ics
