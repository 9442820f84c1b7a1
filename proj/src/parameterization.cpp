#include "ics/parameterization.hpp"

namespace ics {

Parameterization::Parameterization(ModelSpec spec, PriorSpec bounds, std::vector<bool> free_mask,
                                   ParamVector base)
    : spec_(spec), bounds_(bounds), base_(std::move(base)), layout_(parameter_layout(spec)) {
  if (static_cast<int>(base_.delta.size()) < spec_.delta_count())
    base_.delta.resize(static_cast<std::size_t>(spec_.delta_count()), 1.0);
  if (free_mask.empty()) free_mask.assign(layout_.size(), true);
  if (free_mask.size() != layout_.size())
    throw InputError("free mask size does not match the parameter layout");
  for (std::size_t i = 0; i < layout_.size(); ++i)
    if (free_mask[i]) free_.push_back(static_cast<int>(i));
}

std::vector<std::string> Parameterization::free_names() const {
  std::vector<std::string> out;
  for (int i : free_) out.push_back(layout_[i].name);
  return out;
}

double Parameterization::to_unconstrained_scalar(Support s, double x) const {
  switch (s) {
    case Support::Real:
      return x;
    case Support::Positive:
      if (!(x > 0.0)) throw InputError("positive parameter is not positive");
      return std::log(x);
    case Support::Loading: {
      const double u = x / bounds_.lambda_bound;
      if (!(std::abs(u) < 1.0)) throw InputError("loading outside its bound");
      return u / std::sqrt((1.0 - u) * (1.0 + u));
    }
    case Support::Correlation: {
      const double u = x / bounds_.rho_bound;
      if (!(std::abs(u) < 1.0)) throw InputError("rho outside its bound");
      return std::atanh(u);
    }
  }
  return x;
}

std::vector<double> Parameterization::to_unconstrained(const ParamVector& p) const {
  const auto values = pack(spec_, p);
  std::vector<double> z;
  z.reserve(free_.size());
  for (int i : free_) z.push_back(to_unconstrained_scalar(layout_[i].support, values[i]));
  return z;
}

ParamVector Parameterization::natural(std::span<const double> z) const {
  return from_unconstrained<double>(z);
}

std::vector<double> Parameterization::jacobian_diag(std::span<const double> z) const {
  std::vector<double> out;
  for (std::size_t k = 0; k < free_.size(); ++k) {
    const double zk = z[k];
    switch (layout_[free_[k]].support) {
      case Support::Real:
        out.push_back(1.0);
        break;
      case Support::Positive:
        out.push_back(std::exp(zk));
        break;
      case Support::Loading:
        out.push_back(bounds_.lambda_bound / std::pow(1.0 + zk * zk, 1.5));
        break;
      case Support::Correlation: {
        const double t = std::tanh(zk);
        out.push_back(bounds_.rho_bound * (1.0 - t * t));
        break;
      }
    }
  }
  return out;
}

}  // namespace ics
