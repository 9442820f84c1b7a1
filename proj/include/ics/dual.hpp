#pragma once

// Forward-mode dual numbers with a fixed number of tangent slots. Used to
// differentiate the marginal log-likelihood with respect to all free
// parameters in one pass.

#include <array>
#include <cmath>

#include <boost/math/special_functions/digamma.hpp>

namespace ics {

inline constexpr int kMaxDual = 16;

struct Dual {
  double v = 0.0;
  std::array<double, kMaxDual> d{};

  Dual() = default;
  Dual(double value) : v(value) {}  // NOLINT: implicit constants are the point

  static Dual variable(double value, int slot) {
    Dual x(value);
    x.d[slot] = 1.0;
    return x;
  }

  Dual& operator+=(const Dual& o) {
    v += o.v;
    for (int i = 0; i < kMaxDual; ++i) d[i] += o.d[i];
    return *this;
  }
  Dual& operator-=(const Dual& o) {
    v -= o.v;
    for (int i = 0; i < kMaxDual; ++i) d[i] -= o.d[i];
    return *this;
  }
  Dual& operator*=(const Dual& o) {
    for (int i = 0; i < kMaxDual; ++i) d[i] = d[i] * o.v + v * o.d[i];
    v *= o.v;
    return *this;
  }
  Dual& operator/=(const Dual& o) {
    const double inv = 1.0 / o.v;
    for (int i = 0; i < kMaxDual; ++i) d[i] = (d[i] - v * inv * o.d[i]) * inv;
    v *= inv;
    return *this;
  }
  Dual operator-() const {
    Dual r;
    r.v = -v;
    for (int i = 0; i < kMaxDual; ++i) r.d[i] = -d[i];
    return r;
  }
};

inline Dual operator+(Dual a, const Dual& b) { return a += b; }
inline Dual operator-(Dual a, const Dual& b) { return a -= b; }
inline Dual operator*(Dual a, const Dual& b) { return a *= b; }
inline Dual operator/(Dual a, const Dual& b) { return a /= b; }
inline Dual operator+(Dual a, double b) { a.v += b; return a; }
inline Dual operator+(double b, Dual a) { a.v += b; return a; }
inline Dual operator-(Dual a, double b) { a.v -= b; return a; }
inline Dual operator-(double b, const Dual& a) { return Dual(b) - a; }
inline Dual operator*(Dual a, double b) {
  a.v *= b;
  for (auto& x : a.d) x *= b;
  return a;
}
inline Dual operator*(double b, Dual a) { return a * b; }
inline Dual operator/(Dual a, double b) { return a * (1.0 / b); }
inline Dual operator/(double b, const Dual& a) { return Dual(b) / a; }

inline bool operator<(const Dual& a, const Dual& b) { return a.v < b.v; }
inline bool operator>(const Dual& a, const Dual& b) { return a.v > b.v; }

namespace detail {
inline Dual chain(const Dual& x, double fx, double dfx) {
  Dual r(fx);
  for (int i = 0; i < kMaxDual; ++i) r.d[i] = dfx * x.d[i];
  return r;
}
}  // namespace detail

inline Dual exp(const Dual& x) {
  const double e = std::exp(x.v);
  return detail::chain(x, e, e);
}
inline Dual log(const Dual& x) { return detail::chain(x, std::log(x.v), 1.0 / x.v); }
inline Dual log1p(const Dual& x) { return detail::chain(x, std::log1p(x.v), 1.0 / (1.0 + x.v)); }
inline Dual sqrt(const Dual& x) {
  const double s = std::sqrt(x.v);
  return detail::chain(x, s, 0.5 / s);
}
inline Dual tanh(const Dual& x) {
  const double t = std::tanh(x.v);
  return detail::chain(x, t, 1.0 - t * t);
}
inline Dual lgamma(const Dual& x) {
  return detail::chain(x, std::lgamma(x.v), boost::math::digamma(x.v));
}

inline double value(double x) { return x; }
inline double value(const Dual& x) { return x.v; }

}  // namespace ics
