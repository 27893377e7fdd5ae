/** @file dual.hpp
 *  @brief Nested forward-mode dual numbers for exact partial derivatives.
 */
#pragma once

#include <array>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <type_traits>

namespace lorcal {

template <class T, int D>
struct Dual {
  T v{};
  std::array<T, D> d{};

  Dual() = default;
  Dual(double c) : v(c) {}  // NOLINT: implicit constant promotion
  template <class U>
    requires(!std::is_arithmetic_v<U> && std::is_convertible_v<U, T> && !std::is_same_v<U, Dual>)
  Dual(const U& c) : v(c) {}  // NOLINT
  Dual(const T& val, const std::array<T, D>& der) : v(val), d(der) {}

  Dual& operator+=(const Dual& o) {
    v += o.v;
    for (int i = 0; i < D; ++i) d[i] += o.d[i];
    return *this;
  }
  Dual& operator-=(const Dual& o) {
    v -= o.v;
    for (int i = 0; i < D; ++i) d[i] -= o.d[i];
    return *this;
  }
  Dual& operator*=(const Dual& o) {
    for (int i = 0; i < D; ++i) d[i] = d[i] * o.v + v * o.d[i];
    v *= o.v;
    return *this;
  }
  Dual& operator/=(const Dual& o) {
    T inv = T(1.0) / o.v;
    T q = v * inv;
    for (int i = 0; i < D; ++i) d[i] = (d[i] - q * o.d[i]) * inv;
    v = q;
    return *this;
  }
  Dual& operator*=(double c) {
    v *= c;
    for (auto& x : d) x *= c;
    return *this;
  }
};

template <class T>
struct is_dual : std::false_type {};
template <class T, int D>
struct is_dual<Dual<T, D>> : std::true_type {};

template <class T, int D>
Dual<T, D> operator-(const Dual<T, D>& a) {
  Dual<T, D> r;
  r.v = -a.v;
  for (int i = 0; i < D; ++i) r.d[i] = -a.d[i];
  return r;
}
template <class T, int D>
Dual<T, D> operator+(Dual<T, D> a, const Dual<T, D>& b) { return a += b; }
template <class T, int D>
Dual<T, D> operator-(Dual<T, D> a, const Dual<T, D>& b) { return a -= b; }
template <class T, int D>
Dual<T, D> operator*(Dual<T, D> a, const Dual<T, D>& b) { return a *= b; }
template <class T, int D>
Dual<T, D> operator/(Dual<T, D> a, const Dual<T, D>& b) { return a /= b; }

template <class T, int D>
Dual<T, D> operator+(Dual<T, D> a, double c) { a.v += c; return a; }
template <class T, int D>
Dual<T, D> operator+(double c, Dual<T, D> a) { a.v += c; return a; }
template <class T, int D>
Dual<T, D> operator-(Dual<T, D> a, double c) { a.v -= c; return a; }
template <class T, int D>
Dual<T, D> operator-(double c, const Dual<T, D>& a) { Dual<T, D> r = -a; r.v += c; return r; }
template <class T, int D>
Dual<T, D> operator*(Dual<T, D> a, double c) { return a *= c; }
template <class T, int D>
Dual<T, D> operator*(double c, Dual<T, D> a) { return a *= c; }
template <class T, int D>
Dual<T, D> operator/(Dual<T, D> a, double c) { return a *= (1.0 / c); }
template <class T, int D>
Dual<T, D> operator/(double c, const Dual<T, D>& a) { return Dual<T, D>(c) / a; }

template <class T, int D>
bool operator<(const Dual<T, D>& a, const Dual<T, D>& b) { return a.v < b.v; }
template <class T, int D>
bool operator>(const Dual<T, D>& a, const Dual<T, D>& b) { return a.v > b.v; }
template <class T, int D>
bool operator<(const Dual<T, D>& a, double b) { return a.v < b; }
template <class T, int D>
bool operator>(const Dual<T, D>& a, double b) { return a.v > b; }
template <class T, int D>
bool operator<=(const Dual<T, D>& a, double b) { return a.v <= b; }
template <class T, int D>
bool operator>=(const Dual<T, D>& a, double b) { return a.v >= b; }

/// Underlying double value of a possibly nested dual.
inline double value(double x) { return x; }
template <class T, int D>
double value(const Dual<T, D>& x) { return value(x.v); }

namespace detail {
template <class T, int D, class F, class G>
Dual<T, D> chain(const Dual<T, D>& x, F f, G df) {
  Dual<T, D> r;
  r.v = f(x.v);
  T s = df(x.v);
  for (int i = 0; i < D; ++i) r.d[i] = s * x.d[i];
  return r;
}
}  // namespace detail

using std::acosh;
using std::atan;
using std::cos;
using std::cosh;
using std::exp;
using std::log;
using std::pow;
using std::sin;
using std::sinh;
using std::sqrt;
using std::tan;
using std::tanh;

template <class T, int D>
Dual<T, D> exp(const Dual<T, D>& x) {
  Dual<T, D> r;
  r.v = exp(x.v);
  for (int i = 0; i < D; ++i) r.d[i] = r.v * x.d[i];
  return r;
}
template <class T, int D>
Dual<T, D> log(const Dual<T, D>& x) {
  return detail::chain(x, [](const T& a) { return log(a); }, [](const T& a) { return T(1.0) / a; });
}
template <class T, int D>
Dual<T, D> sqrt(const Dual<T, D>& x) {
  Dual<T, D> r;
  r.v = sqrt(x.v);
  T s = T(0.5) / r.v;
  for (int i = 0; i < D; ++i) r.d[i] = s * x.d[i];
  return r;
}
template <class T, int D>
Dual<T, D> sin(const Dual<T, D>& x) {
  return detail::chain(x, [](const T& a) { return sin(a); }, [](const T& a) { return cos(a); });
}
template <class T, int D>
Dual<T, D> cos(const Dual<T, D>& x) {
  return detail::chain(x, [](const T& a) { return cos(a); }, [](const T& a) { return -sin(a); });
}
template <class T, int D>
Dual<T, D> tan(const Dual<T, D>& x) {
  return detail::chain(
      x, [](const T& a) { return tan(a); },
      [](const T& a) {
        T c = cos(a);
        return T(1.0) / (c * c);
      });
}
template <class T, int D>
Dual<T, D> sinh(const Dual<T, D>& x) {
  return detail::chain(x, [](const T& a) { return sinh(a); }, [](const T& a) { return cosh(a); });
}
template <class T, int D>
Dual<T, D> cosh(const Dual<T, D>& x) {
  return detail::chain(x, [](const T& a) { return cosh(a); }, [](const T& a) { return sinh(a); });
}
template <class T, int D>
Dual<T, D> tanh(const Dual<T, D>& x) {
  return detail::chain(
      x, [](const T& a) { return tanh(a); },
      [](const T& a) {
        T c = cosh(a);
        return T(1.0) / (c * c);
      });
}
template <class T, int D>
Dual<T, D> atan(const Dual<T, D>& x) {
  return detail::chain(x, [](const T& a) { return atan(a); }, [](const T& a) { return T(1.0) / (T(1.0) + a * a); });
}
template <class T, int D>
Dual<T, D> acosh(const Dual<T, D>& x) {
  return detail::chain(
      x, [](const T& a) { return acosh(a); }, [](const T& a) { return T(1.0) / sqrt(a * a - T(1.0)); });
}
template <class T, int D>
Dual<T, D> pow(const Dual<T, D>& x, double p) {
  return detail::chain(x, [p](const T& a) { return pow(a, p); }, [p](const T& a) { return p * pow(a, p - 1.0); });
}

/// Integer power by repeated multiplication; valid for any ring-like scalar.
template <class S>
S ipow(const S& x, int k) {
  S r(1.0);
  for (int i = 0; i < k; ++i) r = r * x;
  return r;
}

template <int K, int D>
struct JetT {
  using type = Dual<typename JetT<K - 1, D>::type, D>;
};
template <int D>
struct JetT<0, D> {
  using type = double;
};
/// Scalar carrying all partial derivatives up to order K in D variables.
template <int K, int D>
using Jet = typename JetT<K, D>::type;

template <class S>
struct jet_order : std::integral_constant<int, 0> {};
template <class T, int D>
struct jet_order<Dual<T, D>> : std::integral_constant<int, 1 + jet_order<T>::value> {};

/// Constant (all derivatives zero) at jet level K.
template <int K, int D>
Jet<K, D> jet_const(double c) {
  return Jet<K, D>(c);
}

/// Independent variable i with value x, seeded at every nesting level.
template <int K, int D>
Jet<K, D> jet_var(double x, int i) {
  if constexpr (K == 0) {
    return x;
  } else {
    Jet<K, D> r;
    r.v = jet_var<K - 1, D>(x, i);
    r.d[i] = jet_const<K - 1, D>(1.0);
    return r;
  }
}

template <int K, int D>
std::array<Jet<K, D>, D> jet_point(const std::array<double, D>& x) {
  std::array<Jet<K, D>, D> r;
  for (int i = 0; i < D; ++i) r[i] = jet_var<K, D>(x[i], i);
  return r;
}

/// Lift a double-valued scalar into jet level K with zero derivatives.
template <class S>
S lift(double c) {
  return S(c);
}

/// Partial derivative of order m = sizeof(idx) taken from the outermost levels.
template <class S>
double partial(const S& x) {
  return value(x);
}
template <class T, int D, class... I>
double partial(const Dual<T, D>& x, int i, I... rest) {
  return partial(x.d[i], rest...);
}

/// Strip the outermost dual level (drops the derivative part).
template <class T, int D>
const T& strip(const Dual<T, D>& x) {
  return x.v;
}

}  // namespace lorcal
