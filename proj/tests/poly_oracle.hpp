/** @file poly_oracle.hpp
 *  @brief Exact multivariate polynomials and a flat-chart term-by-term expansion of the conjugation identity.
 */
#pragma once

#include <array>
#include <cmath>
#include <map>
#include <random>

namespace oracle {

template <int D>
class Poly {
 public:
  using Exp = std::array<int, D>;
  std::map<Exp, double> c;

  Poly() = default;
  explicit Poly(double a) {
    if (a != 0.0) c[Exp{}] = a;
  }
  static Poly var(int i) {
    Poly p;
    Exp e{};
    e[i] = 1;
    p.c[e] = 1.0;
    return p;
  }

  Poly& operator+=(const Poly& o) {
    for (auto& [e, a] : o.c) c[e] += a;
    return *this;
  }
  friend Poly operator+(Poly a, const Poly& b) { return a += b; }
  friend Poly operator-(Poly a, const Poly& b) { return a += b * -1.0; }
  friend Poly operator*(const Poly& a, double s) {
    Poly r;
    for (auto& [e, x] : a.c) r.c[e] = x * s;
    return r;
  }
  friend Poly operator*(double s, const Poly& a) { return a * s; }
  friend Poly operator*(const Poly& a, const Poly& b) {
    Poly r;
    for (auto& [ea, x] : a.c)
      for (auto& [eb, y] : b.c) {
        Exp e;
        for (int i = 0; i < D; ++i) e[i] = ea[i] + eb[i];
        r.c[e] += x * y;
      }
    return r;
  }

  Poly diff(int i) const {
    Poly r;
    for (auto& [e, x] : c)
      if (e[i] > 0) {
        Exp f = e;
        f[i] -= 1;
        r.c[f] += x * e[i];
      }
    return r;
  }

  /// Evaluation in any arithmetic type with +, * and construction from double.
  template <class S, class P>
  S operator()(const P& x) const {
    S s(0.0);
    for (auto& [e, a] : c) {
      S m(a);
      for (int i = 0; i < D; ++i)
        for (int k = 0; k < e[i]; ++k) m = m * x[i];
      s = s + m;
    }
    return s;
  }
  template <class P>
  double at(const P& x) const {
    return operator()<double>(x);
  }
};

/// Random polynomial of total degree <= deg with N(0, scale) coefficients.
template <int D, class Rng>
Poly<D> random_poly(Rng& rng, int deg, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  Poly<D> p;
  std::array<int, D> e{};
  auto rec = [&](auto&& self, int i, int left) -> void {
    if (i == D) {
      p.c[e] = nd(rng);
      return;
    }
    for (int k = 0; k <= left; ++k) {
      e[i] = k;
      self(self, i + 1, left - k);
    }
    e[i] = 0;
  };
  rec(rec, 0, deg);
  return p;
}

/// Terms of the conjugation identity in the flat chart with eta = diag(-1, 1, ..., 1).
struct FlatTerms {
  double S, q, sigma_tilde, P, R, divB, lhs, rhs;
  std::array<double, 3> B;
};

template <int D>
FlatTerms flat_conjugation_terms(const Poly<D>& v, const Poly<D>& l, const Poly<D>& s, const std::array<double, D>& x) {
  static_assert(D <= 3);
  auto eta = [](int i) { return i == 0 ? -1.0 : 1.0; };
  auto box = [&](const Poly<D>& f) {
    Poly<D> r;
    for (int i = 0; i < D; ++i) r = r - eta(i) * f.diff(i).diff(i);
    return r;
  };
  auto dot = [&](const Poly<D>& a, const Poly<D>& b) {
    Poly<D> r;
    for (int i = 0; i < D; ++i) r = r + eta(i) * (a.diff(i) * b.diff(i));
    return r;
  };
  // Hess f(grad a, grad b) = sum_ij d_ij f eta^ii d_i a eta^jj d_j b
  auto hess = [&](const Poly<D>& f, const Poly<D>& a, const Poly<D>& b) {
    double r = 0;
    for (int i = 0; i < D; ++i)
      for (int j = 0; j < D; ++j)
        r += f.diff(i).diff(j).at(x) * eta(i) * a.diff(i).at(x) * eta(j) * b.diff(j).at(x);
    return r;
  };
  Poly<D> boxl = box(l);
  Poly<D> gll = dot(l, l), glv = dot(l, v), gvv = dot(v, v);
  Poly<D> qp = Poly<D>(0.0) - gll - boxl - s;
  Poly<D> st = s + boxl;
  FlatTerms T{};
  double vv = v.at(x), sv = s.at(x), stv = st.at(x);
  T.q = qp.at(x);
  T.S = box(v).at(x) + T.q * vv;
  T.sigma_tilde = stv;
  T.P = stv * gvv.at(x) + 2 * hess(l, v, v) + (-stv * gll.at(x) + 2 * hess(l, l, l)) * vv * vv;
  // div((box l) grad l) = sum_i d_i(box l * eta^ii d_i l)
  double divbl = 0;
  for (int i = 0; i < D; ++i) divbl += (boxl * l.diff(i) * eta(i)).diff(i).at(x);
  T.R = (divbl - sv * stv + 0.5 * sv * sv + 0.5 * box(s).at(x)) * vv * vv;
  Poly<D> A1 = Poly<D>(0.0) - 2.0 * glv - s * v;
  Poly<D> A2 = gvv - (boxl + gll) * v * v;
  T.divB = 0;
  for (int i = 0; i < D; ++i) {
    Poly<D> Bi = eta(i) * (A1 * v.diff(i) + 0.5 * (v * v) * s.diff(i) + A2 * l.diff(i));
    T.B[i] = Bi.at(x);
    T.divB += Bi.diff(i).at(x);
  }
  double conj = box(v).at(x) - boxl.at(x) * vv + 2 * glv.at(x) - gll.at(x) * vv;
  T.lhs = 0.5 * conj * conj;
  double a = glv.at(x);
  T.rhs = 0.5 * T.S * T.S + 2 * a * a + T.P + T.R + T.divB;
  return T;
}

}  // namespace oracle
