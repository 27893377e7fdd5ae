/** @file geometry.hpp
 *  @brief Metric catalog, Levi-Civita connection, curvature and the R <= K bound check.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "dual.hpp"
#include "errors.hpp"
#include "field.hpp"
#include "tensor.hpp"

namespace lorcal {

/// Coordinate box [lo, hi] in (t, x^1, ..., x^N).
template <int N>
struct Box {
  static constexpr int D = N + 1;
  Vec<double, D> lo{}, hi{};

  bool contains(const Vec<double, D>& q, double slack = 1e-12) const {
    for (int i = 0; i < D; ++i)
      if (q[i] < lo[i] - slack || q[i] > hi[i] + slack) return false;
    return true;
  }
  /// Distance from q to the nearest face (negative outside).
  double face_distance(const Vec<double, D>& q) const {
    double d = std::numeric_limits<double>::infinity();
    for (int i = 0; i < D; ++i) d = std::min({d, q[i] - lo[i], hi[i] - q[i]});
    return d;
  }
  static Box cube(double t_half, double x_half) {
    Box b;
    b.lo[0] = -t_half;
    b.hi[0] = t_half;
    for (int i = 1; i < D; ++i) {
      b.lo[i] = -x_half;
      b.hi[i] = x_half;
    }
    return b;
  }
  static Box centered(const Vec<double, D>& c, double half) {
    Box b;
    for (int i = 0; i < D; ++i) {
      b.lo[i] = c[i] - half;
      b.hi[i] = c[i] + half;
    }
    return b;
  }
};

template <int N>
using ChartPoint = Vec<double, N + 1>;

/**
 * Lorentzian metric on a coordinate chart. Entries are generic callables evaluated at jet
 * levels 0..4, so every derivative is exact. Cylinder models c(-dt^2 + g0) also expose c and g0.
 */
template <int N>
class MetricModel {
 public:
  static constexpr int n = N;
  static constexpr int D = N + 1;
  template <int K>
  using Fn = std::function<Mat<Jet<K, D>, D>(const Vec<Jet<K, D>, D>&)>;
  using CylFn = std::function<void(const Vec<double, D>&, double&, Mat<double, N>&)>;

  std::string name;
  std::string descriptor;
  Box<N> domain;
  std::vector<std::string> tags;
  int max_order = kMaxJet;
  bool cylinder = false;
  /// Closed-form admissible K interval where known (warped and ultrastatic families).
  std::optional<std::pair<double, double>> k_interval;
  /// Set for products -dt^2 + g0 with g0 the standard form of constant curvature C.
  std::optional<double> product_curvature;
  ScalarField<D> conformal;  ///< c(t,x); valid only for cylinder models
  CylFn cylinder_parts;      ///< (c, g0) at a point; valid only for cylinder models

  template <class F>
  void set_metric(F f) {
    fill<0>(f);
  }

  template <int K>
  Mat<Jet<K, D>, D> metric(const Vec<Jet<K, D>, D>& x) const {
    if (K > max_order)
      throw CapabilityError(name + ": metric derivatives of order " + std::to_string(K) + " not supplied");
    return std::get<K>(fns_)(x);
  }
  Mat<double, D> metric(const Vec<double, D>& x) const { return metric<0>(x); }

  bool has_tag(const std::string& t) const { return std::find(tags.begin(), tags.end(), t) != tags.end(); }

  void require_in_domain(const Vec<double, D>& q) const {
    if (!domain.contains(q, 1e-9)) {
      std::ostringstream os;
      os << name << ": point outside chart domain (";
      for (int i = 0; i < D; ++i) os << (i ? "," : "") << q[i];
      os << ")";
      throw DomainError(os.str());
    }
  }

 private:
  template <int K, class F>
  void fill(const F& f) {
    std::get<K>(fns_) = [f](const Vec<Jet<K, D>, D>& x) -> Mat<Jet<K, D>, D> { return f(x); };
    if constexpr (K < kMaxJet) fill<K + 1>(f);
  }
  std::tuple<Fn<0>, Fn<1>, Fn<2>, Fn<3>, Fn<4>> fns_;
};

namespace catalog {

/// Spatial metric 4|dx|^2/(1 + C|x|^2)^2 of constant curvature C (flat for C = 0).
template <class S, int N>
Mat<S, N> space_form(const Vec<S, N + 1>& x, double C) {
  S r2(0.0);
  for (int a = 1; a <= N; ++a) r2 = r2 + x[a] * x[a];
  S conf = (C == 0.0) ? S(1.0) : S(4.0) / ((1.0 + C * r2) * (1.0 + C * r2));
  Mat<S, N> g = zero_mat<S, N>();
  for (int a = 0; a < N; ++a) g[a][a] = conf;
  return g;
}

/// Assemble c(-dt^2 + g0) from conformal factor and spatial block.
template <class S, int N>
Mat<S, N + 1> assemble_cylinder(const S& c, const Mat<S, N>& g0) {
  Mat<S, N + 1> g = zero_mat<S, N + 1>();
  g[0][0] = -c;
  for (int a = 0; a < N; ++a)
    for (int b = 0; b < N; ++b) g[a + 1][b + 1] = c * g0[a][b];
  return g;
}

/// Build a cylinder model from `parts(x) -> pair(c, g0)` generic in the scalar type.
template <int N, class P>
MetricModel<N> from_cylinder(P parts, const Box<N>& box) {
  constexpr int D = N + 1;
  MetricModel<N> m;
  m.domain = box;
  m.cylinder = true;
  m.set_metric([parts](const auto& x) {
    auto [c, g0] = parts(x);
    return assemble_cylinder<std::decay_t<decltype(c)>, N>(c, g0);
  });
  m.conformal = ScalarField<D>::make([parts](const auto& x) { return parts(x).first; }, kMaxJet, "conformal");
  m.cylinder_parts = [parts](const Vec<double, D>& x, double& c, Mat<double, N>& g0) {
    auto pr = parts(x);
    c = pr.first;
    g0 = pr.second;
  };
  return m;
}

template <int N>
double box_radius2(const Box<N>& box) {
  double r2 = 0;
  for (int a = 1; a <= N; ++a) r2 += std::max(box.lo[a] * box.lo[a], box.hi[a] * box.hi[a]);
  return r2;
}

template <int N>
MetricModel<N> minkowski(const Box<N>& box) {
  auto m = from_cylinder<N>(
      [](const auto& x) {
        using S = std::decay_t<decltype(x[0])>;
        Mat<S, N> g0 = zero_mat<S, N>();
        for (int a = 0; a < N; ++a) g0[a][a] = S(1.0);
        return std::make_pair(S(1.0), g0);
      },
      box);
  m.name = "minkowski";
  m.descriptor = "minkowski(" + std::to_string(N) + ")";
  m.tags = {"flat"};
  m.k_interval = std::make_pair(0.0, 0.0);
  m.product_curvature = 0.0;
  return m;
}

/// -dt^2 + g0 with g0 the constant-curvature form of curvature C < 0.
template <int N>
MetricModel<N> ultrastatic(double C, const Box<N>& box) {
  if (!(C < 0.0)) throw ConfigError("ultrastatic: spatial curvature bound C must be negative");
  if (C * box_radius2(box) <= -1.0) throw ConfigError("ultrastatic: g0 is not positive definite on the chart box");
  auto m = from_cylinder<N>(
      [C](const auto& x) {
        using S = std::decay_t<decltype(x[0])>;
        return std::make_pair(S(1.0), space_form<S, N>(x, C));
      },
      box);
  m.name = "ultrastatic";
  m.descriptor = "ultrastatic(C=" + std::to_string(C) + ")";
  m.tags = {"ultrastatic"};
  if (N >= 2) m.k_interval = std::make_pair(C, 0.0);
  m.product_curvature = C;
  return m;
}

/**
 * Warped product -dt^2 + f(t)^2 g0 with g0 of constant curvature C. The admissible K interval
 * [sup (C + f'^2)/f^2, inf f''/f] is evaluated by dense sampling of the chart's time range.
 */
template <int N, class F>
MetricModel<N> warped(F f, const std::string& fname, double C, const Box<N>& box) {
  if (C < 0.0 && C * box_radius2(box) <= -1.0) throw ConfigError("warped: g0 is not positive definite on the chart box");
  auto m = from_cylinder<N>(
      [f, C](const auto& x) {
        using S = std::decay_t<decltype(x[0])>;
        S ft = f(x[0]);
        Mat<S, N> g0 = space_form<S, N>(x, C);
        for (auto& row : g0)
          for (auto& e : row) e = e * ft * ft;
        return std::make_pair(S(1.0), g0);
      },
      box);
  double lo = -std::numeric_limits<double>::infinity(), hi = std::numeric_limits<double>::infinity();
  bool unit = true;
  const int ns = 4001;
  for (int k = 0; k < ns; ++k) {
    double t = box.lo[0] + (box.hi[0] - box.lo[0]) * k / (ns - 1);
    Jet<2, 1> tt = jet_var<2, 1>(t, 0);
    Jet<2, 1> ff = f(tt);
    double f0 = value(ff), f1 = partial(ff, 0), f2 = partial(ff, 0, 0);
    if (!(f0 > 0.0)) throw ConfigError("warped: scale profile must be positive");
    unit = unit && f0 == 1.0 && f1 == 0.0;
    lo = std::max(lo, (C + f1 * f1) / (f0 * f0));
    hi = std::min(hi, f2 / f0);
  }
  m.name = "warped";
  m.descriptor = "warped(f=" + fname + ",C=" + std::to_string(C) + ")";
  m.tags = {"warped"};
  m.k_interval = std::make_pair(lo, hi);
  if (unit) m.product_curvature = C;
  return m;
}

/// Conformally flat c(t,x)(-dt^2 + |dx|^2) with c generic in the scalar type.
template <int N, class F>
MetricModel<N> conformal_minkowski(F c, const std::string& cname, const Box<N>& box) {
  auto m = from_cylinder<N>(
      [c](const auto& x) {
        using S = std::decay_t<decltype(x[0])>;
        Mat<S, N> g0 = zero_mat<S, N>();
        for (int a = 0; a < N; ++a) g0[a][a] = S(1.0);
        return std::make_pair(S(c(x)), g0);
      },
      box);
  m.name = "conformal";
  m.descriptor = "conformal(c=" + cname + ")";
  m.tags = {"conformal"};
  return m;
}

/// Prescribed curvature tensor at the origin for the jet construction.
template <int N>
Rank4<double, N + 1> jet_curvature(const Mat<double, N>& Cab, double kappa) {
  constexpr int D = N + 1;
  Rank4<double, D> R{};
  auto dl = [](int a, int b) { return a == b ? 1.0 : 0.0; };
  for (int a = 1; a < D; ++a)
    for (int b = 1; b < D; ++b) {
      double c = Cab[a - 1][b - 1];
      R[0][a][b][0] = c;
      R[a][0][0][b] = c;
      R[a][0][b][0] = -c;
      R[0][a][0][b] = -c;
      for (int e = 1; e < D; ++e)
        for (int f = 1; f < D; ++f) R[a][b][e][f] = kappa * (dl(a, e) * dl(b, f) - dl(a, f) * dl(b, e));
    }
  return R;
}

/// g_ij = eta_ij - (1/3) R_iklj x^k x^l with the prescribed curvature at the origin.
template <int N>
MetricModel<N> jet(const Mat<double, N>& Cab, double kappa, const Box<N>& box) {
  constexpr int D = N + 1;
  for (int a = 0; a < N; ++a)
    for (int b = 0; b < N; ++b)
      if (std::abs(Cab[a][b] - Cab[b][a]) > 1e-14) throw ConfigError("jet: C must be symmetric");
  double maxeig;
  if constexpr (N == 1) {
    maxeig = Cab[0][0];
  } else {
    double tr = Cab[0][0] + Cab[1][1], dt = Cab[0][0] * Cab[1][1] - Cab[0][1] * Cab[1][0];
    maxeig = 0.5 * tr + std::sqrt(std::max(0.0, 0.25 * tr * tr - dt));
  }
  if (!(maxeig < 0.0)) throw ConfigError("jet: C must have strictly negative eigenvalues");
  if (!(kappa > 0.0)) throw ConfigError("jet: kappa must be positive");
  auto R = jet_curvature<N>(Cab, kappa);
  MetricModel<N> m;
  m.domain = box;
  m.cylinder = false;
  m.set_metric([R](const auto& x) {
    using S = std::decay_t<decltype(x[0])>;
    Mat<S, D> g = zero_mat<S, D>();
    for (int i = 0; i < D; ++i) {
      g[i][i] = S(i == 0 ? -1.0 : 1.0);
      for (int j = 0; j < D; ++j)
        for (int k = 0; k < D; ++k)
          for (int l = 0; l < D; ++l)
            if (R[i][k][l][j] != 0.0) g[i][j] = g[i][j] - (R[i][k][l][j] / 3.0) * x[k] * x[l];
    }
    return g;
  });
  m.name = "jet";
  std::ostringstream os;
  os << "jet(kappa=" << kappa << ")";
  m.descriptor = os.str();
  m.tags = {"jet"};
  return m;
}

/// C-infinity mollifier bump exp(1 - 1/(1 - s^2)) on s < 1, zero outside.
template <class S>
S mollifier(const S& s2) {
  if (!(s2 < 1.0)) return S(0.0);
  return exp(1.0 - 1.0 / (1.0 - s2));
}

/// Cylinder base plus amplitude * bump(|(t,x) - center| / radius) added to g0.
template <int N>
MetricModel<N> perturbed(double base_C, double amplitude, const ChartPoint<N>& center, double radius,
                         const Box<N>& box) {
  constexpr int D = N + 1;
  for (int i = 0; i < D; ++i)
    if (center[i] - radius <= box.lo[i] || center[i] + radius >= box.hi[i])
      throw ConfigError("perturbed: bump support must lie strictly inside the chart");
  if (base_C < 0.0 && base_C * box_radius2(box) <= -1.0)
    throw ConfigError("perturbed: g0 is not positive definite on the chart box");
  if (amplitude <= -1.0 / 8.0) throw ConfigError("perturbed: amplitude too negative for positive definite g0");
  auto m = from_cylinder<N>(
      [=](const auto& x) {
        using S = std::decay_t<decltype(x[0])>;
        S s2(0.0);
        for (int i = 0; i < D; ++i) s2 = s2 + (x[i] - center[i]) * (x[i] - center[i]);
        S b = amplitude * mollifier<S>(s2 / (radius * radius));
        Mat<S, N> g0 = space_form<S, N>(x, base_C);
        for (int a = 0; a < N; ++a) g0[a][a] = g0[a][a] + b;
        return std::make_pair(S(1.0), g0);
      },
      box);
  m.name = "perturbed";
  std::ostringstream os;
  os << "perturbed(C=" << base_C << ",amp=" << amplitude << ",radius=" << radius << ")";
  m.descriptor = os.str();
  m.tags = {"perturbed", base_C == 0.0 ? "flat-base" : "ultrastatic-base"};
  return m;
}

}  // namespace catalog

/// Christoffel symbols Gamma^i_{jk} at a jet-level-K point (needs metric order K+1).
template <int K, int N>
Rank3<Jet<K, N + 1>, N + 1> christoffel_at(const MetricModel<N>& m, const Vec<Jet<K, N + 1>, N + 1>& x) {
  constexpr int D = N + 1;
  using S = Jet<K, D>;
  auto G = m.template metric<K + 1>(lift_point<K, D>(x));
  Mat<S, D> g, gi;
  Rank3<S, D> dg;  // dg[k][i][j] = d_k g_ij
  for (int i = 0; i < D; ++i)
    for (int j = 0; j < D; ++j) {
      g[i][j] = G[i][j].v;
      for (int k = 0; k < D; ++k) dg[k][i][j] = G[i][j].d[k];
    }
  gi = inverse<S, D>(g);
  Rank3<S, D> first;  // [l][j][k] = 1/2 (d_j g_lk + d_k g_lj - d_l g_jk)
  for (int l = 0; l < D; ++l)
    for (int j = 0; j < D; ++j)
      for (int k = j; k < D; ++k) {
        first[l][j][k] = 0.5 * (dg[j][l][k] + dg[k][l][j] - dg[l][j][k]);
        first[l][k][j] = first[l][j][k];
      }
  Rank3<S, D> Gam;
  for (int i = 0; i < D; ++i)
    for (int j = 0; j < D; ++j)
      for (int k = j; k < D; ++k) {
        S s(0.0);
        for (int l = 0; l < D; ++l) s = s + gi[i][l] * first[l][j][k];
        Gam[i][j][k] = s;
        Gam[i][k][j] = s;
      }
  return Gam;
}

template <int N>
Rank3<double, N + 1> christoffel(const MetricModel<N>& m, const ChartPoint<N>& q) {
  m.require_in_domain(q);
  return christoffel_at<0, N>(m, q);
}

/// R_{ijkl} = g(R(d_i, d_j) d_k, d_l) at a jet-level-K point (needs metric order K+2).
template <int K, int N>
Rank4<Jet<K, N + 1>, N + 1> riemann_at(const MetricModel<N>& m, const Vec<Jet<K, N + 1>, N + 1>& x) {
  constexpr int D = N + 1;
  using S = Jet<K, D>;
  auto GJ = christoffel_at<K + 1, N>(m, lift_point<K, D>(x));
  auto g = m.template metric<K>(x);
  Rank3<S, D> Gam;
  Rank4<S, D> dGam;  // dGam[l][i][j][k] = d_l Gamma^i_jk
  for (int i = 0; i < D; ++i)
    for (int j = 0; j < D; ++j)
      for (int k = 0; k < D; ++k) {
        Gam[i][j][k] = GJ[i][j][k].v;
        for (int l = 0; l < D; ++l) dGam[l][i][j][k] = GJ[i][j][k].d[l];
      }
  Rank4<S, D> Rup;  // Rup[mm][k][i][j] = R^m_{kij}
  for (int mm = 0; mm < D; ++mm)
    for (int k = 0; k < D; ++k)
      for (int i = 0; i < D; ++i)
        for (int j = 0; j < D; ++j) {
          S s = dGam[i][mm][j][k] - dGam[j][mm][i][k];
          for (int p = 0; p < D; ++p) s = s + Gam[mm][i][p] * Gam[p][j][k] - Gam[mm][j][p] * Gam[p][i][k];
          Rup[mm][k][i][j] = s;
        }
  Rank4<S, D> R;
  for (int i = 0; i < D; ++i)
    for (int j = 0; j < D; ++j)
      for (int k = 0; k < D; ++k)
        for (int l = 0; l < D; ++l) {
          S s(0.0);
          for (int mm = 0; mm < D; ++mm) s = s + g[l][mm] * Rup[mm][k][i][j];
          R[i][j][k][l] = s;
        }
  return R;
}

template <int N>
Rank4<double, N + 1> riemann_lowered(const MetricModel<N>& m, const ChartPoint<N>& q) {
  m.require_in_domain(q);
  return riemann_at<0, N>(m, q);
}

/// Tangent vector with its base point.
template <int N>
struct Tangent {
  ChartPoint<N> base{};
  Vec<double, N + 1> v{};
};

struct QuadraticForm {
  double numerator;  ///< g(R(X,Y)Y,X)
  double q_form;     ///< g(X,X)g(Y,Y) - g(X,Y)^2
};

template <int N>
QuadraticForm curvature_quadratic_form_at(const Mat<double, N + 1>& g, const Rank4<double, N + 1>& R,
                                          const Vec<double, N + 1>& X, const Vec<double, N + 1>& Y) {
  constexpr int D = N + 1;
  double num = 0;
  for (int i = 0; i < D; ++i)
    for (int j = 0; j < D; ++j)
      for (int k = 0; k < D; ++k)
        for (int l = 0; l < D; ++l) num += R[i][j][k][l] * X[i] * Y[j] * Y[k] * X[l];
  double gxx = quad<double, D>(g, X, X), gyy = quad<double, D>(g, Y, Y), gxy = quad<double, D>(g, X, Y);
  return {num, gxx * gyy - gxy * gxy};
}

template <int N>
QuadraticForm curvature_quadratic_form(const MetricModel<N>& m, const Tangent<N>& X, const Tangent<N>& Y) {
  if (X.base != Y.base) throw DomainError("curvature_quadratic_form: tangent vectors have different base points");
  m.require_in_domain(X.base);
  return curvature_quadratic_form_at<N>(m.metric(X.base), riemann_lowered(m, X.base), X.v, Y.v);
}

template <int N>
struct CurvatureReport {
  double K = 0;
  Box<N> region;
  int n_samples = 0;
  unsigned long long seed = 0;
  double worst_margin = std::numeric_limits<double>::infinity();
  double worst_scaled = std::numeric_limits<double>::infinity();  ///< margin / tolerance at the worst sample
  bool pass = true;
  int n_resampled = 0;
  struct Sample {
    ChartPoint<N> point;
    Vec<double, N + 1> X, Y;
    double numerator, q_form, margin;
  };
  std::optional<Sample> violating_sample;
  Sample worst_sample{};
};

/// Uniform point in a box.
template <int N, class Rng>
ChartPoint<N> sample_box(const Box<N>& b, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ChartPoint<N> p;
  for (int i = 0; i <= N; ++i) p[i] = b.lo[i] + (b.hi[i] - b.lo[i]) * u(rng);
  return p;
}

/// Uniform direction on the auxiliary Euclidean unit sphere.
template <int D, class Rng>
Vec<double, D> sample_sphere(Rng& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Vec<double, D> v;
  double s;
  do {
    s = 0;
    for (auto& x : v) {
      x = nd(rng);
      s += x * x;
    }
  } while (s < 1e-20);
  s = std::sqrt(s);
  for (auto& x : v) x /= s;
  return v;
}

inline double curvature_tolerance(double KQ, double num) { return 1e-9 * (std::abs(KQ) + std::abs(num) + 1.0); }

template <int N>
CurvatureReport<N> curvature_bound_check(const MetricModel<N>& m, const Box<N>& region, double K, int n_samples,
                                         unsigned long long seed) {
  constexpr int D = N + 1;
  if (n_samples < 1) throw ConfigError("curvature_bound_check: n_samples must be >= 1");
  if (!m.domain.contains(region.lo) || !m.domain.contains(region.hi))
    throw DomainError("curvature_bound_check: region not inside chart domain");
  std::mt19937_64 rng(seed);
  CurvatureReport<N> rep;
  rep.K = K;
  rep.region = region;
  rep.n_samples = n_samples;
  rep.seed = seed;
  for (int s = 0; s < n_samples; ++s) {
    ChartPoint<N> p = sample_box<N>(region, rng);
    auto g = m.metric(p);
    auto R = riemann_at<0, N>(m, p);
    Vec<double, D> X, Y;
    QuadraticForm f;
    for (;;) {
      X = sample_sphere<D>(rng);
      Y = sample_sphere<D>(rng);
      f = curvature_quadratic_form_at<N>(g, R, X, Y);
      if (std::abs(f.q_form) >= 1e-12) break;
      ++rep.n_resampled;
    }
    double margin = K * f.q_form - f.numerator;
    double tol = curvature_tolerance(K * f.q_form, f.numerator);
    if (margin < rep.worst_margin) {
      rep.worst_margin = margin;
      rep.worst_sample = {p, X, Y, f.numerator, f.q_form, margin};
    }
    rep.worst_scaled = std::min(rep.worst_scaled, margin / tol);
    if (margin < -tol) {
      if (rep.pass) rep.violating_sample = typename CurvatureReport<N>::Sample{p, X, Y, f.numerator, f.q_form, margin};
      rep.pass = false;
    }
  }
  return rep;
}

}  // namespace lorcal
