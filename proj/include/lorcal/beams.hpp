/** @file beams.hpp
 *  @brief Gaussian beams on null geodesics: Fermi frame, Y-Z propagation, evaluation, residuals, boundary data.
 */
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <optional>
#include <sstream>
#include <vector>

#include "geodesics.hpp"

namespace lorcal {

using cplx = std::complex<double>;

/// Smooth cutoff as a function of q = t^2: equals 1 for |t| <= 1/4 and 0 for |t| >= 1/2.
template <class S>
S cutoff_sq(const S& q) {
  double qv = value(q);
  if (qv <= 1.0 / 16.0) return S(1.0);
  if (qv >= 0.25) return S(0.0);
  S a = exp(-1.0 / (0.25 - q)), b = exp(-1.0 / (q - 1.0 / 16.0));
  return a / (a + b);
}

inline double cutoff(double t) { return cutoff_sq(t * t); }

/// Value and first two derivatives of cutoff_sq.
inline std::array<double, 3> cutoff_sq_jet(double q) {
  auto c = cutoff_sq(jet_var<2, 1>(q, 0));
  return {c.v.v, c.d[0].v, c.d[0].d[0]};
}

/// Time cutoff: 1 for t < T1 + eps/2, 0 for t > T1 + eps, smooth in between.
struct TimeCutoff {
  double T1 = 0, eps = 0;
  double operator()(double t) const {
    double a = T1 + 0.5 * eps, b = T1 + eps;
    if (t <= a) return 1.0;
    if (t >= b) return 0.0;
    double x = (t - a) / (b - a);
    double p = std::exp(-1.0 / (1.0 - x)), q = std::exp(-1.0 / x);
    return p / (p + q);
  }
};

/// Second-order local Taylor data of a complex function of D variables.
template <int D>
struct CTaylor2 {
  cplx v{};
  std::array<cplx, D> g{};
  std::array<std::array<cplx, D>, D> h{};
};

template <int D>
CTaylor2<D> operator*(const CTaylor2<D>& a, const CTaylor2<D>& b) {
  CTaylor2<D> r;
  r.v = a.v * b.v;
  for (int i = 0; i < D; ++i) r.g[i] = a.g[i] * b.v + a.v * b.g[i];
  for (int i = 0; i < D; ++i)
    for (int j = 0; j < D; ++j) r.h[i][j] = a.h[i][j] * b.v + a.g[i] * b.g[j] + a.g[j] * b.g[i] + a.v * b.h[i][j];
  return r;
}

template <int D>
CTaylor2<D> operator+(const CTaylor2<D>& a, const CTaylor2<D>& b) {
  CTaylor2<D> r = a;
  r.v += b.v;
  for (int i = 0; i < D; ++i) {
    r.g[i] += b.g[i];
    for (int j = 0; j < D; ++j) r.h[i][j] += b.h[i][j];
  }
  return r;
}

template <int D>
CTaylor2<D> texp(const CTaylor2<D>& a) {
  CTaylor2<D> r;
  r.v = std::exp(a.v);
  for (int i = 0; i < D; ++i) r.g[i] = r.v * a.g[i];
  for (int i = 0; i < D; ++i)
    for (int j = 0; j < D; ++j) r.h[i][j] = r.v * (a.h[i][j] + a.g[i] * a.g[j]);
  return r;
}

/// Real second-order jet converted to local Taylor data.
template <int D>
CTaylor2<D> to_taylor(const Jet<2, D>& x) {
  CTaylor2<D> r;
  r.v = x.v.v;
  for (int i = 0; i < D; ++i) {
    r.g[i] = x.d[i].v;
    for (int j = 0; j < D; ++j) r.h[i][j] = x.d[i].d[j];
  }
  return r;
}

/**
 * Adapted null frame at a point: E0 = xi, E1 null with g(E0,E1) = 1, E2..En spacelike orthonormal
 * and orthogonal to both. Rows of the result are the frame vectors.
 */
template <int N>
Mat<double, N + 1> adapted_null_frame(const Mat<double, N + 1>& g, const Vec<double, N + 1>& xi) {
  constexpr int D = N + 1;
  auto ip = [&](const Vec<double, D>& a, const Vec<double, D>& b) { return quad<double, D>(g, a, b); };
  double e2 = 0, gs = 0;
  for (int i = 0; i < D; ++i) {
    e2 += xi[i] * xi[i];
    for (int j = 0; j < D; ++j) gs = std::max(gs, std::abs(g[i][j]));
  }
  if (e2 == 0.0) throw DomainError("adapted_null_frame: zero direction");
  if (std::abs(ip(xi, xi)) > 1e-9 * gs * e2) throw DomainError("adapted_null_frame: direction is not null");
  if (g[0][0] >= 0.0) throw DomainError("adapted_null_frame: d_t is not timelike");
  Vec<double, D> T{};
  T[0] = 1.0 / std::sqrt(-g[0][0]);
  double a = -ip(xi, T);
  if (!(a > 0.0)) throw DomainError("adapted_null_frame: direction is not future pointing");
  Vec<double, D> u;
  for (int i = 0; i < D; ++i) u[i] = xi[i] / a - T[i];
  Mat<double, D> E{};
  E[0] = xi;
  for (int i = 0; i < D; ++i) E[1][i] = -(T[i] - u[i]) / (2.0 * a);
  int found = 0;
  for (int c = 0; c < D && found < N - 1; ++c) {
    Vec<double, D> w{};
    w[c] = 1.0;
    double wt = ip(w, T), wu = ip(w, u);
    for (int i = 0; i < D; ++i) w[i] += wt * T[i] - wu * u[i];
    for (int b = 0; b < found; ++b) {
      double p = ip(w, E[2 + b]);
      for (int i = 0; i < D; ++i) w[i] -= p * E[2 + b][i];
    }
    double nn = ip(w, w);
    if (nn < 0.05) continue;
    for (int i = 0; i < D; ++i) w[i] /= std::sqrt(nn);
    E[2 + found] = w;
    ++found;
  }
  if (found != N - 1) throw NumericalError("adapted_null_frame: could not complete the spacelike frame");
  return E;
}

/// Geodesic position with a parallel frame E[0] = velocity, E[1..n] transported.
template <int K, int N>
struct FrameState {
  Vec<Jet<K, N + 1>, N + 1> x;
  Mat<Jet<K, N + 1>, N + 1> E;
};

template <int K, int N>
FrameState<K, N> frame_rhs(const MetricModel<N>& m, const FrameState<K, N>& y) {
  constexpr int D = N + 1;
  using S = Jet<K, D>;
  auto G = christoffel_at<K, N>(m, y.x);
  FrameState<K, N> r;
  r.x = y.E[0];
  for (int a = 0; a < D; ++a)
    for (int i = 0; i < D; ++i) {
      S s(0.0);
      for (int j = 0; j < D; ++j)
        for (int k = 0; k < D; ++k) s = s - G[i][j][k] * y.E[0][j] * y.E[a][k];
      r.E[a][i] = s;
    }
  return r;
}

template <int K, int N, class H>
FrameState<K, N> frame_rk4(const MetricModel<N>& m, const FrameState<K, N>& y, const H& h) {
  constexpr int D = N + 1;
  auto comb = [](const FrameState<K, N>& a, const FrameState<K, N>& b, const H& c) {
    FrameState<K, N> r;
    for (int i = 0; i < D; ++i) {
      r.x[i] = a.x[i] + b.x[i] * c;
      for (int k = 0; k < D; ++k) r.E[k][i] = a.E[k][i] + b.E[k][i] * c;
    }
    return r;
  };
  auto k1 = frame_rhs<K, N>(m, y);
  auto k2 = frame_rhs<K, N>(m, comb(y, k1, h * 0.5));
  auto k3 = frame_rhs<K, N>(m, comb(y, k2, h * 0.5));
  auto k4 = frame_rhs<K, N>(m, comb(y, k3, h));
  FrameState<K, N> r;
  for (int i = 0; i < D; ++i) {
    r.x[i] = y.x[i] + (k1.x[i] + 2.0 * k2.x[i] + 2.0 * k3.x[i] + k4.x[i]) * (h / 6.0);
    for (int k = 0; k < D; ++k)
      r.E[k][i] = y.E[k][i] + (k1.E[k][i] + 2.0 * k2.E[k][i] + 2.0 * k3.E[k][i] + k4.E[k][i]) * (h / 6.0);
  }
  return r;
}

/// Metric data of the Fermi chart at a point, with the contracted connection gam^c = g^{ab} Gamma^c_ab.
template <int N>
struct FermiGeometry {
  Vec<double, N + 1> x{};
  Mat<double, N + 1> g{}, gi{};
  Vec<double, N + 1> gam{};
  double sqrt_g = 0;
};

struct FermiOptions {
  double step = 1e-3;  ///< propagation step; frame nodes sit at half this spacing
  std::optional<double> s_lo, s_hi;
  std::optional<double> delta;
  int exp_steps = 4;
};

template <int N>
struct BeamFrame {
  static constexpr int D = N + 1;
  MetricModel<N> model;
  ChartPoint<N> p{};
  Vec<double, D> xi{};
  double h = 5e-4;
  int i0 = 0;
  double s_lo = 0, s_hi = 0;
  double delta = 0;
  int exp_steps = 4;
  std::vector<ChartPoint<N>> x;
  std::vector<Mat<double, D>> E;
  std::vector<Eigen::Matrix<double, N, N>> Dm;

  int size() const { return static_cast<int>(x.size()); }
  double s_at(int k) const { return (k - i0) * h; }
  int nearest(double s) const { return std::clamp(static_cast<int>(std::lround(s / h)) + i0, 0, size() - 1); }

  /// Fermi chart map (s, y^1..y^n) -> chart point, differentiable at jet level K (metric order K+1).
  template <int K>
  Vec<Jet<K, D>, D> map(const Vec<Jet<K, D>, D>& sy) const {
    using S = Jet<K, D>;
    int k = nearest(value(sy[0]));
    FrameState<K, N> y;
    for (int i = 0; i < D; ++i) {
      y.x[i] = S(x[k][i]);
      for (int a = 0; a < D; ++a) y.E[a][i] = S(E[k][a][i]);
    }
    S sig = sy[0] - s_at(k);
    y = frame_rk4<K, N>(model, y, sig);
    GeoState<K, N> z;
    z.x = y.x;
    for (int i = 0; i < D; ++i) {
      S w(0.0);
      for (int a = 1; a < D; ++a) w = w + sy[a] * y.E[a][i];
      z.v[i] = w;
    }
    double hh = 1.0 / exp_steps;
    for (int st = 0; st < exp_steps; ++st) z = rk4_step<K, N>(model, z, hh);
    return z.x;
  }
  ChartPoint<N> map(const Vec<double, D>& sy) const { return map<0>(sy); }

  Mat<double, D> jacobian(const Vec<double, D>& sy, ChartPoint<N>* q = nullptr) const {
    auto F = map<1>(jet_point<1, D>(sy));
    Mat<double, D> J;
    for (int i = 0; i < D; ++i) {
      if (q) (*q)[i] = F[i].v;
      for (int a = 0; a < D; ++a) J[i][a] = F[i].d[a];
    }
    return J;
  }

  /// Inverse chart by Newton; empty when q is off the tube of radius `delta` or outside the s-range.
  std::optional<Vec<double, D>> chart(const ChartPoint<N>& q) const {
    int best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (int k = 0; k < size(); k += 8) {
      double d = 0;
      for (int i = 0; i < D; ++i) d += (x[k][i] - q[i]) * (x[k][i] - q[i]);
      if (d < bd) {
        bd = d;
        best = k;
      }
    }
    for (int k = std::max(0, best - 8); k <= std::min(size() - 1, best + 8); ++k) {
      double d = 0;
      for (int i = 0; i < D; ++i) d += (x[k][i] - q[i]) * (x[k][i] - q[i]);
      if (d < bd) {
        bd = d;
        best = k;
      }
    }
    Eigen::Matrix<double, D, D> M;
    Eigen::Matrix<double, D, 1> r;
    for (int i = 0; i < D; ++i) {
      r(i) = q[i] - x[best][i];
      for (int a = 0; a < D; ++a) M(i, a) = E[best][a][i];
    }
    Eigen::Matrix<double, D, 1> c = M.fullPivLu().solve(r);
    Vec<double, D> sy;
    sy[0] = s_at(best) + c(0);
    for (int a = 1; a < D; ++a) sy[a] = c(a);
    auto off_tube = [&](const Vec<double, D>& z) {
      double y2 = 0;
      for (int a = 1; a < D; ++a) y2 += z[a] * z[a];
      return y2 > 4.0 * delta * delta || z[0] < s_lo - 4.0 * h || z[0] > s_hi + 4.0 * h;
    };
    if (off_tube(sy)) return std::nullopt;
    double scale = 1.0;
    for (double v : q) scale = std::max(scale, std::abs(v));
    for (int it = 0; it < 30; ++it) {
      ChartPoint<N> f;
      auto J = jacobian(sy, &f);
      double res = 0;
      for (int i = 0; i < D; ++i) {
        r(i) = q[i] - f[i];
        res = std::max(res, std::abs(r(i)));
        for (int a = 0; a < D; ++a) M(i, a) = J[i][a];
      }
      if (res <= 1e-13 * scale)
        return off_tube(sy) || sy[0] < s_lo - h || sy[0] > s_hi + h ? std::nullopt : std::optional(sy);
      c = M.fullPivLu().solve(r);
      for (int a = 0; a < D; ++a) sy[a] += c(a);
      if (off_tube(sy)) return std::nullopt;
    }
    return std::nullopt;
  }

  /// Pulled-back metric, its inverse and the contracted connection at a Fermi point.
  FermiGeometry<N> geometry(const Vec<double, D>& sy, const MetricModel<N>* other = nullptr) const {
    using S1 = Jet<1, D>;
    const MetricModel<N>& m = other ? *other : model;
    auto F = map<2>(jet_point<2, D>(sy));
    Vec<S1, D> x1;
    Mat<S1, D> J;
    for (int i = 0; i < D; ++i) {
      x1[i] = F[i].v;
      for (int a = 0; a < D; ++a) J[i][a] = F[i].d[a];
    }
    auto g = m.template metric<1>(x1);
    Mat<S1, D> gt;
    for (int a = 0; a < D; ++a)
      for (int b = a; b < D; ++b) {
        S1 s(0.0);
        for (int i = 0; i < D; ++i)
          for (int j = 0; j < D; ++j) s = s + J[i][a] * g[i][j] * J[j][b];
        gt[a][b] = s;
        gt[b][a] = s;
      }
    FermiGeometry<N> r;
    for (int i = 0; i < D; ++i) {
      r.x[i] = value(F[i]);
      for (int j = 0; j < D; ++j) r.g[i][j] = gt[i][j].v;
    }
    r.gi = inverse<double, D>(r.g);
    r.sqrt_g = std::sqrt(std::abs(det<double, D>(r.g)));
    // gam^c = g^{cd} g^{ab} (d_a g_db - 1/2 d_d g_ab)
    Vec<double, D> w{};
    for (int d = 0; d < D; ++d) {
      double s = 0;
      for (int a = 0; a < D; ++a)
        for (int b = 0; b < D; ++b) s += r.gi[a][b] * (gt[d][b].d[a] - 0.5 * gt[a][b].d[d]);
      w[d] = s;
    }
    for (int c = 0; c < D; ++c) {
      double s = 0;
      for (int d = 0; d < D; ++d) s += r.gi[c][d] * w[d];
      r.gam[c] = s;
    }
    return r;
  }

  /// Pulled-back metric as a second-order jet (chart map at jet level 3, metric order 4).
  Mat<Jet<2, D>, D> metric_jet2(const Vec<double, D>& sy) const {
    using S2 = Jet<2, D>;
    auto F = map<3>(jet_point<3, D>(sy));
    Vec<S2, D> x2;
    Mat<S2, D> J;
    for (int i = 0; i < D; ++i) {
      x2[i] = F[i].v;
      for (int a = 0; a < D; ++a) J[i][a] = F[i].d[a];
    }
    auto g = model.template metric<2>(x2);
    Mat<S2, D> gt;
    for (int a = 0; a < D; ++a)
      for (int b = a; b < D; ++b) {
        S2 s(0.0);
        for (int i = 0; i < D; ++i)
          for (int j = 0; j < D; ++j) s = s + J[i][a] * g[i][j] * J[j][b];
        gt[a][b] = s;
        gt[b][a] = s;
      }
    return gt;
  }
};

/// D_jk = -1/2 R(E0, Ej, E0, Ek) from the curvature along the axis.
template <int N>
Eigen::Matrix<double, N, N> beam_D_matrix(const MetricModel<N>& m, const ChartPoint<N>& x, const Mat<double, N + 1>& E) {
  constexpr int D = N + 1;
  auto R = riemann_at<0, N>(m, x);
  Eigen::Matrix<double, N, N> Dm;
  for (int j = 1; j < D; ++j)
    for (int k = 1; k < D; ++k) {
      double s = 0;
      for (int a = 0; a < D; ++a)
        for (int b = 0; b < D; ++b)
          for (int c = 0; c < D; ++c)
            for (int d = 0; d < D; ++d) s += R[a][b][c][d] * E[0][a] * E[j][b] * E[0][c] * E[k][d];
      Dm(j - 1, k - 1) = -0.5 * s;
    }
  return 0.5 * (Dm + Dm.transpose());
}

/// D_jk = 1/4 d^2 g^{11} / dy^j dy^k read off the pulled-back metric jet.
template <int N>
Eigen::Matrix<double, N, N> fermi_D_from_metric(const BeamFrame<N>& fr, double s) {
  constexpr int D = N + 1;
  Vec<double, D> sy{};
  sy[0] = s;
  auto gt = fr.metric_jet2(sy);
  auto gi = inverse<Jet<2, D>, D>(gt);
  Eigen::Matrix<double, N, N> Dm;
  for (int j = 1; j < D; ++j)
    for (int k = 1; k < D; ++k) Dm(j - 1, k - 1) = 0.25 * gi[1][1].d[j].d[k];
  return Dm;
}

template <int N>
void check_tube(const BeamFrame<N>& fr, double delta, double& worst_ratio) {
  constexpr int D = N + 1;
  worst_ratio = std::numeric_limits<double>::infinity();
  const int ns = 17;
  std::vector<Vec<double, N>> dirs;
  for (int a = 0; a < N; ++a)
    for (double sg : {-1.0, 1.0}) {
      Vec<double, N> d{};
      d[a] = sg;
      dirs.push_back(d);
    }
  if constexpr (N == 2)
    for (double s1 : {-1.0, 1.0})
      for (double s2 : {-1.0, 1.0}) dirs.push_back(Vec<double, N>{s1 / std::sqrt(2.0), s2 / std::sqrt(2.0)});
  for (int k = 0; k < ns; ++k) {
    double s = fr.s_lo + (fr.s_hi - fr.s_lo) * k / (ns - 1);
    Vec<double, D> sy{};
    sy[0] = s;
    double d0 = det<double, D>(fr.jacobian(sy));
    for (const auto& d : dirs) {
      for (int a = 0; a < N; ++a) sy[1 + a] = delta * d[a];
      double r = det<double, D>(fr.jacobian(sy)) / d0;
      if (!std::isfinite(r)) r = -1.0;
      worst_ratio = std::min(worst_ratio, r);
    }
  }
}

/**
 * Fermi frame along the null geodesic through (p, xi). The axis range defaults to the chart exits;
 * the tube radius defaults to 1/8 of the spatial distance from p to the chart edge, halved until
 * the chart Jacobian stays within a factor 4 of its on-axis value across the tube.
 */
template <int N>
BeamFrame<N> fermi_chart(const MetricModel<N>& m, const ChartPoint<N>& p, const Vec<double, N + 1>& xi,
                         const FermiOptions& opt = {}) {
  constexpr int D = N + 1;
  m.require_in_domain(p);
  if (!(opt.step > 0.0)) throw ConfigError("fermi_chart: step must be positive");
  if (opt.exp_steps < 1) throw ConfigError("fermi_chart: exp_steps must be >= 1");
  BeamFrame<N> fr;
  fr.model = m;
  fr.p = p;
  fr.xi = xi;
  fr.h = 0.5 * opt.step;
  fr.exp_steps = opt.exp_steps;
  auto E0 = adapted_null_frame<N>(m.metric(p), xi);
  double lo, hi;
  if (opt.s_lo && opt.s_hi) {
    lo = *opt.s_lo;
    hi = *opt.s_hi;
  } else {
    double span = 0;
    for (int i = 0; i < D; ++i) span += (m.domain.hi[i] - m.domain.lo[i]);
    double xn = 0;
    for (double v : xi) xn = std::max(xn, std::abs(v));
    double S = 4.0 * span / xn;
    auto path = integrate_geodesic<N>(m, Tangent<N>{p, xi}, -S, S);
    if (!path.exit_backward || !path.exit_forward) throw DomainError("fermi_chart: geodesic does not leave the chart");
    lo = opt.s_lo.value_or(*path.exit_backward);
    hi = opt.s_hi.value_or(*path.exit_forward);
  }
  if (!(lo < 0.0 && hi > 0.0)) throw DomainError("fermi_chart: axis range must contain s = 0 in its interior");
  int nb = static_cast<int>(std::floor(-lo / fr.h + 1e-9)), nf = static_cast<int>(std::floor(hi / fr.h + 1e-9));
  nb -= nb % 2;
  nf -= nf % 2;
  fr.i0 = nb;
  fr.s_lo = -nb * fr.h;
  fr.s_hi = nf * fr.h;
  int n = nb + nf + 1;
  fr.x.resize(n);
  fr.E.resize(n);
  fr.Dm.resize(n);
  FrameState<0, N> y0{p, E0};
  fr.x[nb] = p;
  fr.E[nb] = E0;
  for (int dir : {1, -1}) {
    FrameState<0, N> y = y0;
    int cnt = dir > 0 ? nf : nb;
    for (int k = 1; k <= cnt; ++k) {
      y = frame_rk4<0, N>(m, y, dir * fr.h);
      fr.x[nb + dir * k] = y.x;
      fr.E[nb + dir * k] = y.E;
    }
  }
  for (int k = 0; k < n; ++k) fr.Dm[k] = beam_D_matrix<N>(m, fr.x[k], fr.E[k]);

  double worst = 0;
  if (opt.delta) {
    if (!(*opt.delta > 0.0)) throw ConfigError("fermi_chart: delta must be positive");
    check_tube(fr, *opt.delta, worst);
    if (!(worst > 0.25)) {
      std::ostringstream os;
      os << "fermi_chart: tube of radius " << *opt.delta << " degenerates (Jacobian ratio " << worst
         << "); shrink delta to " << 0.5 * *opt.delta;
      throw DomainError(os.str());
    }
    fr.delta = *opt.delta;
  } else {
    double dist = std::numeric_limits<double>::infinity();
    for (int i = 1; i < D; ++i) dist = std::min({dist, p[i] - m.domain.lo[i], m.domain.hi[i] - p[i]});
    double d = dist / 8.0;
    for (int it = 0;; ++it) {
      check_tube(fr, d, worst);
      if (worst > 0.25) break;
      if (it == 30) throw NumericalError("fermi_chart: no admissible tube radius found");
      d *= 0.5;
    }
    fr.delta = d;
  }
  return fr;
}

/// Largest deviation of the on-axis metric from 2 ds dy^1 + sum dy^a dy^a and of its first derivatives from zero.
struct FermiCheck {
  double metric_dev = 0, derivative_dev = 0, axis_dev = 0;
};

template <int N>
FermiCheck fermi_check(const BeamFrame<N>& fr, int n_points = 21) {
  constexpr int D = N + 1;
  FermiCheck c;
  Mat<double, D> eta{};
  eta[0][1] = eta[1][0] = 1.0;
  for (int a = 2; a < D; ++a) eta[a][a] = 1.0;
  auto path = integrate_geodesic<N>(fr.model, Tangent<N>{fr.p, fr.xi}, fr.s_lo, fr.s_hi, 1e-3);
  for (int k = 0; k < n_points; ++k) {
    double s = fr.s_lo + (fr.s_hi - fr.s_lo) * k / (n_points - 1);
    Vec<double, D> sy{};
    sy[0] = s;
    auto F = fr.template map<2>(jet_point<2, D>(sy));
    Vec<Jet<1, D>, D> x1;
    Mat<Jet<1, D>, D> J;
    for (int i = 0; i < D; ++i) {
      x1[i] = F[i].v;
      for (int a = 0; a < D; ++a) J[i][a] = F[i].d[a];
    }
    auto g = fr.model.template metric<1>(x1);
    for (int a = 0; a < D; ++a)
      for (int b = 0; b < D; ++b) {
        Jet<1, D> t(0.0);
        for (int i = 0; i < D; ++i)
          for (int j = 0; j < D; ++j) t = t + J[i][a] * g[i][j] * J[j][b];
        c.metric_dev = std::max(c.metric_dev, std::abs(t.v - eta[a][b]));
        for (int e = 0; e < D; ++e) c.derivative_dev = std::max(c.derivative_dev, std::abs(t.d[e]));
      }
  }
  // independent geodesic samples mapped back through the inverse chart
  int stride = std::max<int>(1, static_cast<int>(path.samples.size()) / n_points);
  for (std::size_t k = 0; k < path.samples.size(); k += stride) {
    const auto& ps = path.samples[k];
    if (ps.s < fr.s_lo || ps.s > fr.s_hi) continue;
    auto sy = fr.chart(ps.q);
    if (!sy) {
      c.axis_dev = std::numeric_limits<double>::infinity();
      continue;
    }
    c.axis_dev = std::max(c.axis_dev, std::abs((*sy)[0] - ps.s));
    for (int a = 1; a < D; ++a) c.axis_dev = std::max(c.axis_dev, std::abs((*sy)[a]));
  }
  return c;
}

template <int N>
struct BeamState {
  static constexpr int D = N + 1;
  using CMat = Eigen::Matrix<cplx, N, N>;
  using RMat = Eigen::Matrix<double, N, N>;

  BeamFrame<N> frame;
  CMat H0, Y0;
  RMat C;
  double h = 1e-3;
  int i0 = 0;
  std::vector<CMat> Y, Z, H;
  std::vector<cplx> a;
  double max_invariant_drift = 0;  ///< relative drift of det(Im H) |det Y|^2
  double min_imH_eig = std::numeric_limits<double>::infinity();
  double max_imH_eig = 0;
  double max_branch_step = 0;  ///< largest |arg| change of a00 between nodes

  int size() const { return static_cast<int>(H.size()); }
  double s_at(int k) const { return (k - i0) * h; }
  double s_lo() const { return s_at(0); }
  double s_hi() const { return s_at(size() - 1); }
  double delta() const { return frame.delta; }

  const RMat& Dm(int k) const { return frame.Dm[2 * k]; }
  CMat Hdot(int k) const { return -(H[k] * C * H[k]) - Dm(k).template cast<cplx>(); }

  struct Local {
    CMat H, Hd, Hdd;
    cplx a, ad, add;
  };

  Local at_node(int k) const {
    Local l;
    l.H = H[k];
    l.Hd = Hdot(k);
    int f = 2 * k;
    int fm = std::max(0, f - 1), fp = std::min(frame.size() - 1, f + 1);
    RMat Dd = (frame.Dm[fp] - frame.Dm[fm]) / ((fp - fm) * frame.h);
    l.Hdd = -(l.Hd * C * l.H + l.H * C * l.Hd) - Dd.template cast<cplx>();
    l.a = a[k];
    cplx tr = (C.template cast<cplx>() * l.H).trace();
    cplx trd = (C.template cast<cplx>() * l.Hd).trace();
    l.ad = -0.5 * tr * l.a;
    l.add = -0.5 * trd * l.a - 0.5 * tr * l.ad;
    return l;
  }

  /// Cubic Hermite interpolation of H and a00 between nodes (Hdd, add left at zero).
  Local at(double s) const {
    double u = s / h + i0;
    int k = std::clamp(static_cast<int>(std::floor(u)), 0, size() - 2);
    double t = u - k;
    Local A = at_node(k), B = at_node(k + 1);
    double h00 = (1 + 2 * t) * (1 - t) * (1 - t), h10 = t * (1 - t) * (1 - t), h01 = t * t * (3 - 2 * t),
           h11 = t * t * (t - 1);
    double d00 = 6 * t * t - 6 * t, d10 = 3 * t * t - 4 * t + 1, d01 = -d00, d11 = 3 * t * t - 2 * t;
    Local l;
    l.H = h00 * A.H + h * h10 * A.Hd + h01 * B.H + h * h11 * B.Hd;
    l.Hd = (d00 * A.H + d01 * B.H) / h + d10 * A.Hd + d11 * B.Hd;
    l.Hdd = CMat::Zero();
    l.a = h00 * A.a + h * h10 * A.ad + h01 * B.a + h * h11 * B.ad;
    l.ad = (d00 * A.a + d01 * B.a) / h + d10 * A.ad + d11 * B.ad;
    l.add = 0.0;
    return l;
  }
};

/**
 * Integrate dY/ds = C Z, dZ/ds = -D Y with RK4 at the frame's propagation step, from s = 0 in both
 * directions. H = Z Y^{-1} and a00 = (det Y)^{-1/2} with the square-root branch followed continuously.
 */
template <int N>
BeamState<N> beam_propagate(const BeamFrame<N>& fr, const Eigen::Matrix<cplx, N, N>& H0,
                            const Eigen::Matrix<cplx, N, N>& Y0) {
  using CMat = Eigen::Matrix<cplx, N, N>;
  using RMat = Eigen::Matrix<double, N, N>;
  if ((H0 - H0.transpose()).norm() > 1e-12 * (1.0 + H0.norm())) throw DomainError("beam_propagate: H0 not symmetric");
  RMat imH0 = H0.imag();
  Eigen::SelfAdjointEigenSolver<RMat> es0(0.5 * (imH0 + imH0.transpose()));
  if (!(es0.eigenvalues().minCoeff() > 0.0)) throw DomainError("beam_propagate: Im H0 is not positive definite");
  if (std::abs(Y0.determinant()) < 1e-14) throw DomainError("beam_propagate: Y0 is singular");
  BeamState<N> st;
  st.frame = fr;
  st.H0 = H0;
  st.Y0 = Y0;
  st.C = RMat::Zero();
  for (int j = 1; j < N; ++j) st.C(j, j) = 2.0;
  st.h = 2.0 * fr.h;
  int nb = fr.i0 / 2, nf = (fr.size() - 1 - fr.i0) / 2;
  if (fr.i0 % 2 != 0) throw ConfigError("beam_propagate: frame origin not on a propagation node");
  st.i0 = nb;
  int n = nb + nf + 1;
  st.Y.resize(n);
  st.Z.resize(n);
  st.H.resize(n);
  st.a.resize(n);
  CMat C = st.C.template cast<cplx>();
  const double inv0 = imH0.determinant();
  auto record = [&](int k, cplx prev_a, bool first) {
    cplx dY = st.Y[k].determinant();
    if (std::abs(dY) < 1e-12 * std::abs(Y0.determinant()))
      throw NumericalError("beam_propagate: det Y reached zero at s = " + std::to_string(st.s_at(k)));
    st.H[k] = st.Z[k] * st.Y[k].inverse();
    st.H[k] = 0.5 * (st.H[k] + st.H[k].transpose()).eval();
    cplx c = 1.0 / std::sqrt(dY);
    if (!first && std::abs(c - prev_a) > std::abs(-c - prev_a)) c = -c;
    if (!first) st.max_branch_step = std::max(st.max_branch_step, std::abs(std::arg(c / prev_a)));
    st.a[k] = c;
    RMat im = st.H[k].imag();
    Eigen::SelfAdjointEigenSolver<RMat> es(0.5 * (im + im.transpose()));
    st.min_imH_eig = std::min(st.min_imH_eig, es.eigenvalues().minCoeff());
    st.max_imH_eig = std::max(st.max_imH_eig, es.eigenvalues().maxCoeff());
    double inv = im.determinant() * std::norm(dY);
    st.max_invariant_drift = std::max(st.max_invariant_drift, std::abs(inv / inv0 - 1.0));
  };
  st.Y[nb] = Y0;
  st.Z[nb] = H0 * Y0;
  record(nb, 0.0, true);
  for (int dir : {1, -1}) {
    int cnt = dir > 0 ? nf : nb;
    double hs = dir * st.h;
    for (int k = 1; k <= cnt; ++k) {
      int prev = nb + dir * (k - 1), cur = nb + dir * k;
      int f0 = 2 * prev;
      CMat D0 = fr.Dm[f0].template cast<cplx>(), Dh = fr.Dm[f0 + dir].template cast<cplx>(),
           D1 = fr.Dm[f0 + 2 * dir].template cast<cplx>();
      const CMat &Y = st.Y[prev], &Z = st.Z[prev];
      CMat k1y = C * Z, k1z = -D0 * Y;
      CMat k2y = C * (Z + 0.5 * hs * k1z), k2z = -Dh * (Y + 0.5 * hs * k1y);
      CMat k3y = C * (Z + 0.5 * hs * k2z), k3z = -Dh * (Y + 0.5 * hs * k2y);
      CMat k4y = C * (Z + hs * k3z), k4z = -D1 * (Y + hs * k3y);
      st.Y[cur] = Y + (hs / 6.0) * (k1y + 2.0 * k2y + 2.0 * k3y + k4y);
      st.Z[cur] = Z + (hs / 6.0) * (k1z + 2.0 * k2z + 2.0 * k3z + k4z);
      record(cur, st.a[prev], false);
    }
  }
  if (!(st.min_imH_eig > 0.0)) throw NumericalError("beam_propagate: Im H lost positive definiteness");
  return st;
}

template <int N>
BeamState<N> beam_propagate(const BeamFrame<N>& fr) {
  using CMat = Eigen::Matrix<cplx, N, N>;
  return beam_propagate<N>(fr, cplx(0, 1) * CMat::Identity(), CMat::Identity());
}

/// Local Taylor data of the lambda > 0 beam at a Fermi point.
template <int N>
CTaylor2<N + 1> beam_taylor(const BeamState<N>& st, const typename BeamState<N>::Local& l, double lambda,
                            const Vec<double, N + 1>& sy) {
  constexpr int D = N + 1;
  Eigen::Matrix<cplx, N, 1> y;
  for (int a = 0; a < N; ++a) y(a) = sy[1 + a];
  Eigen::Matrix<cplx, N, 1> Hy = l.H * y, Hdy = l.Hd * y;
  CTaylor2<D> phi;
  phi.v = y(0) + (y.transpose() * Hy)(0);
  phi.g[0] = (y.transpose() * Hdy)(0);
  for (int a = 0; a < N; ++a) phi.g[1 + a] = (a == 0 ? 1.0 : 0.0) + 2.0 * Hy(a);
  phi.h[0][0] = (y.transpose() * (l.Hdd * y))(0);
  for (int a = 0; a < N; ++a) {
    phi.h[0][1 + a] = phi.h[1 + a][0] = 2.0 * Hdy(a);
    for (int b = 0; b < N; ++b) phi.h[1 + a][1 + b] = 2.0 * l.H(a, b);
  }
  CTaylor2<D> e;
  e.v = cplx(0, lambda) * phi.v;
  for (int i = 0; i < D; ++i) {
    e.g[i] = cplx(0, lambda) * phi.g[i];
    for (int j = 0; j < D; ++j) e.h[i][j] = cplx(0, lambda) * phi.h[i][j];
  }
  CTaylor2<D> amp;
  double q = 0;
  for (int a = 0; a < N; ++a) q += sy[1 + a] * sy[1 + a];
  double d2 = st.delta() * st.delta();
  auto cj = cutoff_sq_jet(q / d2);
  // chi(q/d^2) a(s)
  amp.v = cj[0] * l.a;
  amp.g[0] = cj[0] * l.ad;
  amp.h[0][0] = cj[0] * l.add;
  for (int a = 0; a < N; ++a) {
    double qa = 2.0 * sy[1 + a] / d2;
    amp.g[1 + a] = cj[1] * qa * l.a;
    amp.h[0][1 + a] = amp.h[1 + a][0] = cj[1] * qa * l.ad;
    for (int b = 0; b < N; ++b) {
      double qb = 2.0 * sy[1 + b] / d2;
      amp.h[1 + a][1 + b] = (cj[2] * qa * qb + (a == b ? cj[1] * 2.0 / d2 : 0.0)) * l.a;
    }
  }
  return amp * texp(e);
}

template <int N>
struct BeamValue {
  cplx value{};
  Vec<cplx, N + 1> grad{};
  bool inside = false;
  Vec<double, N + 1> sy{};
};

/**
 * Beam value (and chart-coordinate gradient) at q. Negative lambda gives the complex conjugate of the
 * |lambda| beam. Points off the cutoff support evaluate to exactly 0.
 */
template <int N>
BeamValue<N> beam_eval(const BeamState<N>& st, double lambda, const ChartPoint<N>& q, bool with_grad = false) {
  constexpr int D = N + 1;
  if (lambda == 0.0) throw DomainError("beam_eval: lambda must be nonzero");
  BeamValue<N> r;
  auto sy = st.frame.chart(q);
  if (!sy) return r;
  double y2 = 0;
  for (int a = 1; a < D; ++a) y2 += (*sy)[a] * (*sy)[a];
  r.sy = *sy;
  if (y2 >= 0.25 * st.delta() * st.delta()) return r;
  r.inside = true;
  auto l = st.at((*sy)[0]);
  auto u = beam_taylor<N>(st, l, std::abs(lambda), *sy);
  r.value = lambda > 0 ? u.v : std::conj(u.v);
  if (with_grad) {
    auto J = st.frame.jacobian(*sy);
    Eigen::Matrix<double, D, D> M;
    for (int i = 0; i < D; ++i)
      for (int a = 0; a < D; ++a) M(i, a) = J[i][a];
    Eigen::Matrix<double, D, D> Mi = M.inverse();
    for (int i = 0; i < D; ++i) {
      cplx s = 0;
      for (int a = 0; a < D; ++a) s += Mi(a, i) * u.g[a];
      r.grad[i] = lambda > 0 ? s : std::conj(s);
    }
  }
  return r;
}

/// Eikonal and leading transport residuals on the axis.
struct AxisReport {
  double eikonal = 0;    ///< max over |alpha| <= 2 of |d^alpha <d phi, d phi>| in the transverse variables
  double transport = 0;  ///< max |2<d phi, d a00> - (box phi) a00| / |a00|
  double D_mismatch = 0; ///< max |1/4 d^2 g^{11} - D| between the metric jet and the curvature formula
};

template <int N>
AxisReport beam_axis_check(const BeamState<N>& st, int n_points = 9) {
  constexpr int D = N + 1;
  AxisReport rep;
  for (int p = 0; p < n_points; ++p) {
    int k = static_cast<int>(std::lround((st.size() - 1) * (p + 0.5) / n_points));
    double s = st.s_at(k);
    auto l = st.at_node(k);
    Vec<double, D> sy{};
    sy[0] = s;
    auto gt = st.frame.metric_jet2(sy);
    auto gi = inverse<Jet<2, D>, D>(gt);
    // d_a phi as local Taylor data at the axis
    std::array<CTaylor2<D>, D> dphi{};
    for (int a = 0; a < N; ++a)
      for (int b = 0; b < N; ++b) dphi[0].h[1 + a][1 + b] = 2.0 * l.Hd(a, b);
    for (int j = 0; j < N; ++j) {
      dphi[1 + j].v = j == 0 ? 1.0 : 0.0;
      for (int k2 = 0; k2 < N; ++k2) {
        dphi[1 + j].g[1 + k2] = 2.0 * l.H(j, k2);
        dphi[1 + j].h[0][1 + k2] = dphi[1 + j].h[1 + k2][0] = 2.0 * l.Hd(j, k2);
      }
    }
    CTaylor2<D> eik;
    for (int a = 0; a < D; ++a)
      for (int b = 0; b < D; ++b) eik = eik + to_taylor<D>(gi[a][b]) * dphi[a] * dphi[b];
    rep.eikonal = std::max(rep.eikonal, std::abs(eik.v));
    for (int j = 1; j < D; ++j) {
      rep.eikonal = std::max(rep.eikonal, std::abs(eik.g[j]));
      for (int m = 1; m < D; ++m) rep.eikonal = std::max(rep.eikonal, std::abs(eik.h[j][m]));
    }
    // transport: 2 g^{ab} d_a phi d_b a - (box phi) a, box phi = -g^{ab} d_ab phi + gam^c d_c phi
    Mat<double, D> g0, gi0;
    for (int a = 0; a < D; ++a)
      for (int b = 0; b < D; ++b) {
        g0[a][b] = gt[a][b].v.v;
        gi0[a][b] = gi[a][b].v.v;
      }
    Vec<double, D> w{};
    for (int d = 0; d < D; ++d)
      for (int a = 0; a < D; ++a)
        for (int b = 0; b < D; ++b) w[d] += gi0[a][b] * (gt[d][b].d[a].v - 0.5 * gt[a][b].d[d].v);
    Vec<double, D> gam{};
    for (int c = 0; c < D; ++c)
      for (int d = 0; d < D; ++d) gam[c] += gi0[c][d] * w[d];
    cplx box = 0;
    for (int a = 0; a < N; ++a)
      for (int b = 0; b < N; ++b) box -= gi0[1 + a][1 + b] * 2.0 * l.H(a, b);
    box += gam[1];
    cplx tr = 2.0 * gi0[0][1] * l.ad - box * l.a;
    rep.transport = std::max(rep.transport, std::abs(tr) / std::abs(l.a));
    Eigen::Matrix<double, N, N> Dad;
    for (int j = 1; j < D; ++j)
      for (int m = 1; m < D; ++m) Dad(j - 1, m - 1) = 0.25 * gi[1][1].d[j].d[m];
    rep.D_mismatch = std::max(rep.D_mismatch, (Dad - st.Dm(k)).cwiseAbs().maxCoeff());
  }
  return rep;
}

struct ResidualGrid {
  int ns = 48;                  ///< axis quadrature nodes
  int ny = 0;                   ///< transverse points per direction; 0 picks the resolution rule
  double points_per_width = 8;  ///< minimum points per Gaussian width at the largest lambda
  int geometry_points = 17;     ///< transverse nodes of the interpolated geometry table
};

struct ResidualReport {
  double lambda = 0;
  double residual_norm = 0;  ///< ||(box + V) U||_2 over the tube
  double beam_norm = 0;      ///< ||U||_2 over the tube
  double normalized = 0;     ///< residual_norm / (lambda beam_norm)
  double width = 0, spacing = 0;
  long points = 0;
};

namespace detail {
inline std::array<double, 4> lagrange4(double t) {
  // nodes at -1, 0, 1, 2
  return {-t * (t - 1) * (t - 2) / 6.0, (t + 1) * (t - 1) * (t - 2) / 2.0, -(t + 1) * t * (t - 2) / 2.0,
          (t + 1) * t * (t - 1) / 6.0};
}
}  // namespace detail

/**
 * L2 norm of (box + V) U_lambda over the tube, by midpoint quadrature in Fermi coordinates. The pulled-back
 * geometry is tabulated per axis node on a transverse grid and interpolated with 4-point Lagrange stencils.
 */
template <int N>
std::vector<ResidualReport> beam_residual(const MetricModel<N>& m, const ScalarField<N + 1>& V, const BeamState<N>& st,
                                          const std::vector<double>& lambdas, const ResidualGrid& grid = {}) {
  constexpr int D = N + 1;
  if (lambdas.empty()) return {};
  double lmax = 0;
  for (double l : lambdas) {
    if (!(l > 0)) throw DomainError("beam_residual: lambda must be positive");
    lmax = std::max(lmax, l);
  }
  const double dl = st.delta();
  const double R = 0.5 * dl;
  double width = 1.0 / std::sqrt(lmax * st.max_imH_eig);
  int ny = grid.ny > 0 ? grid.ny : static_cast<int>(std::ceil(2.0 * R * grid.points_per_width / width));
  double dy = 2.0 * R / ny;
  if (dy > width / grid.points_per_width * (1 + 1e-12)) {
    std::ostringstream os;
    os << "beam_residual: transverse spacing " << dy << " does not resolve the beam width " << width << " with "
       << grid.points_per_width << " points";
    throw DomainError(os.str());
  }
  const int mg = std::max(4, grid.geometry_points);
  const double dg = 2.0 * R / (mg - 1);
  const int nfield = D * (D + 1) / 2 + D + 1 + D;
  std::vector<ResidualReport> out(lambdas.size());
  std::vector<double> r2(lambdas.size(), 0.0), u2(lambdas.size(), 0.0);
  std::vector<long> npts(lambdas.size(), 0);
  const double ds = (st.s_hi() - st.s_lo()) / grid.ns;
  int tsize = 1;
  for (int a = 0; a < N; ++a) tsize *= mg;
  std::vector<double> table(static_cast<std::size_t>(tsize) * nfield);
  for (int is = 0; is < grid.ns; ++is) {
    double s_target = st.s_lo() + (is + 0.5) * ds;
    int k = std::clamp(static_cast<int>(std::lround(s_target / st.h)) + st.i0, 0, st.size() - 1);
    double s = st.s_at(k);
    auto l = st.at_node(k);
    for (int t = 0; t < tsize; ++t) {
      Vec<double, D> sy{};
      sy[0] = s;
      int rem = t;
      for (int a = 0; a < N; ++a) {
        sy[1 + a] = -R + dg * (rem % mg);
        rem /= mg;
      }
      auto G = st.frame.geometry(sy, &m);
      double* f = &table[static_cast<std::size_t>(t) * nfield];
      int c = 0;
      for (int a = 0; a < D; ++a)
        for (int b = a; b < D; ++b) f[c++] = G.gi[a][b];
      for (int a = 0; a < D; ++a) f[c++] = G.gam[a];
      f[c++] = G.sqrt_g;
      for (int a = 0; a < D; ++a) f[c++] = G.x[a];
    }
    std::vector<double> fv(nfield);
    std::array<int, N> idx{};
    for (;;) {
      Vec<double, D> sy{};
      sy[0] = s;
      double y2 = 0;
      for (int a = 0; a < N; ++a) {
        sy[1 + a] = -R + (idx[a] + 0.5) * dy;
        y2 += sy[1 + a] * sy[1 + a];
      }
      if (y2 < R * R) {
        std::fill(fv.begin(), fv.end(), 0.0);
        std::array<int, N> base{};
        std::array<std::array<double, 4>, N> w{};
        for (int a = 0; a < N; ++a) {
          double u = (sy[1 + a] + R) / dg;
          int b = std::clamp(static_cast<int>(std::floor(u)), 1, mg - 3);
          base[a] = b - 1;
          w[a] = detail::lagrange4(u - b);
        }
        int nst = 1;
        for (int a = 0; a < N; ++a) nst *= 4;
        for (int q = 0; q < nst; ++q) {
          int rem = q, t = 0, mul = 1;
          double wt = 1.0;
          for (int a = 0; a < N; ++a) {
            int o = rem % 4;
            rem /= 4;
            wt *= w[a][o];
            t += (base[a] + o) * mul;
            mul *= mg;
          }
          const double* f = &table[static_cast<std::size_t>(t) * nfield];
          for (int c = 0; c < nfield; ++c) fv[c] += wt * f[c];
        }
        Mat<double, D> gi;
        Vec<double, D> gam, x;
        int c = 0;
        for (int a = 0; a < D; ++a)
          for (int b = a; b < D; ++b) gi[a][b] = gi[b][a] = fv[c++];
        for (int a = 0; a < D; ++a) gam[a] = fv[c++];
        double sq = fv[c++];
        for (int a = 0; a < D; ++a) x[a] = fv[c++];
        double Vx = V(x);
        double vol = sq * ds * std::pow(dy, N);
        for (std::size_t li = 0; li < lambdas.size(); ++li) {
          auto u = beam_taylor<N>(st, l, lambdas[li], sy);
          cplx res = Vx * u.v;
          for (int a = 0; a < D; ++a) {
            res += gam[a] * u.g[a];
            for (int b = 0; b < D; ++b) res -= gi[a][b] * u.h[a][b];
          }
          r2[li] += std::norm(res) * vol;
          u2[li] += std::norm(u.v) * vol;
          ++npts[li];
        }
      }
      int a = 0;
      while (a < N && ++idx[a] == ny) idx[a++] = 0;
      if (a == N) break;
    }
  }
  for (std::size_t li = 0; li < lambdas.size(); ++li) {
    auto& o = out[li];
    o.lambda = lambdas[li];
    o.residual_norm = std::sqrt(r2[li]);
    o.beam_norm = std::sqrt(u2[li]);
    o.normalized = o.residual_norm / (o.lambda * o.beam_norm);
    o.width = 1.0 / std::sqrt(o.lambda * st.max_imH_eig);
    o.spacing = dy;
    o.points = npts[li];
  }
  return out;
}

/// Least-squares slope of log(y) against log(x).
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double a = std::log(x[i]), b = std::log(y[i]);
    sx += a;
    sy += b;
    sxx += a * a;
    sxy += a * b;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

struct BoundaryData {
  std::vector<cplx> f;
  int nonzero = 0;
  double t_min = std::numeric_limits<double>::infinity();
  double t_max = -std::numeric_limits<double>::infinity();
};

/**
 * Samples of eta(t) U_lambda at the given lateral-boundary points. Any nonzero sample at t >= T1 - eps
 * is a configuration error reporting the leak.
 */
template <int N>
BoundaryData beam_boundary_data(const BeamState<N>& st, double lambda, const TimeCutoff& eta,
                                const std::vector<ChartPoint<N>>& sigma) {
  BoundaryData bd;
  bd.f.resize(sigma.size());
  for (std::size_t i = 0; i < sigma.size(); ++i) {
    double e = eta(sigma[i][0]);
    if (e == 0.0) continue;
    auto v = beam_eval<N>(st, lambda, sigma[i]);
    bd.f[i] = e * v.value;
    if (bd.f[i] != cplx(0.0)) {
      ++bd.nonzero;
      bd.t_min = std::min(bd.t_min, sigma[i][0]);
      bd.t_max = std::max(bd.t_max, sigma[i][0]);
    }
  }
  if (bd.nonzero > 0 && bd.t_max >= eta.T1 - eta.eps) {
    std::ostringstream os;
    os << "beam_boundary_data: support reaches t = " << bd.t_max << ", past T1 - eps = " << eta.T1 - eta.eps
       << " (leak " << bd.t_max - (eta.T1 - eta.eps) << ")";
    throw ConfigError(os.str());
  }
  return bd;
}

}  // namespace lorcal
