/** @file geodesics.hpp
 *  @brief Geodesic integration, exponential and logarithm maps, r_p and causal classification.
 */
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "geometry.hpp"

namespace lorcal {

/// Geodesic acceleration -Gamma^i_jk v^j v^k at jet level K (needs metric order K+1).
template <int K, int N>
Vec<Jet<K, N + 1>, N + 1> geodesic_accel(const MetricModel<N>& m, const Vec<Jet<K, N + 1>, N + 1>& x,
                                         const Vec<Jet<K, N + 1>, N + 1>& v) {
  constexpr int D = N + 1;
  using S = Jet<K, D>;
  auto G = m.template metric<K + 1>(lift_point<K, D>(x));
  Mat<S, D> g;
  for (int i = 0; i < D; ++i)
    for (int j = 0; j < D; ++j) g[i][j] = G[i][j].v;
  // dv[i][j] = d_v g_ij = sum_k v^k d_k g_ij
  Mat<S, D> dv;
  for (int i = 0; i < D; ++i)
    for (int j = i; j < D; ++j) {
      S s(0.0);
      for (int k = 0; k < D; ++k) s = s + G[i][j].d[k] * v[k];
      dv[i][j] = s;
      dv[j][i] = s;
    }
  Vec<S, D> w;  // w_l = (d_v g)_lk v^k - 1/2 d_l g(v,v)
  for (int l = 0; l < D; ++l) {
    S s(0.0);
    for (int k = 0; k < D; ++k) s = s + dv[l][k] * v[k];
    S q(0.0);
    for (int j = 0; j < D; ++j)
      for (int k = 0; k < D; ++k) q = q + G[j][k].d[l] * v[j] * v[k];
    w[l] = s - 0.5 * q;
  }
  auto gi = inverse<S, D>(g);
  Vec<S, D> a;
  for (int i = 0; i < D; ++i) {
    S s(0.0);
    for (int l = 0; l < D; ++l) s = s - gi[i][l] * w[l];
    a[i] = s;
  }
  return a;
}

template <int K, int N>
struct GeoState {
  Vec<Jet<K, N + 1>, N + 1> x, v;
};

/// One classical RK4 step of the first-order geodesic system.
template <int K, int N, class H>
GeoState<K, N> rk4_step(const MetricModel<N>& m, const GeoState<K, N>& y, const H& h) {
  constexpr int D = N + 1;
  using S = Jet<K, D>;
  auto axpy = [](const Vec<S, D>& a, const Vec<S, D>& b, const H& c) {
    Vec<S, D> r;
    for (int i = 0; i < D; ++i) r[i] = a[i] + b[i] * c;
    return r;
  };
  auto k1v = geodesic_accel<K, N>(m, y.x, y.v);
  auto k1x = y.v;
  auto x2 = axpy(y.x, k1x, h * 0.5), v2 = axpy(y.v, k1v, h * 0.5);
  auto k2v = geodesic_accel<K, N>(m, x2, v2);
  auto k2x = v2;
  auto x3 = axpy(y.x, k2x, h * 0.5), v3 = axpy(y.v, k2v, h * 0.5);
  auto k3v = geodesic_accel<K, N>(m, x3, v3);
  auto k3x = v3;
  auto x4 = axpy(y.x, k3x, h), v4 = axpy(y.v, k3v, h);
  auto k4v = geodesic_accel<K, N>(m, x4, v4);
  auto k4x = v4;
  GeoState<K, N> r;
  for (int i = 0; i < D; ++i) {
    r.x[i] = y.x[i] + (k1x[i] + 2.0 * k2x[i] + 2.0 * k3x[i] + k4x[i]) * (h / 6.0);
    r.v[i] = y.v[i] + (k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i]) * (h / 6.0);
  }
  return r;
}

template <int N>
double metric_norm(const MetricModel<N>& m, const ChartPoint<N>& x, const Vec<double, N + 1>& v) {
  return quad<double, N + 1>(m.metric(x), v, v);
}

template <int N, class S>
Vec<double, N + 1> value_vec(const Vec<S, N + 1>& x) {
  Vec<double, N + 1> r;
  for (int i = 0; i <= N; ++i) r[i] = value(x[i]);
  return r;
}

/// Which boundary component a chart point lies on (closest face).
template <int N>
std::string exit_face(const Box<N>& b, const ChartPoint<N>& q) {
  int best = 0;
  bool hi = false;
  double d = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= N; ++i) {
    if (std::abs(q[i] - b.lo[i]) < d) {
      d = std::abs(q[i] - b.lo[i]);
      best = i;
      hi = false;
    }
    if (std::abs(q[i] - b.hi[i]) < d) {
      d = std::abs(q[i] - b.hi[i]);
      best = i;
      hi = true;
    }
  }
  if (best == 0) return hi ? "t=+T" : "t=-T";
  return "sigma:x" + std::to_string(best) + (hi ? "=hi" : "=lo");
}

/// Causal character of a vector at a point.
enum class Causal { timelike, null, spacelike, zero };

inline const char* to_string(Causal c) {
  switch (c) {
    case Causal::timelike: return "timelike";
    case Causal::null: return "null";
    case Causal::spacelike: return "spacelike";
    default: return "zero";
  }
}

template <int N>
Causal causal_character(const Mat<double, N + 1>& g, const Vec<double, N + 1>& v, double rel_tol = 1e-10) {
  double e2 = 0;
  for (double x : v) e2 += x * x;
  if (e2 == 0.0) return Causal::zero;
  double n = quad<double, N + 1>(g, v, v);
  if (std::abs(n) <= rel_tol * e2) return Causal::null;
  return n < 0 ? Causal::timelike : Causal::spacelike;
}

template <int N>
struct PathSample {
  double s;
  ChartPoint<N> q;
  Vec<double, N + 1> qdot;
  double norm;
};

template <int N>
struct GeodesicPath {
  Tangent<N> initial;
  std::vector<PathSample<N>> samples;
  std::optional<double> exit_backward, exit_forward;
  std::string face_backward, face_forward;
  double max_norm_drift = 0;
};

/**
 * Integrate the geodesic through v over [s_min, s_max] (s_min <= 0 <= s_max) with RK4.
 * The base step is 1e-3 of the range; a step is halved while the norm drift it introduces
 * exceeds `drift_tol`. Chart exits are located by bisection to 1e-8 in the affine parameter.
 */
template <int N>
GeodesicPath<N> integrate_geodesic(const MetricModel<N>& m, const Tangent<N>& v, double s_min, double s_max,
                                   double base_step_fraction = 1e-3, double drift_tol = 1e-10) {
  m.require_in_domain(v.base);
  double e2 = 0;
  for (double x : v.v) e2 += x * x;
  if (e2 == 0.0) throw DomainError("integrate_geodesic: zero initial vector");
  if (!(s_min <= 0.0 && s_max >= 0.0 && s_max > s_min)) throw DomainError("integrate_geodesic: bad parameter range");
  const double n0 = metric_norm(m, v.base, v.v);
  const double scale = 1.0 + e2;
  GeodesicPath<N> path;
  path.initial = v;
  auto run = [&](double s_end, std::vector<PathSample<N>>& out, std::optional<double>& exit_s, std::string& face) {
    double dir = s_end >= 0 ? 1.0 : -1.0;
    double h0 = base_step_fraction * (s_max - s_min);
    GeoState<0, N> y{v.base, v.v};
    double s = 0;
    while (dir * (s_end - s) > 1e-15) {
      const double h_first = std::min(h0, dir * (s_end - s));
      double h = h_first;
      GeoState<0, N> y1;
      for (;;) {
        y1 = rk4_step<0, N>(m, y, dir * h);
        if (!m.domain.contains(y1.x, 0.0)) break;
        double drift = std::abs(metric_norm(m, y1.x, y1.v) - metric_norm(m, y.x, y.v));
        if (drift <= drift_tol * scale * (h / h0) || h < 1e-12) break;
        h *= 0.5;
      }
      if (h < 1e-12 && h < h_first) throw NumericalError("integrate_geodesic: step collapse below 1e-12");
      if (!m.domain.contains(y1.x, 0.0)) {
        double lo = 0, hi = h;
        while (hi - lo > 1e-9) {
          double mid = 0.5 * (lo + hi);
          auto ym = rk4_step<0, N>(m, y, dir * mid);
          (m.domain.contains(ym.x, 0.0) ? lo : hi) = mid;
        }
        auto ye = rk4_step<0, N>(m, y, dir * lo);
        s += dir * lo;
        out.push_back({s, ye.x, ye.v, metric_norm(m, ye.x, ye.v)});
        exit_s = s;
        face = exit_face<N>(m.domain, ye.x);
        return;
      }
      y = y1;
      s += dir * h;
      out.push_back({s, y.x, y.v, metric_norm(m, y.x, y.v)});
    }
  };
  std::vector<PathSample<N>> fwd, bwd;
  if (s_max > 0) run(s_max, fwd, path.exit_forward, path.face_forward);
  if (s_min < 0) run(s_min, bwd, path.exit_backward, path.face_backward);
  for (auto it = bwd.rbegin(); it != bwd.rend(); ++it) path.samples.push_back(*it);
  path.samples.push_back({0.0, v.base, v.v, n0});
  for (auto& p : fwd) path.samples.push_back(p);
  for (auto& p : path.samples) path.max_norm_drift = std::max(path.max_norm_drift, std::abs(p.norm - n0));
  return path;
}

/// Flow the geodesic system from (x, v) over unit parameter in `steps` RK4 steps at jet level K.
template <int K, int N>
GeoState<K, N> geodesic_flow(const MetricModel<N>& m, GeoState<K, N> y, int steps, double length = 1.0) {
  double h = length / steps;
  for (int k = 0; k < steps; ++k) {
    auto y1 = rk4_step<K, N>(m, y, h);
    if (!m.domain.contains(value_vec<N>(y1.x), 1e-9)) {
      double lo = 0, hi = h;
      for (int it = 0; it < 60 && hi - lo > 1e-10; ++it) {
        double mid = 0.5 * (lo + hi);
        auto ym = rk4_step<0, N>(m, GeoState<0, N>{value_vec<N>(y.x), value_vec<N>(y.v)}, mid);
        (m.domain.contains(ym.x, 1e-9) ? lo : hi) = mid;
      }
      throw OutOfRangeError("geodesic leaves the chart before the requested parameter", k * h + lo);
    }
    y = y1;
  }
  return y;
}

inline int default_exp_steps() { return 128; }

template <int N>
ChartPoint<N> exp_map(const MetricModel<N>& m, const ChartPoint<N>& p, const Vec<double, N + 1>& v,
                      int steps = default_exp_steps()) {
  m.require_in_domain(p);
  return geodesic_flow<0, N>(m, GeoState<0, N>{p, v}, steps).x;
}

template <int N>
struct LogResult {
  Vec<double, N + 1> v{};           ///< initial velocity at p with exp_p(v) = q
  Vec<double, N + 1> end_velocity{};  ///< velocity of the geodesic at q
  Mat<double, N + 1> dx_dv{};         ///< d exp_p(v) / dv
  Mat<double, N + 1> dw_dv{};         ///< d (end velocity) / dv
  Causal character = Causal::zero;
  double norm = 0;                   ///< g_p(v, v)
  std::optional<double> r;           ///< sqrt(g_p(v,v)) when spacelike
  double residual = 0;               ///< |exp_p(v) - q|
  int iterations = 0;
  int restarts = 0;
  bool marginal = false;
};

struct LogOptions {
  int steps = default_exp_steps();
  int max_iter = 50;
  int restarts = 5;
  double tol = 1e-11;
};

template <int N>
Eigen::Matrix<double, N + 1, N + 1> to_eigen(const Mat<double, N + 1>& a) {
  Eigen::Matrix<double, N + 1, N + 1> r;
  for (int i = 0; i <= N; ++i)
    for (int j = 0; j <= N; ++j) r(i, j) = a[i][j];
  return r;
}

/// exp_p(v) with the Jacobians of endpoint position and velocity with respect to v.
template <int N>
void exp_with_jacobian(const MetricModel<N>& m, const ChartPoint<N>& p, const Vec<double, N + 1>& v, int steps,
                       Vec<double, N + 1>& x1, Vec<double, N + 1>& w1, Mat<double, N + 1>& A,
                       Mat<double, N + 1>& B) {
  constexpr int D = N + 1;
  GeoState<1, N> y;
  for (int i = 0; i < D; ++i) {
    y.x[i] = Jet<1, D>(p[i]);
    y.v[i] = jet_var<1, D>(v[i], i);
  }
  auto r = geodesic_flow<1, N>(m, y, steps);
  for (int i = 0; i < D; ++i) {
    x1[i] = r.x[i].v;
    w1[i] = r.v[i].v;
    for (int j = 0; j < D; ++j) {
      A[i][j] = r.x[i].d[j];
      B[i][j] = r.v[i].d[j];
    }
  }
}

/**
 * Newton shooting for v with exp_p(v) = q, started from the coordinate difference (or a warm
 * start). The Jacobian is the exact derivative of the discrete flow, obtained with dual numbers.
 */
template <int N>
LogResult<N> log_map(const MetricModel<N>& m, const ChartPoint<N>& p, const ChartPoint<N>& q,
                     const LogOptions& opt = {}, const std::optional<Vec<double, N + 1>>& warm = std::nullopt) {
  constexpr int D = N + 1;
  m.require_in_domain(p);
  m.require_in_domain(q);
  LogResult<N> res;
  auto gp = m.metric(p);
  auto finish = [&](LogResult<N>& r) {
    r.norm = quad<double, D>(gp, r.v, r.v);
    r.character = causal_character<N>(gp, r.v);
    double e2 = 0;
    for (double x : r.v) e2 += x * x;
    r.marginal = e2 > 0 && std::abs(r.norm) <= 1e-9 * e2;
    if (r.character == Causal::spacelike) r.r = std::sqrt(r.norm);
  };
  if (p == q) {
    for (int i = 0; i < D; ++i) res.dx_dv[i][i] = res.dw_dv[i][i] = 1.0;
    finish(res);
    return res;
  }
  Vec<double, D> diff;
  double qscale = 0;
  for (int i = 0; i < D; ++i) {
    diff[i] = q[i] - p[i];
    qscale += diff[i] * diff[i];
  }
  qscale = std::sqrt(qscale);
  // Newton from v towards target with Jacobian refresh only when the contraction is poor
  auto newton = [&](const ChartPoint<N>& target, Vec<double, D>& v, bool final_solve) {
    const double tol = (final_solve ? opt.tol : 1e-6) * (1.0 + qscale);
    Vec<double, D> x1, w1;
    Mat<double, D> A, B;
    auto resid = [&](const Vec<double, D>& x) {
      Eigen::Matrix<double, D, 1> F;
      for (int i = 0; i < D; ++i) F(i) = target[i] - x[i];
      return F;
    };
    try {
      exp_with_jacobian<N>(m, p, v, opt.steps, x1, w1, A, B);
    } catch (const OutOfRangeError&) {
      return false;
    }
    Eigen::PartialPivLU<Eigen::Matrix<double, D, D>> lu(to_eigen<N>(A));
    Eigen::Matrix<double, D, 1> F = resid(x1);
    bool fresh = true;
    for (int it = 0; it < opt.max_iter; ++it) {
      res.iterations += 1;
      double fn = F.norm();
      if (fn <= tol) {
        if (final_solve) {
          if (!fresh) exp_with_jacobian<N>(m, p, v, opt.steps, x1, w1, A, B);
          res.end_velocity = w1;
          res.dx_dv = A;
          res.dw_dv = B;
          res.residual = resid(x1).norm();
        }
        return true;
      }
      Eigen::Matrix<double, D, 1> dv = lu.solve(F);
      if (!dv.allFinite()) return false;
      // damped update: shrink while the trial leaves the chart or increases the residual
      double lam = 1.0;
      bool moved = false;
      for (int k = 0; k < 30 && !moved; ++k, lam *= 0.5) {
        Vec<double, D> vt;
        for (int i = 0; i < D; ++i) vt[i] = v[i] + lam * dv(i);
        try {
          auto xt = exp_map<N>(m, p, vt, opt.steps);
          Eigen::Matrix<double, D, 1> Ft = resid(xt);
          if (Ft.norm() < fn || lam < 1e-3) {
            v = vt;
            x1 = xt;
            F = Ft;
            moved = true;
          }
        } catch (const OutOfRangeError&) {
        }
      }
      if (!moved) return false;
      fresh = false;
      if (F.norm() > 0.1 * fn) {
        try {
          exp_with_jacobian<N>(m, p, v, opt.steps, x1, w1, A, B);
        } catch (const OutOfRangeError&) {
          return false;
        }
        lu.compute(to_eigen<N>(A));
        F = resid(x1);
        fresh = true;
      }
    }
    return false;
  };
  for (int attempt = 0; attempt <= opt.restarts; ++attempt) {
    Vec<double, D> v = (attempt == 0 && warm) ? *warm : diff;
    bool ok = true;
    if (attempt > 0) {
      // continuation along the coordinate segment from p to q in 2^attempt stages
      int stages = 1 << attempt;
      for (int i = 0; i < D; ++i) v[i] = diff[i] / stages;
      for (int k = 1; k < stages && ok; ++k) {
        ChartPoint<N> t;
        for (int i = 0; i < D; ++i) t[i] = p[i] + diff[i] * k / stages;
        ok = newton(t, v, false);
        for (int i = 0; ok && i < D; ++i) v[i] *= double(k + 1) / k;
      }
    }
    if (ok && newton(q, v, true)) {
      res.v = v;
      res.restarts = attempt;
      finish(res);
      return res;
    }
  }
  throw NumericalError("log_map: Newton shooting did not converge");
}

/// Follows log_p along a sequence of nearby targets with chord Newton, refreshing the Jacobian on failure.
template <int N>
struct LogTracker {
  static constexpr int D = N + 1;
  Vec<double, D> v{};
  ChartPoint<N> x_last{};  ///< exp_p(v)
  Eigen::PartialPivLU<Eigen::Matrix<double, D, D>> lu;
  bool primed = false;

  Vec<double, D> solve(const MetricModel<N>& m, const ChartPoint<N>& p, const ChartPoint<N>& q,
                       const LogOptions& opt) {
    if (primed) {
      double qs = 0;
      for (int i = 0; i < D; ++i) qs += (q[i] - p[i]) * (q[i] - p[i]);
      double tol = opt.tol * (1.0 + std::sqrt(qs));
      Vec<double, D> w = v;
      {
        Eigen::Matrix<double, D, 1> F;
        for (int i = 0; i < D; ++i) F(i) = q[i] - x_last[i];
        Eigen::Matrix<double, D, 1> dv = lu.solve(F);
        for (int i = 0; i < D; ++i) w[i] += dv(i);
      }
      for (int it = 0; it < 8; ++it) {
        ChartPoint<N> x;
        try {
          x = exp_map<N>(m, p, w, opt.steps);
        } catch (const OutOfRangeError&) {
          break;
        }
        Eigen::Matrix<double, D, 1> F;
        for (int i = 0; i < D; ++i) F(i) = q[i] - x[i];
        if (F.norm() <= tol) {
          v = w;
          x_last = x;
          return v;
        }
        Eigen::Matrix<double, D, 1> dv = lu.solve(F);
        for (int i = 0; i < D; ++i) w[i] += dv(i);
      }
    }
    auto lr = log_map<N>(m, p, q, opt, primed ? std::optional<Vec<double, D>>(v) : std::nullopt);
    v = lr.v;
    x_last = q;
    lu.compute(to_eigen<N>(lr.dx_dv));
    primed = true;
    return v;
  }
};

/// Causal class of q relative to p.
enum class CausalLabel { JPlus, JMinus, Exterior };

inline const char* to_string(CausalLabel c) {
  switch (c) {
    case CausalLabel::JPlus: return "JPlus";
    case CausalLabel::JMinus: return "JMinus";
    default: return "Exterior";
  }
}

template <int N>
struct CausalClass {
  CausalLabel label = CausalLabel::Exterior;
  bool marginal = false;
  Vec<double, N + 1> witness{};  ///< connecting initial velocity at p
};

template <int N>
CausalClass<N> classify_from_log(const LogResult<N>& lr) {
  CausalClass<N> c;
  c.witness = lr.v;
  c.marginal = lr.marginal;
  if (lr.character == Causal::spacelike || lr.character == Causal::zero)
    c.label = lr.character == Causal::zero ? CausalLabel::JPlus : CausalLabel::Exterior;
  else
    c.label = lr.v[0] > 0 ? CausalLabel::JPlus : CausalLabel::JMinus;
  return c;
}

template <int N>
CausalClass<N> classify_causal(const MetricModel<N>& m, const ChartPoint<N>& p, const ChartPoint<N>& q,
                               const LogOptions& opt = {}) {
  return classify_from_log<N>(log_map<N>(m, p, q, opt));
}

/// Closed-form classification in Minkowski space.
template <int N>
CausalLabel classify_minkowski(const ChartPoint<N>& p, const ChartPoint<N>& q) {
  double dt = q[0] - p[0], dx2 = 0;
  for (int a = 1; a <= N; ++a) dx2 += (q[a] - p[a]) * (q[a] - p[a]);
  if (dx2 > dt * dt) return CausalLabel::Exterior;
  return dt >= 0 ? CausalLabel::JPlus : CausalLabel::JMinus;
}

/// Spacelike distance r_p(q) = sqrt(g(v,v)) with v = log_p(q); throws if q is not in the exterior.
template <int N>
double distance_rp(const MetricModel<N>& m, const ChartPoint<N>& p, const ChartPoint<N>& q,
                   const LogOptions& opt = {}) {
  auto lr = log_map<N>(m, p, q, opt);
  if (!lr.r) throw DomainError("r_p: point is not spacelike separated from p");
  return *lr.r;
}

template <int N>
struct CutOnceReport {
  int n_samples = 0;
  unsigned long long seed = 0;
  int max_components = 0;
  int n_skipped = 0;
  std::vector<int> histogram;  ///< histogram[k] = number of samples with k components
  double grid_step_fraction = 1e-3;
};

/// Null vector at q with unit spatial part in the g0-orthonormal sense and time sign `sgn`.
template <int N>
Vec<double, N + 1> null_vector(const Mat<double, N + 1>& g, const Vec<double, N>& dir, double sgn) {
  constexpr int D = N + 1;
  Vec<double, D> w{};
  for (int a = 0; a < N; ++a) w[a + 1] = dir[a];
  // solve g(v,v) = 0 for v = (tau, w): g00 tau^2 + 2 tau g0a w^a + gab w^a w^b = 0
  double A = g[0][0], Bc = 0, C = 0;
  for (int a = 1; a < D; ++a) {
    Bc += 2 * g[0][a] * w[a];
    for (int b = 1; b < D; ++b) C += g[a][b] * w[a] * w[b];
  }
  double disc = std::sqrt(std::max(0.0, Bc * Bc - 4 * A * C));
  double t1 = (-Bc + disc) / (2 * A), t2 = (-Bc - disc) / (2 * A);
  double tau = sgn > 0 ? std::max(t1, t2) : std::min(t1, t2);
  w[0] = tau;
  return w;
}

/**
 * Sample q in the exterior of p's double null cone and a null direction at q; count the
 * connected components of {s : gamma(s) in J+(p) or J-(p)} on a grid with step 1e-3 of the
 * parameter range inside the (slightly shrunk) chart.
 */
template <int N>
CutOnceReport<N> cut_once_check(const MetricModel<N>& m, const ChartPoint<N>& p, const Box<N>& region,
                                int n_samples, unsigned long long seed, int grid = 1000,
                                const LogOptions& opt = {12, 50, 5, 1e-9}) {
  constexpr int D = N + 1;
  std::mt19937_64 rng(seed);
  CutOnceReport<N> rep;
  rep.n_samples = n_samples;
  rep.seed = seed;
  rep.grid_step_fraction = 1.0 / grid;
  // null geodesics are followed inside a box shrunk by 2% per face, so that the connecting
  // geodesics from p to the scanned points stay in the chart
  MetricModel<N> inner = m;
  for (int i = 0; i < N + 1; ++i) {
    double w = 0.02 * (m.domain.hi[i] - m.domain.lo[i]);
    inner.domain.lo[i] += w;
    inner.domain.hi[i] -= w;
  }
  int done = 0;
  while (done < n_samples) {
    ChartPoint<N> q = sample_box<N>(region, rng);
    auto dir = sample_sphere<N>(rng);
    double sgn = std::uniform_real_distribution<double>(0, 1)(rng) < 0.5 ? -1.0 : 1.0;
    LogResult<N> lq;
    try {
      lq = log_map<N>(m, p, q, opt);
    } catch (const NumericalError&) {
      ++rep.n_skipped;
      continue;
    }
    if (lq.character != Causal::spacelike || lq.marginal) continue;
    auto gq = m.metric(q);
    // normalise the spatial direction in g
    Vec<double, N> d = dir;
    {
      double nn = 0;
      for (int a = 0; a < N; ++a)
        for (int b = 0; b < N; ++b) nn += gq[a + 1][b + 1] * d[a] * d[b];
      for (auto& x : d) x /= std::sqrt(nn);
    }
    Tangent<N> xi{q, null_vector<N>(gq, d, sgn)};
    // locate the chart exits, then rescan on a uniform grid between them
    double span = 0;
    for (int i = 0; i < D; ++i) span = std::max(span, m.domain.hi[i] - m.domain.lo[i]);
    double vmax = 0;
    for (double x : xi.v) vmax = std::max(vmax, std::abs(x));
    double smax = 4 * span / vmax;
    auto coarse = integrate_geodesic<N>(inner, xi, -smax, smax, 1e-3, 1e-8);
    const auto& first = coarse.samples.front();
    const auto& last = coarse.samples.back();
    double a = first.s, b = last.s;
    GeoState<0, N> y{first.q, first.qdot};
    double hs = (b - a) / grid;
    int comps = 0;
    bool inside_prev = false;
    LogTracker<N> tracker;
    bool ok = true;
    auto gp = m.metric(p);
    for (int k = 0; k <= grid; ++k) {
      if (k > 0) y = rk4_step<0, N>(m, y, hs);
      ChartPoint<N> x = y.x;
      for (int i = 0; i < D; ++i) x[i] = std::clamp(x[i], m.domain.lo[i], m.domain.hi[i]);
      bool inside;
      try {
        auto v = tracker.solve(m, p, x, opt);
        inside = causal_character<N>(gp, v) != Causal::spacelike;
      } catch (const Error&) {
        ok = false;
        break;
      }
      if (inside && !inside_prev) ++comps;
      inside_prev = inside;
    }
    if (!ok) {
      ++rep.n_skipped;
      continue;
    }
    if (static_cast<int>(rep.histogram.size()) <= comps) rep.histogram.resize(comps + 1, 0);
    rep.histogram[comps]++;
    rep.max_components = std::max(rep.max_components, comps);
    ++done;
  }
  return rep;
}

}  // namespace lorcal
