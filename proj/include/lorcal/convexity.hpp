/** @file convexity.hpp
 *  @brief Comparison function psi_{K,p}, Hessians of scalars and of r_p, and the convexity checks.
 */
#pragma once

#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "field.hpp"
#include "geodesics.hpp"

namespace lorcal {

/// psi_K(r): sqrt|K| r cot(sqrt|K| r) for K > 0, 1 for K = 0, sqrt|K| r coth(sqrt|K| r) for K < 0.
inline double psi_value(double K, double r) {
  if (!(r > 0)) throw DomainError("psi_value: r must be positive");
  if (K == 0.0) return 1.0;
  double a = std::sqrt(std::abs(K)) * r;
  if (K > 0) {
    if (a >= std::numbers::pi / 2) throw DomainError("psi_value: r >= pi/(2 sqrt K)");
    return a < 1e-4 ? 1.0 - a * a / 3.0 : a / std::tan(a);
  }
  return a < 1e-4 ? 1.0 + a * a / 3.0 : a / std::tanh(a);
}

/// Closed-form r_p on products -dt^2 + g0 of constant curvature C: r^2 = d0(x_p, x)^2 - (t - t_p)^2.
template <int N>
std::optional<ScalarField<N + 1>> analytic_distance(const MetricModel<N>& m, const ChartPoint<N>& p) {
  if (!m.product_curvature) return std::nullopt;
  const double C = *m.product_curvature;
  return ScalarField<N + 1>::make(
      [C, p](const auto& x) {
        using S = std::decay_t<decltype(x[0])>;
        S dx2(0.0), xx(0.0);
        double pp = 0;
        for (int a = 1; a <= N; ++a) {
          dx2 = dx2 + (x[a] - p[a]) * (x[a] - p[a]);
          xx = xx + x[a] * x[a];
          pp += p[a] * p[a];
        }
        S d;
        if (C == 0.0) {
          d = sqrt(dx2);
        } else if (C < 0.0) {
          d = acosh(1.0 + 2.0 * (-C) * dx2 / ((1.0 + C * xx) * (1.0 + C * pp))) / std::sqrt(-C);
        } else {
          S z = 1.0 - 2.0 * C * dx2 / ((1.0 + C * xx) * (1.0 + C * pp));
          d = 2.0 * atan(sqrt((1.0 - z) / (1.0 + z))) / std::sqrt(C);
        }
        S dt = x[0] - p[0];
        return sqrt(d * d - dt * dt);
      },
      kMaxJet, "r_p");
}

template <int N>
struct HessianForm {
  Mat<double, N + 1> form{};
  bool fd_fallback = false;
  std::string warning;
};

/// Hess f = d^2 f - Gamma . df, from the field's second-order supplier or by central differences.
template <int N>
HessianForm<N> hessian_scalar(const MetricModel<N>& m, const ScalarField<N + 1>& f, const ChartPoint<N>& q,
                              double fd_step = 1e-4) {
  constexpr int D = N + 1;
  m.require_in_domain(q);
  HessianForm<N> H;
  Vec<double, D> df;
  Mat<double, D> d2;
  if (f.max_order() >= 2) {
    auto j = field_jet2<0, D>(f, q);
    df = j.g;
    d2 = j.h;
  } else {
    H.fd_fallback = true;
    double h = fd_step;
    for (int i = 0; i < D; ++i)
      if (std::abs(q[i]) + h == std::abs(q[i])) H.warning = "precision: finite-difference step underflows";
    auto at = [&](int i, double si, int k, double sk) {
      auto x = q;
      x[i] += si;
      x[k] += sk;
      return f(x);
    };
    double f0 = f(q);
    for (int i = 0; i < D; ++i) {
      df[i] = (at(i, h, i, 0) - at(i, -h, i, 0)) / (2 * h);
      d2[i][i] = (at(i, h, i, 0) - 2 * f0 + at(i, -h, i, 0)) / (h * h);
      for (int k = 0; k < i; ++k) {
        d2[i][k] = (at(i, h, k, h) - at(i, h, k, -h) - at(i, -h, k, h) + at(i, -h, k, -h)) / (4 * h * h);
        d2[k][i] = d2[i][k];
      }
    }
  }
  auto G = christoffel<N>(m, q);
  for (int i = 0; i < D; ++i)
    for (int k = 0; k < D; ++k) {
      double s = d2[i][k];
      for (int a = 0; a < D; ++a) s -= G[a][i][k] * df[a];
      H.form[i][k] = s;
    }
  return H;
}

/// r_p with its first derivatives and covariant Hessian at q, from a converged log_map.
template <int N>
struct DistanceJet {
  double r = 0;
  Vec<double, N + 1> dr{};        ///< d r from differentiating log_map: g_p(v, A^{-1} e_k) / r
  Vec<double, N + 1> dr_gauss{};  ///< g_q(w, e_k) / r with w the arrival velocity
  Mat<double, N + 1> hess{};      ///< covariant Hessian of r_p
  Vec<double, N + 1> v{};         ///< log_p(q)
};

template <int N>
DistanceJet<N> distance_jet(const MetricModel<N>& m, const ChartPoint<N>& p, const ChartPoint<N>& q,
                            const LogResult<N>& lr) {
  constexpr int D = N + 1;
  if (!lr.r) throw DomainError("distance_jet: q is not spacelike separated from p");
  DistanceJet<N> J;
  J.r = *lr.r;
  J.v = lr.v;
  const double r = J.r;
  auto gp = m.metric(p);
  Eigen::Matrix<double, D, D> Ai = to_eigen<N>(lr.dx_dv).inverse();
  Eigen::Matrix<double, D, D> W = to_eigen<N>(lr.dw_dv) * Ai;  // d w^j / d q^k
  Vec<double, D> gv = matvec<double, D>(gp, lr.v);
  for (int k = 0; k < D; ++k) {
    double s = 0;
    for (int i = 0; i < D; ++i) s += gv[i] * Ai(i, k);
    J.dr[k] = s / r;
  }
  auto gq = m.template metric<1>(lift_point<0, D>(q));
  Vec<double, D> om{};
  for (int i = 0; i < D; ++i)
    for (int j = 0; j < D; ++j) om[i] += gq[i][j].v * lr.end_velocity[j];
  for (int i = 0; i < D; ++i) J.dr_gauss[i] = om[i] / r;
  auto G = christoffel<N>(m, q);
  Mat<double, D> d2;
  for (int i = 0; i < D; ++i)
    for (int k = 0; k < D; ++k) {
      double dom = 0;
      for (int j = 0; j < D; ++j) dom += gq[i][j].d[k] * lr.end_velocity[j] + gq[i][j].v * W(j, k);
      d2[i][k] = dom / r - om[i] * J.dr_gauss[k] / (r * r);
    }
  for (int i = 0; i < D; ++i)
    for (int k = 0; k < D; ++k) {
      double s = 0.5 * (d2[i][k] + d2[k][i]);
      for (int a = 0; a < D; ++a) s -= G[a][i][k] * J.dr_gauss[a];
      J.hess[i][k] = s;
    }
  return J;
}

/// Chart distance proxy from q to the null cone of p: r^2 / (2 |v|) with |v| Euclidean.
template <int N>
double cone_distance(const LogResult<N>& lr) {
  double e = 0;
  for (double x : lr.v) e += x * x;
  e = std::sqrt(e);
  return e == 0 ? 0.0 : lr.norm / (2 * e);
}

template <int N>
struct ConvexityReport {
  ChartPoint<N> p{};
  double K = 0;
  int n_samples = 0;
  unsigned long long seed = 0;
  double worst_margin = std::numeric_limits<double>::infinity();
  double worst_scaled = std::numeric_limits<double>::infinity();  ///< margin / scale at the worst sample
  double max_abs_margin = 0;
  bool pass = true;
  int n_skipped = 0;    ///< log_map did not converge
  int n_near_cone = 0;  ///< excluded within 1e-3 of the null cone
  int n_causal = 0;     ///< rejected draws in J+(p) or J-(p)
  struct Record {
    ChartPoint<N> q;
    Vec<double, N + 1> X;
    double lhs, rhs, margin;
  };
  std::vector<Record> records;
  std::string note = "hypotheses sampled, not proven";
};

constexpr double kNearConeExclusion = 1e-3;
constexpr double kConvexityTol = 1e-6;

/// Draws q in the exterior of p's double cone inside `region` until `n` accepted samples are found.
template <int N, class Fn>
void sample_exterior(const MetricModel<N>& m, const ChartPoint<N>& p, const Box<N>& region, int n,
                     std::mt19937_64& rng, int& n_skipped, int& n_near, int& n_causal, Fn&& use) {
  int done = 0, draws = 0;
  while (done < n) {
    if (++draws > 200 * n + 1000) throw NumericalError("sample_exterior: exterior region too small");
    ChartPoint<N> q = sample_box<N>(region, rng);
    LogResult<N> lr;
    try {
      lr = log_map<N>(m, p, q);
    } catch (const NumericalError&) {
      ++n_skipped;
      continue;
    }
    if (lr.character != Causal::spacelike) {
      ++n_causal;
      continue;
    }
    if (cone_distance<N>(lr) < kNearConeExclusion) {
      ++n_near;
      continue;
    }
    use(q, lr);
    ++done;
  }
}

/// Samples q in E_p and Euclidean-unit X; margin = Hess r_p(X,X) - (psi/r)(g(X,X) - g(X,grad r)^2).
template <int N>
ConvexityReport<N> hessian_comparison_check(const MetricModel<N>& m, const ChartPoint<N>& p, double K,
                                            int n_samples, unsigned long long seed,
                                            std::optional<Box<N>> region = std::nullopt) {
  constexpr int D = N + 1;
  m.require_in_domain(p);
  ConvexityReport<N> rep;
  rep.p = p;
  rep.K = K;
  rep.n_samples = n_samples;
  rep.seed = seed;
  std::mt19937_64 rng(seed);
  sample_exterior<N>(m, p, region.value_or(m.domain), n_samples, rng, rep.n_skipped, rep.n_near_cone, rep.n_causal,
                     [&](const ChartPoint<N>& q, const LogResult<N>& lr) {
                       auto J = distance_jet<N>(m, p, q, lr);
                       auto X = sample_sphere<D>(rng);
                       auto g = m.metric(q);
                       double lhs = quad<double, D>(J.hess, X, X);
                       double xr = 0;
                       for (int i = 0; i < D; ++i) xr += X[i] * J.dr_gauss[i];
                       double rhs = psi_value(K, J.r) / J.r * (quad<double, D>(g, X, X) - xr * xr);
                       double margin = lhs - rhs;
                       double scale = std::max({1.0, std::abs(lhs), std::abs(rhs)});
                       rep.records.push_back({q, X, lhs, rhs, margin});
                       rep.max_abs_margin = std::max(rep.max_abs_margin, std::abs(margin));
                       if (margin / scale < rep.worst_scaled) rep.worst_scaled = margin / scale;
                       rep.worst_margin = std::min(rep.worst_margin, margin);
                     });
  rep.pass = rep.worst_scaled >= -kConvexityTol;
  return rep;
}

template <int N>
struct RadialReport {
  ChartPoint<N> p{};
  int n_samples = 0;
  unsigned long long seed = 0;
  double max_eikonal = 0;      ///< max |g(grad r, grad r) - 1|
  double max_radial = 0;       ///< max Euclidean norm of nabla_{grad r} grad r
  double max_gauss_mismatch = 0;  ///< max |d r - g(w,.)/r| between the two gradient forms
  int n_skipped = 0, n_near_cone = 0, n_causal = 0;
};

template <int N>
RadialReport<N> radial_checks(const MetricModel<N>& m, const ChartPoint<N>& p, int n_samples,
                              unsigned long long seed, std::optional<Box<N>> region = std::nullopt) {
  constexpr int D = N + 1;
  m.require_in_domain(p);
  RadialReport<N> rep;
  rep.p = p;
  rep.n_samples = n_samples;
  rep.seed = seed;
  std::mt19937_64 rng(seed);
  sample_exterior<N>(m, p, region.value_or(m.domain), n_samples, rng, rep.n_skipped, rep.n_near_cone, rep.n_causal,
                     [&](const ChartPoint<N>& q, const LogResult<N>& lr) {
                       auto J = distance_jet<N>(m, p, q, lr);
                       auto gi = inverse<double, D>(m.metric(q));
                       auto grad = matvec<double, D>(gi, J.dr);
                       double e = 0;
                       for (int i = 0; i < D; ++i) e += grad[i] * J.dr[i];
                       rep.max_eikonal = std::max(rep.max_eikonal, std::abs(e - 1.0));
                       auto hv = matvec<double, D>(J.hess, grad);
                       auto acc = matvec<double, D>(gi, hv);
                       double a = 0, gm = 0;
                       for (int i = 0; i < D; ++i) {
                         a += acc[i] * acc[i];
                         gm = std::max(gm, std::abs(J.dr[i] - J.dr_gauss[i]));
                       }
                       rep.max_radial = std::max(rep.max_radial, std::sqrt(a));
                       rep.max_gauss_mismatch = std::max(rep.max_gauss_mismatch, gm);
                     });
  return rep;
}

}  // namespace lorcal
