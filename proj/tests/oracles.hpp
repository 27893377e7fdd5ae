/** @file oracles.hpp
 *  @brief Independent finite-difference reference computations used by the tests.
 */
#pragma once

#include <cmath>
#include <functional>

#include "lorcal/geometry.hpp"

namespace oracle {

using namespace lorcal;

/// Metric partial d_k g_ij by Richardson-extrapolated central differences of double evaluations.
template <int N>
Rank3<double, N + 1> fd_metric_first(const MetricModel<N>& m, const ChartPoint<N>& q, double h = 1e-4) {
  constexpr int D = N + 1;
  Rank3<double, D> r;
  for (int k = 0; k < D; ++k) {
    auto diff = [&](double hh) {
      auto a = q, b = q;
      a[k] += hh;
      b[k] -= hh;
      auto ga = m.metric(a), gb = m.metric(b);
      Mat<double, D> d;
      for (int i = 0; i < D; ++i)
        for (int j = 0; j < D; ++j) d[i][j] = (ga[i][j] - gb[i][j]) / (2 * hh);
      return d;
    };
    auto d1 = diff(h), d2 = diff(h / 2);
    for (int i = 0; i < D; ++i)
      for (int j = 0; j < D; ++j) r[k][i][j] = (4 * d2[i][j] - d1[i][j]) / 3;
  }
  return r;
}

/// Second partials d_k d_l g_ij by Richardson-extrapolated central differences.
template <int N>
Rank4<double, N + 1> fd_metric_second(const MetricModel<N>& m, const ChartPoint<N>& q, double h = 1e-4) {
  constexpr int D = N + 1;
  Rank4<double, D> r;
  auto g = [&](const ChartPoint<N>& p) { return m.metric(p); };
  for (int k = 0; k < D; ++k)
    for (int l = 0; l < D; ++l) {
      auto diff = [&](double hh) {
        Mat<double, D> d;
        auto pp = q, pm = q, mp = q, mm = q;
        pp[k] += hh;
        pp[l] += hh;
        pm[k] += hh;
        pm[l] -= hh;
        mp[k] -= hh;
        mp[l] += hh;
        mm[k] -= hh;
        mm[l] -= hh;
        auto a = g(pp), b = g(pm), c = g(mp), e = g(mm);
        for (int i = 0; i < D; ++i)
          for (int j = 0; j < D; ++j) d[i][j] = (a[i][j] - b[i][j] - c[i][j] + e[i][j]) / (4 * hh * hh);
        return d;
      };
      auto d1 = diff(h), d2 = diff(h / 2);
      for (int i = 0; i < D; ++i)
        for (int j = 0; j < D; ++j) r[k][l][i][j] = (4 * d2[i][j] - d1[i][j]) / 3;
    }
  return r;
}

/// Christoffel symbols from finite-difference metric derivatives.
template <int N>
Rank3<double, N + 1> fd_christoffel(const MetricModel<N>& m, const ChartPoint<N>& q) {
  constexpr int D = N + 1;
  auto dg = fd_metric_first<N>(m, q);
  auto gi = inverse<double, D>(m.metric(q));
  Rank3<double, D> G{};
  for (int i = 0; i < D; ++i)
    for (int j = 0; j < D; ++j)
      for (int k = 0; k < D; ++k) {
        double s = 0;
        for (int l = 0; l < D; ++l) s += 0.5 * gi[i][l] * (dg[j][l][k] + dg[k][l][j] - dg[l][j][k]);
        G[i][j][k] = s;
      }
  return G;
}

/// Riemann tensor R_ijkl = g(R(d_i,d_j)d_k,d_l) from nested central differences of fd_christoffel.
template <int N>
Rank4<double, N + 1> fd_riemann(const MetricModel<N>& m, const ChartPoint<N>& q, double h = 1e-3) {
  constexpr int D = N + 1;
  auto G = fd_christoffel<N>(m, q);
  Rank4<double, D> dG;  // [l][i][j][k]
  for (int l = 0; l < D; ++l) {
    auto a = q, b = q;
    a[l] += h;
    b[l] -= h;
    auto Ga = fd_christoffel<N>(m, a), Gb = fd_christoffel<N>(m, b);
    for (int i = 0; i < D; ++i)
      for (int j = 0; j < D; ++j)
        for (int k = 0; k < D; ++k) dG[l][i][j][k] = (Ga[i][j][k] - Gb[i][j][k]) / (2 * h);
  }
  auto g = m.metric(q);
  Rank4<double, D> R{};
  for (int i = 0; i < D; ++i)
    for (int j = 0; j < D; ++j)
      for (int k = 0; k < D; ++k)
        for (int l = 0; l < D; ++l) {
          double s = 0;
          for (int mm = 0; mm < D; ++mm) {
            double rm = dG[i][mm][j][k] - dG[j][mm][i][k];
            for (int p = 0; p < D; ++p) rm += G[mm][i][p] * G[p][j][k] - G[mm][j][p] * G[p][i][k];
            s += g[l][mm] * rm;
          }
          R[i][j][k][l] = s;
        }
  return R;
}

/// Hyperbolic distance in the chart 4|dx|^2/(1-|x|^2)^2.
inline double hyperbolic_distance(double x1, double y1, double x2, double y2) {
  double dx = x1 - x2, dy = y1 - y2;
  double a = 1 - (x1 * x1 + y1 * y1), b = 1 - (x2 * x2 + y2 * y2);
  return std::acosh(1 + 2 * (dx * dx + dy * dy) / (a * b));
}

}  // namespace oracle
