/** @file wavesolver.hpp
 *  @brief Leapfrog solver for (box + V) u = S on [t0, t1] x rectangle, traces, DtN map and gauge transform.
 */
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "carleman.hpp"
#include "errors.hpp"
#include "field.hpp"
#include "geometry.hpp"

namespace lorcal {

/**
 * Space-time grid: uniform nodes on the spatial rectangle [lo, hi] and uniform time steps on [t0, t1].
 * With steps = 0 the step count follows from cfl times the stability bound.
 */
template <int N>
struct GridSpec {
  double t0 = -1.0, t1 = 1.0;
  Vec<double, N> lo{}, hi{};
  std::array<int, N> cells{};
  double cfl = 0.5;
  int steps = 0;
  double ramp = 0.1;  ///< length of the compatibility ramp after t0

  double hx(int a) const { return (hi[a] - lo[a]) / cells[a]; }
  double ht() const { return (t1 - t0) / steps; }

  /// Halve every spacing; requires a resolved step count.
  GridSpec refined() const {
    if (steps <= 0) throw ConfigError("GridSpec::refined: resolve the step count first");
    GridSpec g = *this;
    for (auto& c : g.cells) c *= 2;
    g.steps *= 2;
    return g;
  }

  static GridSpec interval(double t0, double t1, double x0, double x1, int cells, double cfl = 0.5) {
    GridSpec g;
    g.t0 = t0;
    g.t1 = t1;
    g.lo[0] = x0;
    g.hi[0] = x1;
    g.cells[0] = cells;
    g.cfl = cfl;
    return g;
  }
};

template <class T, int N>
using BoundaryFn = std::function<T(const ChartPoint<N>&)>;

/// Interpolated value and space-time gradient at an interior point.
template <class T, int N>
struct ProbeValue {
  ChartPoint<N> point{};
  T value{};
  Vec<T, N + 1> grad{};
};

/// Three consecutive time levels around a recorded time.
template <class T>
struct Snapshot {
  int step = 0;
  double t = 0;
  std::array<std::vector<T>, 3> u;  ///< levels step-1, step, step+1
};

template <class T, int N>
struct WaveField {
  GridSpec<N> grid;
  std::array<int, N> nodes{};
  std::array<int, N> stride{};
  std::vector<Vec<double, N>> sigma;  ///< boundary nodes carrying traces (corners excluded)
  std::vector<int> sigma_index;       ///< linear node index of each trace node
  std::vector<int> sigma_axis;        ///< normal axis of each trace node
  std::vector<double> sigma_sign;     ///< +1 on hi faces, -1 on lo faces
  std::vector<double> times;          ///< trace times
  std::vector<std::vector<T>> trace;    ///< u on the trace nodes
  std::vector<std::vector<T>> neumann;  ///< outward unit normal derivative
  std::vector<double> energy_times;
  std::vector<double> energy;  ///< conserved leapfrog energy at half steps
  std::vector<Snapshot<T>> snapshots;
  std::vector<ProbeValue<T, N>> probes;
  std::array<std::vector<T>, 3> last;  ///< final three levels
  int first_data_step = -1;
  double leakage = 0;  ///< max |u| at t1 beyond the discrete domain of influence
  double max_abs = 0;

  int size() const { return static_cast<int>(last[2].size()); }
  Vec<double, N> node(int k) const {
    Vec<double, N> x;
    for (int a = 0; a < N; ++a) {
      int i = (k / stride[a]) % nodes[a];
      x[a] = grid.lo[a] + i * grid.hx(a);
    }
    return x;
  }
};

struct SolveOptions {
  bool traces = true;
  int trace_stride = 1;
  int energy_stride = 0;  ///< 0 disables the energy series
  std::vector<double> snapshot_times;
};

namespace detail {

/// Smooth step: 0 for x <= 0, 1 for x >= 1.
inline double smooth_step(double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  double a = std::exp(-1.0 / x), b = std::exp(-1.0 / (1.0 - x));
  return a / (a + b);
}

template <int N>
struct Coeff {
  double A, alpha;
  std::array<double, N> beta;
  double g0diag[N];
  double c;
};

template <int N>
Coeff<N> cylinder_coeff(const MetricModel<N>& m, const ChartPoint<N>& q) {
  double c;
  Mat<double, N> g0;
  m.cylinder_parts(q, c, g0);
  Coeff<N> r;
  double prod = 1.0, scale = 0.0;
  for (int a = 0; a < N; ++a) {
    prod *= g0[a][a];
    scale = std::max(scale, std::abs(g0[a][a]));
  }
  for (int a = 0; a < N; ++a)
    for (int b = 0; b < N; ++b)
      if (a != b && std::abs(g0[a][b]) > 1e-14 * scale)
        throw CapabilityError(m.name + ": wave solver needs a diagonal spatial metric");
  if (!(c > 0.0) || !(prod > 0.0)) throw DomainError(m.name + ": metric is not Lorentzian at a grid node");
  r.c = c;
  r.A = std::pow(c, 0.5 * (N + 1)) * std::sqrt(prod);
  r.alpha = r.A / c;
  for (int a = 0; a < N; ++a) {
    r.g0diag[a] = g0[a][a];
    r.beta[a] = r.A / (c * g0[a][a]);
  }
  return r;
}

inline double re_dot(double a, double b) { return a * b; }
inline double re_dot(const std::complex<double>& a, const std::complex<double>& b) {
  return std::real(std::conj(a) * b);
}
inline double abs2(double a) { return a * a; }
inline double abs2(const std::complex<double>& a) { return std::norm(a); }

/// 4-point Lagrange weights and derivative weights at offset x from node 0 of nodes {-1,0,1,2}.
inline void lagrange4_weights(double x, double w[4], double dw[4]) {
  const double nd[4] = {-1, 0, 1, 2};
  for (int i = 0; i < 4; ++i) {
    double den = 1, num = 1, dn = 0;
    for (int j = 0; j < 4; ++j) {
      if (j == i) continue;
      den *= nd[i] - nd[j];
      double p = 1;
      for (int k = 0; k < 4; ++k)
        if (k != i && k != j) p *= x - nd[k];
      dn += p;
      num *= x - nd[j];
    }
    w[i] = num / den;
    dw[i] = dn / den;
  }
}

}  // namespace detail

/// Largest stable step 1 / sqrt(sum_a max v_a^2 / hx_a^2), v_a^2 = 1/g0_aa, sampled on nodes and 5 times.
template <int N>
double stability_bound(const MetricModel<N>& m, const GridSpec<N>& g) {
  if (!m.cylinder || !m.cylinder_parts) throw CapabilityError(m.name + ": wave solver needs a cylinder model");
  std::array<double, N> vmax{};
  std::array<int, N> nodes;
  int total = 1;
  for (int a = 0; a < N; ++a) {
    nodes[a] = g.cells[a] + 1;
    total *= nodes[a];
  }
  for (int it = 0; it < 5; ++it) {
    double t = g.t0 + (g.t1 - g.t0) * it / 4.0;
    for (int k = 0; k < total; ++k) {
      ChartPoint<N> q;
      q[0] = t;
      int r = k;
      for (int a = 0; a < N; ++a) {
        q[1 + a] = g.lo[a] + (r % nodes[a]) * g.hx(a);
        r /= nodes[a];
      }
      auto cf = detail::cylinder_coeff<N>(m, q);
      for (int a = 0; a < N; ++a) vmax[a] = std::max(vmax[a], 1.0 / cf.g0diag[a]);
    }
  }
  double s = 0;
  for (int a = 0; a < N; ++a) s += vmax[a] / (g.hx(a) * g.hx(a));
  return 1.0 / std::sqrt(s);
}

/// Fill in the step count from the CFL ratio, or validate an explicit one against 0.9 x the bound.
template <int N>
GridSpec<N> resolve_grid(const MetricModel<N>& m, GridSpec<N> g) {
  if (!(g.t1 > g.t0)) throw ConfigError("GridSpec: need t1 > t0");
  for (int a = 0; a < N; ++a) {
    if (g.cells[a] < 4) throw ConfigError("GridSpec: need at least 4 cells per axis");
    if (!(g.hi[a] > g.lo[a])) throw ConfigError("GridSpec: empty spatial rectangle");
    if (g.lo[a] < m.domain.lo[1 + a] - 1e-12 || g.hi[a] > m.domain.hi[1 + a] + 1e-12)
      throw DomainError("GridSpec: spatial rectangle leaves the model chart");
  }
  if (g.t0 < m.domain.lo[0] - 1e-12 || g.t1 > m.domain.hi[0] + 1e-12)
    throw DomainError("GridSpec: time range leaves the model chart");
  const double bound = stability_bound<N>(m, g);
  if (g.steps <= 0) {
    if (!(g.cfl > 0.0) || g.cfl > 0.9) throw ConfigError("GridSpec: cfl must lie in (0, 0.9]");
    g.steps = static_cast<int>(std::ceil((g.t1 - g.t0) / (g.cfl * bound) - 1e-9));
  }
  if (g.ht() > 0.9 * bound * (1 + 1e-12)) {
    std::ostringstream os;
    os.precision(6);
    os << "CFL violation: ht = " << g.ht() << " exceeds 0.9 x stability bound " << bound << "; use ht <= "
       << 0.9 * bound << " (steps >= " << static_cast<int>(std::ceil((g.t1 - g.t0) / (0.9 * bound))) << ")";
    throw ConfigError(os.str());
  }
  return g;
}

/**
 * Solve box u + V u = S with u = ramp(t) f on the lateral boundary and zero data at t0. The update is
 * d_t(alpha d_t u) = d_a(beta^a d_a u) - A V u + A S with A = |det g|^{1/2}, alpha = -A g^00 and
 * beta^a = A g^aa, fluxes at cell faces and alpha at half steps.
 */
template <class T, int N>
WaveField<T, N> solve_ibvp(const MetricModel<N>& m, const ScalarField<N + 1>& V, const BoundaryFn<T, N>& f,
                           GridSpec<N> grid, const SolveOptions& opt = {},
                           const std::vector<ChartPoint<N>>& probe_points = {},
                           const ScalarField<N + 1>* source = nullptr) {
  constexpr int D = N + 1;
  grid = resolve_grid<N>(m, grid);
  WaveField<T, N> W;
  W.grid = grid;
  const double ht = grid.ht(), ht2 = ht * ht;
  int total = 1;
  for (int a = 0; a < N; ++a) {
    W.nodes[a] = grid.cells[a] + 1;
    W.stride[a] = total;
    total *= W.nodes[a];
  }
  std::array<double, N> hx, ihx2;
  for (int a = 0; a < N; ++a) {
    hx[a] = grid.hx(a);
    ihx2[a] = 1.0 / (hx[a] * hx[a]);
  }
  // node classification
  std::vector<int> interior, boundary;
  std::vector<std::array<int, N>> idx(total);
  std::vector<int> bdist(total);
  for (int k = 0; k < total; ++k) {
    int r = k, dmin = std::numeric_limits<int>::max();
    bool bd = false;
    for (int a = 0; a < N; ++a) {
      idx[k][a] = r % W.nodes[a];
      r /= W.nodes[a];
      int i = idx[k][a];
      if (i == 0 || i == grid.cells[a]) bd = true;
      dmin = std::min({dmin, i, grid.cells[a] - i});
    }
    bdist[k] = dmin;
    (bd ? boundary : interior).push_back(k);
  }
  for (int k : boundary) {
    int nb = 0, axis = -1;
    double sign = 0;
    for (int a = 0; a < N; ++a) {
      if (idx[k][a] == 0) {
        ++nb;
        axis = a;
        sign = -1;
      } else if (idx[k][a] == grid.cells[a]) {
        ++nb;
        axis = a;
        sign = 1;
      }
    }
    if (nb != 1) continue;
    W.sigma.push_back(W.node(k));
    W.sigma_index.push_back(k);
    W.sigma_axis.push_back(axis);
    W.sigma_sign.push_back(sign);
  }
  auto spacetime = [&](double t, const Vec<double, N>& x) {
    ChartPoint<N> q;
    q[0] = t;
    for (int a = 0; a < N; ++a) q[1 + a] = x[a];
    return q;
  };
  auto face_point = [&](int k, int a) {
    Vec<double, N> x = W.node(k);
    x[a] += 0.5 * hx[a];
    return x;
  };

  // coefficients: alpha at half steps, beta on faces, A V at nodes
  std::vector<double> alpha_m(total), alpha_p(total), AV(total), Anode(total), ncoef(total);
  std::array<std::vector<double>, N> beta;
  for (auto& b : beta) b.assign(total, 0.0);
  auto fill_alpha = [&](std::vector<double>& al, double t) {
    for (int k : interior) al[k] = detail::cylinder_coeff<N>(m, spacetime(t, W.node(k))).alpha;
  };
  auto fill_level = [&](double t) {
    for (int k : interior) {
      auto cf = detail::cylinder_coeff<N>(m, spacetime(t, W.node(k)));
      Anode[k] = cf.A;
      AV[k] = cf.A * V(spacetime(t, W.node(k)));
    }
    for (int k = 0; k < total; ++k)
      for (int a = 0; a < N; ++a)
        if (idx[k][a] < grid.cells[a]) beta[a][k] = detail::cylinder_coeff<N>(m, spacetime(t, face_point(k, a))).beta[a];
  };
  auto fill_normal = [&](double t) {
    for (std::size_t j = 0; j < W.sigma_index.size(); ++j) {
      int k = W.sigma_index[j];
      auto cf = detail::cylinder_coeff<N>(m, spacetime(t, W.node(k)));
      ncoef[k] = 1.0 / std::sqrt(cf.c * cf.g0diag[W.sigma_axis[j]]);
    }
  };
  // time independence is detected by comparing coefficients at five times
  auto coeff_snapshot = [&](double t) {
    fill_level(t);
    fill_normal(t);
    std::vector<double> al(total);
    fill_alpha(al, t);
    std::vector<double> r = AV;
    r.insert(r.end(), Anode.begin(), Anode.end());
    r.insert(r.end(), al.begin(), al.end());
    r.insert(r.end(), ncoef.begin(), ncoef.end());
    for (const auto& b : beta) r.insert(r.end(), b.begin(), b.end());
    return r;
  };
  bool is_static = true;
  {
    auto ref = coeff_snapshot(grid.t0);
    for (int it = 1; it <= 4 && is_static; ++it)
      is_static = coeff_snapshot(grid.t0 + (grid.t1 - grid.t0) * (it - 0.37) / 4.0) == ref;
    fill_level(grid.t0 + ht);
    fill_normal(grid.t0);
  }

  std::vector<T> um(total, T(0.0)), u(total, T(0.0)), up(total, T(0.0)), Sn(total, T(0.0));
  auto boundary_value = [&](double t, int k) -> T {
    double r = detail::smooth_step((t - grid.t0) / grid.ramp);
    if (r == 0.0) return T(0.0);
    return r * f(spacetime(t, W.node(k)));
  };

  // probes
  struct ProbeWork {
    int n_star;
    std::array<int, N> base;
    std::array<double, N> off;
    std::vector<int> nodes;
    std::array<std::vector<T>, 3> vals;
  };
  std::vector<ProbeWork> pw;
  for (const auto& p : probe_points) {
    ProbeWork w;
    w.n_star = static_cast<int>(std::lround((p[0] - grid.t0) / ht));
    if (w.n_star < 1 || w.n_star > grid.steps - 1) throw DomainError("solve_ibvp: probe time must lie inside (t0, t1)");
    for (int a = 0; a < N; ++a) {
      double xi = (p[1 + a] - grid.lo[a]) / hx[a];
      if (xi < 0 || xi > grid.cells[a]) throw DomainError("solve_ibvp: probe outside the spatial rectangle");
      int b = std::clamp(static_cast<int>(std::floor(xi)), 1, grid.cells[a] - 2);
      w.base[a] = b;
      w.off[a] = xi - b;
    }
    int cnt = 1;
    for (int a = 0; a < N; ++a) cnt *= 4;
    for (int c = 0; c < cnt; ++c) {
      int r = c, k = 0;
      for (int a = 0; a < N; ++a) {
        k += (w.base[a] - 1 + r % 4) * W.stride[a];
        r /= 4;
      }
      w.nodes.push_back(k);
    }
    pw.push_back(std::move(w));
  }
  std::vector<int> snap_steps;
  for (double ts : opt.snapshot_times) {
    int n = static_cast<int>(std::lround((ts - grid.t0) / ht));
    if (n < 1 || n > grid.steps - 1) throw DomainError("solve_ibvp: snapshot time must lie inside (t0, t1)");
    snap_steps.push_back(n);
    Snapshot<T> s;
    s.step = n;
    s.t = grid.t0 + n * ht;
    W.snapshots.push_back(s);
  }

  auto record_trace = [&](int n, const std::vector<T>& cur) {
    if (!opt.traces || n % std::max(1, opt.trace_stride)) return;
    W.times.push_back(grid.t0 + n * ht);
    std::vector<T> tr(W.sigma_index.size()), nm(W.sigma_index.size());
    for (std::size_t j = 0; j < W.sigma_index.size(); ++j) {
      int k = W.sigma_index[j], a = W.sigma_axis[j];
      int s = W.stride[a] * (W.sigma_sign[j] > 0 ? -1 : 1);  // step inward
      tr[j] = cur[k];
      nm[j] = ncoef[k] * (3.0 * cur[k] - 4.0 * cur[k + s] + cur[k + 2 * s]) / (2.0 * hx[a]);
    }
    W.trace.push_back(std::move(tr));
    W.neumann.push_back(std::move(nm));
  };
  auto record_level = [&](int n, const std::vector<T>& cur) {
    for (auto& w : pw)
      for (int d = -1; d <= 1; ++d)
        if (n == w.n_star + d) {
          w.vals[d + 1].resize(w.nodes.size());
          for (std::size_t i = 0; i < w.nodes.size(); ++i) w.vals[d + 1][i] = cur[w.nodes[i]];
        }
    for (std::size_t i = 0; i < snap_steps.size(); ++i)
      for (int d = -1; d <= 1; ++d)
        if (n == snap_steps[i] + d) W.snapshots[i].u[d + 1] = cur;
  };
  auto energy_at = [&](const std::vector<T>& a, const std::vector<T>& b) {
    // E^{n+1/2} with a = u^n, b = u^{n+1}
    double kin = 0, pot = 0, pv = 0;
    for (int k : interior) {
      kin += alpha_p[k] * detail::abs2(b[k] - a[k]) / ht2;
      pv += AV[k] * detail::re_dot(b[k], a[k]);
    }
    for (int k = 0; k < total; ++k)
      for (int a2 = 0; a2 < N; ++a2)
        if (idx[k][a2] < grid.cells[a2]) {
          int s = W.stride[a2];
          pot += beta[a2][k] * detail::re_dot(b[k + s] - b[k], a[k + s] - a[k]) * ihx2[a2];
        }
    double vol = 1;
    for (int a2 = 0; a2 < N; ++a2) vol *= hx[a2];
    return 0.5 * (kin + pot + pv) * vol;
  };

  // levels 0 and 1 vanish by compatibility of zero Cauchy data and the ramp
  for (int k : boundary) u[k] = boundary_value(grid.t0 + ht, k);
  for (int k : boundary) um[k] = boundary_value(grid.t0, k);
  record_trace(0, um);
  record_level(0, um);
  record_trace(1, u);
  record_level(1, u);
  auto nonzero = [&](const std::vector<T>& v) {
    for (int k : boundary)
      if (v[k] != T(0.0)) return true;
    return false;
  };
  if (nonzero(um)) W.first_data_step = 0;
  else if (nonzero(u)) W.first_data_step = 1;

  fill_alpha(alpha_m, grid.t0 + 0.5 * ht);
  fill_alpha(alpha_p, grid.t0 + 1.5 * ht);
  for (int n = 1; n < grid.steps; ++n) {
    const double t = grid.t0 + n * ht;
    if (!is_static) {
      fill_level(t);
      fill_alpha(alpha_p, t + 0.5 * ht);
    }
    if (source)
      for (int k : interior) Sn[k] = Anode[k] * (*source)(spacetime(t, W.node(k)));
    for (int k : interior) {
      T lap(0.0);
      for (int a = 0; a < N; ++a) {
        int s = W.stride[a];
        lap += (beta[a][k] * (u[k + s] - u[k]) - beta[a][k - s] * (u[k] - u[k - s])) * ihx2[a];
      }
      up[k] = u[k] + (alpha_m[k] * (u[k] - um[k]) + ht2 * (lap - AV[k] * u[k] + Sn[k])) / alpha_p[k];
    }
    const double tn = t + ht;
    for (int k : boundary) up[k] = boundary_value(tn, k);
    if (W.first_data_step < 0 && nonzero(up)) W.first_data_step = n + 1;
    if (!is_static) fill_normal(tn);
    record_trace(n + 1, up);
    record_level(n + 1, up);
    if (opt.energy_stride > 0 && n % opt.energy_stride == 0) {
      W.energy_times.push_back(t + 0.5 * ht);
      W.energy.push_back(energy_at(u, up));
    }
    if (n % 64 == 0 || n == grid.steps - 1) {
      double mx = 0;
      for (int k : interior) mx = std::max(mx, std::abs(up[k]));
      if (!std::isfinite(mx) || mx > 1e150) {
        std::ostringstream os;
        os << "solve_ibvp: instability at step " << n + 1 << " (t = " << tn << ", max |u| = " << mx << ", ht = " << ht
           << ")";
        throw NumericalError(os.str());
      }
    }
    if (!is_static) std::swap(alpha_m, alpha_p);
    std::swap(um, u);
    std::swap(u, up);
    if (n == grid.steps - 2) W.last[0] = um;
  }
  if (grid.steps < 2) W.last[0] = um;
  W.last[1] = um;
  W.last[2] = u;
  for (int k = 0; k < total; ++k) W.max_abs = std::max(W.max_abs, std::abs(W.last[2][k]));
  if (W.first_data_step >= 0) {
    int reach = grid.steps - W.first_data_step + 1;
    for (int k = 0; k < total; ++k)
      if (bdist[k] > reach) W.leakage = std::max(W.leakage, std::abs(W.last[2][k]));
  }

  for (std::size_t i = 0; i < pw.size(); ++i) {
    auto& w = pw[i];
    ProbeValue<T, N> pv;
    pv.point = probe_points[i];
    double tau = (probe_points[i][0] - (grid.t0 + w.n_star * ht)) / ht;
    double lt[3] = {0.5 * tau * (tau - 1), 1 - tau * tau, 0.5 * tau * (tau + 1)};
    double dlt[3] = {tau - 0.5, -2 * tau, tau + 0.5};
    std::array<std::array<double, 4>, N> ws, dws;
    for (int a = 0; a < N; ++a) detail::lagrange4_weights(w.off[a], ws[a].data(), dws[a].data());
    pv.value = T(0.0);
    for (auto& g : pv.grad) g = T(0.0);
    for (std::size_t c = 0; c < w.nodes.size(); ++c) {
      int r = static_cast<int>(c);
      std::array<int, N> ii;
      for (int a = 0; a < N; ++a) {
        ii[a] = r % 4;
        r /= 4;
      }
      double wsp = 1;
      for (int a = 0; a < N; ++a) wsp *= ws[a][ii[a]];
      std::array<double, N> wd;
      for (int a = 0; a < N; ++a) {
        wd[a] = dws[a][ii[a]] / hx[a];
        for (int b = 0; b < N; ++b)
          if (b != a) wd[a] *= ws[b][ii[b]];
      }
      for (int l = 0; l < 3; ++l) {
        T v = w.vals[l][c];
        pv.value += lt[l] * wsp * v;
        pv.grad[0] += dlt[l] / ht * wsp * v;
        for (int a = 0; a < N; ++a) pv.grad[1 + a] += lt[l] * wd[a] * v;
      }
    }
    W.probes.push_back(pv);
  }
  (void)D;
  return W;
}

/**
 * Energy (1/2) sum (alpha |d_t u|^2 + beta^a |d_a u|^2) cell volume at snapshot time t, with centered
 * time differences and face gradients.
 */
template <class T, int N>
double energy_norm(const MetricModel<N>& m, const WaveField<T, N>& W, double t) {
  const Snapshot<T>* s = nullptr;
  for (const auto& sn : W.snapshots)
    if (std::abs(sn.t - t) <= 0.5 * W.grid.ht()) s = &sn;
  if (!s) throw DomainError("energy_norm: no snapshot recorded at that time");
  const auto& g = W.grid;
  const double ht = g.ht();
  double kin = 0, pot = 0, vol = 1;
  for (int a = 0; a < N; ++a) vol *= g.hx(a);
  for (int k = 0; k < W.size(); ++k) {
    auto x = W.node(k);
    ChartPoint<N> q;
    q[0] = s->t;
    for (int a = 0; a < N; ++a) q[1 + a] = x[a];
    bool bd = false;
    for (int a = 0; a < N; ++a) {
      int i = (k / W.stride[a]) % W.nodes[a];
      bd = bd || i == 0 || i == g.cells[a];
      if (i < g.cells[a]) {
        ChartPoint<N> qf = q;
        qf[1 + a] += 0.5 * g.hx(a);
        double b = detail::cylinder_coeff<N>(m, qf).beta[a];
        pot += b * detail::abs2(s->u[1][k + W.stride[a]] - s->u[1][k]) / (g.hx(a) * g.hx(a));
      }
    }
    double w = bd ? 0.5 : 1.0;  // trapezoid weight on the boundary in 1+1D and on faces in 1+2D
    if (N == 2) {
      int nb = 0;
      for (int a = 0; a < N; ++a) {
        int i = (k / W.stride[a]) % W.nodes[a];
        nb += (i == 0 || i == g.cells[a]);
      }
      w = nb == 0 ? 1.0 : (nb == 1 ? 0.5 : 0.25);
    }
    double al = detail::cylinder_coeff<N>(m, q).alpha;
    kin += w * al * detail::abs2(s->u[2][k] - s->u[0][k]) / (4 * ht * ht);
  }
  return 0.5 * (kin + pot) * vol;
}

/// DtN record: Neumann traces on the coarse trace grid with a two-grid Richardson error bar.
template <class T, int N>
struct DtnRecord {
  GridSpec<N> grid;  ///< coarse grid; the reported values come from grid.refined()
  std::vector<Vec<double, N>> sigma;
  std::vector<int> sigma_axis;
  std::vector<double> times;
  std::vector<std::vector<T>> f;
  std::vector<std::vector<T>> value;
  std::vector<std::vector<double>> error;  ///< |coarse - fine| / 3 per sample
  double error_bar = 0;                    ///< max of error
  std::uint64_t v_hash = 0;
};

template <int N>
std::uint64_t field_hash(const ScalarField<N + 1>& V, const GridSpec<N>& g) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&](double x) {
    unsigned char b[sizeof(double)];
    std::memcpy(b, &x, sizeof(double));
    for (unsigned char c : b) h = (h ^ c) * 1099511628211ull;
  };
  for (int it = 0; it < 5; ++it)
    for (int k = 0; k <= 16; ++k) {
      ChartPoint<N> q;
      q[0] = g.t0 + (g.t1 - g.t0) * it / 4.0;
      for (int a = 0; a < N; ++a) q[1 + a] = g.lo[a] + (g.hi[a] - g.lo[a]) * ((k * (a + 3)) % 17) / 16.0;
      mix(V(q));
    }
  return h;
}

template <class T, int N>
DtnRecord<T, N> dtn_map(const MetricModel<N>& m, const ScalarField<N + 1>& V, const BoundaryFn<T, N>& f,
                        const GridSpec<N>& grid) {
  SolveOptions opt;
  auto g0 = resolve_grid<N>(m, grid);
  auto coarse = solve_ibvp<T, N>(m, V, f, g0, opt);
  auto fine = solve_ibvp<T, N>(m, V, f, g0.refined(), opt);
  DtnRecord<T, N> R;
  R.grid = g0;
  R.sigma = coarse.sigma;
  R.sigma_axis = coarse.sigma_axis;
  R.times = coarse.times;
  R.v_hash = field_hash<N>(V, g0);
  // map each coarse trace node to its fine counterpart
  std::vector<int> map(coarse.sigma.size(), -1);
  for (std::size_t j = 0; j < coarse.sigma.size(); ++j)
    for (std::size_t i = 0; i < fine.sigma.size(); ++i) {
      double d = 0;
      for (int a = 0; a < N; ++a) d = std::max(d, std::abs(coarse.sigma[j][a] - fine.sigma[i][a]));
      if (d < 1e-12 && coarse.sigma_axis[j] == fine.sigma_axis[i] && coarse.sigma_sign[j] == fine.sigma_sign[i]) {
        map[j] = static_cast<int>(i);
        break;
      }
    }
  for (std::size_t n = 0; n < coarse.times.size(); ++n) {
    std::vector<T> fv(map.size()), val(map.size());
    std::vector<double> err(map.size());
    for (std::size_t j = 0; j < map.size(); ++j) {
      fv[j] = coarse.trace[n][j];
      val[j] = fine.neumann[2 * n][map[j]];
      err[j] = std::abs(coarse.neumann[n][j] - val[j]) / 3.0;
      R.error_bar = std::max(R.error_bar, err[j]);
    }
    R.f.push_back(std::move(fv));
    R.value.push_back(std::move(val));
    R.error.push_back(std::move(err));
  }
  return R;
}

namespace detail {
template <class T, int N>
double sigma_weight(const DtnRecord<T, N>& a, std::size_t j) {
  double w = a.grid.ht();
  if constexpr (N == 2) w *= a.grid.hx(1 - a.sigma_axis[j]);
  return w;
}
}  // namespace detail

/// Discrete L2 norm over Sigma (time and boundary measure) of the difference of two records.
template <class T, int N>
double sigma_l2_diff(const DtnRecord<T, N>& a, const DtnRecord<T, N>& b) {
  if (a.times.size() != b.times.size() || a.sigma.size() != b.sigma.size())
    throw ConfigError("sigma_l2_diff: records on different grids");
  double s = 0;
  for (std::size_t n = 0; n < a.times.size(); ++n)
    for (std::size_t j = 0; j < a.sigma.size(); ++j)
      s += detail::sigma_weight(a, j) * detail::abs2(a.value[n][j] - b.value[n][j]);
  return std::sqrt(s);
}

/// The same norm applied to the per-sample error bars.
template <class T, int N>
double sigma_l2_error(const DtnRecord<T, N>& a) {
  double s = 0;
  for (const auto& row : a.error)
    for (std::size_t j = 0; j < row.size(); ++j) s += detail::sigma_weight(a, j) * row[j] * row[j];
  return std::sqrt(s);
}

/// w = c^{(n-1)/4} u and V = -c^{-(n-1)/4} box_g c^{(n-1)/4}; V is supplied to jet order kMaxJet - 2.
template <int N>
struct GaugeFields {
  ScalarField<N + 1> w, V, weight;
};

template <int N>
GaugeFields<N> gauge_transform(const MetricModel<N>& g, const ScalarField<N + 1>& c, const ScalarField<N + 1>& u) {
  constexpr int D = N + 1;
  const double k = (N - 1) / 4.0;
  if (!c.valid()) throw ConfigError("gauge_transform: conformal factor missing");
  GaugeFields<N> G;
  if (N == 1) {
    G.w = u;
    G.V = ScalarField<D>::constant(0.0);
    G.weight = ScalarField<D>::constant(1.0);
    return G;
  }
  G.weight = ScalarField<D>::make(
      [c, k](const auto& x) {
        using S = std::decay_t<decltype(x[0])>;
        constexpr int K = jet_order<S>::value;
        using std::pow;
        S cv = c.template eval<K>(x);
        if (!(value(cv) > 0.0)) throw DomainError("gauge_transform: conformal factor must be positive");
        return pow(cv, k);
      },
      c.max_order(), "c^k");
  auto wt = G.weight;
  G.w = ScalarField<D>::make(
      [wt, u](const auto& x) {
        using S = std::decay_t<decltype(x[0])>;
        constexpr int K = jet_order<S>::value;
        return wt.template eval<K>(x) * u.template eval<K>(x);
      },
      std::min(c.max_order(), u.max_order()), "w");
  G.V = ScalarField<D>::make(
      [g, wt](const auto& x) {
        using S = std::decay_t<decltype(x[0])>;
        constexpr int K = jet_order<S>::value;
        if constexpr (K + 2 > kMaxJet) {
          throw CapabilityError("gauge potential: order not supplied");
          return S(0.0);
        } else {
          auto L = local_geometry<K, N>(g, x);
          auto j = to_jet2<K, D>(field_jet2<K, D>(wt, x));
          return -box_of<S, D>(L, j) / j.v;
        }
      },
      std::min(kMaxJet - 2, c.max_order() - 2), "V_gauge");
  return G;
}

/// Multiply every stored level of a solution by c^{(n-1)/4} at its node.
template <class T, int N>
WaveField<T, N> gauge_transform(const GaugeFields<N>& G, WaveField<T, N> W) {
  if (N == 1) return W;
  const double ht = W.grid.ht();
  auto scale = [&](std::vector<T>& u, double t) {
    for (int k = 0; k < static_cast<int>(u.size()); ++k) {
      ChartPoint<N> q;
      q[0] = t;
      auto x = W.node(k);
      for (int a = 0; a < N; ++a) q[1 + a] = x[a];
      u[k] *= G.weight(q);
    }
  };
  for (int l = 0; l < 3; ++l) scale(W.last[l], W.grid.t1 - (2 - l) * ht);
  for (auto& s : W.snapshots)
    for (int l = 0; l < 3; ++l) scale(s.u[l], s.t + (l - 1) * ht);
  return W;
}

/**
 * Discrete L2 norm over interior nodes of (box_g + V) w at time t1 - ht, with the same divergence-form
 * stencil as the solver applied to the three final levels.
 */
template <class T, int N>
double discrete_residual(const MetricModel<N>& m, const ScalarField<N + 1>& V, const WaveField<T, N>& W) {
  const auto& g = W.grid;
  const double ht = g.ht(), t = g.t1 - ht;
  double s = 0, vol = 1;
  for (int a = 0; a < N; ++a) vol *= g.hx(a);
  const auto& um = W.last[0];
  const auto& u = W.last[1];
  const auto& up = W.last[2];
  for (int k = 0; k < W.size(); ++k) {
    bool interior = true;
    for (int a = 0; a < N; ++a) {
      int i = (k / W.stride[a]) % W.nodes[a];
      interior = interior && i > 0 && i < g.cells[a];
    }
    if (!interior) continue;
    auto x = W.node(k);
    ChartPoint<N> q;
    q[0] = t;
    for (int a = 0; a < N; ++a) q[1 + a] = x[a];
    auto cf = detail::cylinder_coeff<N>(m, q);
    ChartPoint<N> qm = q, qp = q;
    qm[0] -= 0.5 * ht;
    qp[0] += 0.5 * ht;
    double am = detail::cylinder_coeff<N>(m, qm).alpha, ap = detail::cylinder_coeff<N>(m, qp).alpha;
    T r = (ap * (up[k] - u[k]) - am * (u[k] - um[k])) / (ht * ht);
    for (int a = 0; a < N; ++a) {
      int st = W.stride[a];
      double h = g.hx(a);
      ChartPoint<N> fp = q, fm = q;
      fp[1 + a] += 0.5 * h;
      fm[1 + a] -= 0.5 * h;
      double bp = detail::cylinder_coeff<N>(m, fp).beta[a], bm = detail::cylinder_coeff<N>(m, fm).beta[a];
      r -= (bp * (u[k + st] - u[k]) - bm * (u[k] - u[k - st])) / (h * h);
    }
    r = r / cf.A + V(q) * u[k];
    s += detail::abs2(r);
  }
  return std::sqrt(s * vol);
}

/// log2 of successive error ratios on a halving ladder.
inline std::vector<double> observed_orders(const std::vector<double>& errors) {
  std::vector<double> r;
  for (std::size_t i = 1; i < errors.size(); ++i) r.push_back(std::log2(errors[i - 1] / errors[i]));
  return r;
}

}  // namespace lorcal
