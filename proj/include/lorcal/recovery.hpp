/** @file recovery.hpp
 *  @brief Beam-driven point values, ratio statistics over boundary dictionaries and DtN gap probes.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "beams.hpp"
#include "wavesolver.hpp"

namespace lorcal {

/// Boundary datum eta(t) U_lambda restricted to the lateral boundary, sharing its beam state.
template <int N>
struct BeamDatum {
  std::shared_ptr<const BeamState<N>> beam;
  double lambda = 1.0;
  TimeCutoff eta;

  cplx operator()(const ChartPoint<N>& q) const {
    double e = eta(q[0]);
    if (e == 0.0) return cplx(0.0);
    return e * beam_eval<N>(*beam, lambda, q).value;
  }
  BoundaryFn<cplx, N> fn() const {
    auto self = *this;
    return [self](const ChartPoint<N>& q) { return self(q); };
  }
};

/// Beam datum through p along xi with H0 = i h0 I and Y0 = I.
template <int N>
BeamDatum<N> make_beam_datum(const MetricModel<N>& m, const ChartPoint<N>& p, const Vec<double, N + 1>& xi,
                             double lambda, const TimeCutoff& eta, const FermiOptions& fo = {}, double h0 = 1.0) {
  using CM = Eigen::Matrix<cplx, N, N>;
  auto fr = fermi_chart<N>(m, p, xi, fo);
  BeamDatum<N> d;
  d.beam = std::make_shared<const BeamState<N>>(beam_propagate<N>(fr, CM(cplx(0.0, h0) * CM::Identity()), CM::Identity()));
  d.lambda = lambda;
  d.eta = eta;
  return d;
}

namespace detail {

/// Lateral-boundary sample points of a grid at time spacing dt.
template <int N>
std::vector<ChartPoint<N>> sigma_samples(const GridSpec<N>& g, double t0, double t1, double dt) {
  std::vector<ChartPoint<N>> pts;
  int nt = std::max(2, static_cast<int>(std::ceil((t1 - t0) / dt)));
  std::vector<Vec<double, N>> xs;
  if constexpr (N == 1) {
    xs = {Vec<double, 1>{g.lo[0]}, Vec<double, 1>{g.hi[0]}};
  } else {
    for (int a = 0; a < N; ++a)
      for (int side = 0; side < 2; ++side)
        for (int k = 0; k <= g.cells[1 - a]; ++k) {
          Vec<double, N> x;
          x[a] = side ? g.hi[a] : g.lo[a];
          x[1 - a] = g.lo[1 - a] + k * g.hx(1 - a);
          xs.push_back(x);
        }
  }
  for (int i = 0; i <= nt; ++i)
    for (const auto& x : xs) {
      ChartPoint<N> q;
      q[0] = t0 + (t1 - t0) * i / nt;
      for (int a = 0; a < N; ++a) q[1 + a] = x[a];
      pts.push_back(q);
    }
  return pts;
}

inline std::pair<double, double> fit_power(const std::vector<double>& x, const std::vector<double>& y) {
  double n = static_cast<double>(x.size()), sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return {slope, std::exp((sy - slope * sx) / n)};
}

}  // namespace detail

/**
 * Closure of the spacelike exterior of p stays inside (t0, t1) x M0. Closed form for flat models:
 * the exterior reaches times t_p +- R with R the largest distance from x_p to a corner of M0.
 */
template <int N>
bool in_recovery_set_flat(const GridSpec<N>& g, const ChartPoint<N>& p) {
  for (int a = 0; a < N; ++a)
    if (!(p[1 + a] > g.lo[a] && p[1 + a] < g.hi[a])) return false;
  double R2 = 0;
  for (int a = 0; a < N; ++a) {
    double d = std::max(p[1 + a] - g.lo[a], g.hi[a] - p[1 + a]);
    R2 += d * d;
  }
  double R = std::sqrt(R2);
  return p[0] - R > g.t0 && p[0] + R < g.t1;
}

struct PointSeriesOptions {
  double min_points_per_wavelength = 20;
  FermiOptions fermi;
  double beam_h0 = 1.0;  ///< H0 = i beam_h0 I with Y0 = I
  bool richardson = true;  ///< extrapolate u(p) and grad u(p) from the grid and its refinement
};

template <int N>
struct ProbeReport {
  ChartPoint<N> p{};
  Vec<double, N + 1> xi{}, w{};
  double w_dot_xi = 0;  ///< g(w, xi) at p
  std::vector<double> lambdas;
  std::vector<cplx> values;
  std::vector<double> deviation;   ///< |u(p) - 1|
  std::vector<double> discretization;  ///< two-grid estimate of the error in u(p) before extrapolation
  std::vector<double> grad_probe;  ///< Im(w^i d_i u(p)) / lambda
  std::vector<double> grad_rel_error;
  double exponent = 0, fitted_C = 0;
  double T1 = 0, eps = 0;
  GridSpec<N> grid;
  std::vector<std::string> warnings;
};

/**
 * For each lambda: f = eta U_lambda on the lateral boundary, solve the IBVP and sample u and w.grad u
 * at p. The grid keeps its spatial mesh and CFL ratio; its time range is set from the data support.
 */
template <int N>
ProbeReport<N> point_value_series(const MetricModel<N>& m, const ScalarField<N + 1>& V, const ChartPoint<N>& p,
                                  const Vec<double, N + 1>& xi, std::vector<double> lambdas, GridSpec<N> grid,
                                  const Vec<double, N + 1>& w, const PointSeriesOptions& opt = {}) {
  constexpr int D = N + 1;
  if (lambdas.size() < 4) throw ConfigError("point_value_series: need at least 4 lambdas for the fit");
  for (std::size_t i = 1; i < lambdas.size(); ++i)
    if (!(lambdas[i] > lambdas[i - 1])) throw ConfigError("point_value_series: lambdas must increase strictly");
  if (!(lambdas[0] > 0)) throw ConfigError("point_value_series: lambdas must be positive");
  for (int a = 0; a < N; ++a)
    if (!(p[1 + a] > grid.lo[a] && p[1 + a] < grid.hi[a])) throw DomainError("point_value_series: p must be interior");
  ProbeReport<N> rep;
  rep.p = p;
  rep.xi = xi;
  rep.w = w;
  auto g = m.metric(p);
  rep.w_dot_xi = quad<double, D>(g, w, xi);

  auto fr = fermi_chart<N>(m, p, xi, opt.fermi);
  using CM = Eigen::Matrix<cplx, N, N>;
  CM H0 = cplx(0.0, opt.beam_h0) * CM::Identity();
  auto st = std::make_shared<const BeamState<N>>(beam_propagate<N>(fr, H0, CM::Identity()));

  // the axis meets the lateral boundary at t_a < t_p < t_b; eta switches off inside (t_a, t_p) and the
  // earliest boundary support fixes the start of the solve
  const auto& F = st->frame;
  auto outside = [&](const ChartPoint<N>& x) {
    for (int a = 0; a < N; ++a)
      if (x[1 + a] <= grid.lo[a] || x[1 + a] >= grid.hi[a]) return true;
    return false;
  };
  double t_a = -std::numeric_limits<double>::infinity(), t_b = std::numeric_limits<double>::infinity();
  for (int k = F.i0; k >= 0; --k)
    if (outside(F.x[k])) {
      t_a = F.x[k][0];
      break;
    }
  for (int k = F.i0; k < F.size(); ++k)
    if (outside(F.x[k])) {
      t_b = F.x[k][0];
      break;
    }
  if (!std::isfinite(t_a)) throw DomainError("point_value_series: the null geodesic does not reach the boundary before p");
  const double delta = st->delta();
  double t_first = std::numeric_limits<double>::infinity();
  for (const auto& q : detail::sigma_samples<N>(grid, m.domain.lo[0], p[0], delta / 40.0))
    if (beam_eval<N>(*st, lambdas.back(), q).inside) t_first = std::min(t_first, q[0]);
  rep.T1 = p[0];
  rep.eps = 0.5 * std::min(p[0] - t_a, t_b - p[0]);
  TimeCutoff eta{rep.T1 - 1.5 * rep.eps, rep.eps};  // eta = 1 up to T1 - eps, 0 from T1 - eps/2

  grid.t0 = t_first - 1.5 * grid.ramp;
  if (grid.t0 < m.domain.lo[0]) {
    grid.t0 = m.domain.lo[0];
    rep.warnings.push_back("solve start clamped to the chart; ramp may overlap the data");
  }
  grid.steps = 0;
  grid.t1 = p[0] + 1e-9;  // provisional, to size ht
  auto gr = resolve_grid<N>(m, grid);
  grid.t1 = p[0] + 3.0 * gr.ht();
  grid = resolve_grid<N>(m, grid);
  rep.grid = grid;
  // zero Cauchy data: the beam must vanish on the first slice
  {
    int total = 1;
    for (int a = 0; a < N; ++a) total *= grid.cells[a] + 1;
    int stride = std::max(1, total / 4000);
    for (int k = 0; k < total; k += stride) {
      ChartPoint<N> q;
      q[0] = grid.t0;
      int r = k;
      for (int a = 0; a < N; ++a) {
        q[1 + a] = grid.lo[a] + (r % (grid.cells[a] + 1)) * grid.hx(a);
        r /= grid.cells[a] + 1;
      }
      if (beam_eval<N>(*st, lambdas.back(), q).value != cplx(0.0)) {
        rep.warnings.push_back("beam is nonzero on the initial slice");
        break;
      }
    }
  }

  // largest coordinate wavenumber per unit lambda along the axis inside the grid
  std::array<double, N> kmax{};
  for (int k = 0; k < F.size(); ++k) {
    if (outside(F.x[k])) continue;
    auto gk = m.metric(F.x[k]);
    for (int a = 0; a < N; ++a) {
      double c = 0;
      for (int j = 0; j < D; ++j) c += gk[1 + a][j] * F.E[k][0][j];
      kmax[a] = std::max(kmax[a], std::abs(c));
    }
  }
  SolveOptions so;
  so.traces = false;
  for (double lam : lambdas) {
    double ppw = std::numeric_limits<double>::infinity();
    for (int a = 0; a < N; ++a)
      if (kmax[a] > 0) ppw = std::min(ppw, 2 * M_PI / (lam * kmax[a] * grid.hx(a)));
    if (ppw < opt.min_points_per_wavelength) {
      std::ostringstream os;
      os << "lambda " << lam << " under-resolved (" << ppw << " points per wavelength); truncated";
      rep.warnings.push_back(os.str());
      break;
    }
    BeamDatum<N> datum{st, lam, eta};
    auto pv = solve_ibvp<cplx, N>(m, V, datum.fn(), grid, so, {p}).probes[0];
    double disc = 0;
    if (opt.richardson) {
      auto pf = solve_ibvp<cplx, N>(m, V, datum.fn(), grid.refined(), so, {p}).probes[0];
      disc = std::abs(pf.value - pv.value) / 3.0;
      pv.value = (4.0 * pf.value - pv.value) / 3.0;
      for (int i = 0; i < D; ++i) pv.grad[i] = (4.0 * pf.grad[i] - pv.grad[i]) / 3.0;
    }
    cplx wd = 0;
    for (int i = 0; i < D; ++i) wd += w[i] * pv.grad[i];
    rep.lambdas.push_back(lam);
    rep.values.push_back(pv.value);
    rep.discretization.push_back(disc);
    rep.deviation.push_back(std::abs(pv.value - 1.0));
    rep.grad_probe.push_back(wd.imag() / lam);
    rep.grad_rel_error.push_back(std::abs(wd.imag() / lam - rep.w_dot_xi) / std::abs(rep.w_dot_xi));
  }
  if (rep.lambdas.size() >= 2) {
    auto [s, C] = detail::fit_power(rep.lambdas, rep.deviation);
    rep.exponent = s;
    rep.fitted_C = C;
  }
  if (rep.lambdas.size() < 4) rep.warnings.push_back("fewer than 4 resolved lambdas; fit is indicative only");
  return rep;
}

struct RatioReport {
  std::vector<cplx> u1, u2, ratios;
  cplx mean{};
  double spread = 0;  ///< max |ratio - mean|
  int used = 0;
  bool inconclusive = false;
};

/// u1(p) / u2(p) over a dictionary of boundary data; entries with |u2(p)| <= floor are skipped.
template <int N>
RatioReport omega_ratio(const MetricModel<N>& m, const ScalarField<N + 1>& V1, const ScalarField<N + 1>& V2,
                        const ChartPoint<N>& p, const std::vector<BoundaryFn<cplx, N>>& dict, GridSpec<N> grid,
                        double floor = 1e-8) {
  RatioReport r;
  SolveOptions so;
  so.traces = false;
  for (const auto& f : dict) {
    auto W1 = solve_ibvp<cplx, N>(m, V1, f, grid, so, {p});
    auto W2 = solve_ibvp<cplx, N>(m, V2, f, grid, so, {p});
    cplx a = W1.probes[0].value, b = W2.probes[0].value;
    r.u1.push_back(a);
    r.u2.push_back(b);
    if (std::abs(b) <= floor) continue;
    r.ratios.push_back(a / b);
  }
  r.used = static_cast<int>(r.ratios.size());
  if (r.used == 0) {
    r.inconclusive = true;
    return r;
  }
  for (auto x : r.ratios) r.mean += x;
  r.mean /= static_cast<double>(r.used);
  for (auto x : r.ratios) r.spread = std::max(r.spread, std::abs(x - r.mean));
  return r;
}

struct GapReport {
  std::vector<double> gaps;        ///< L2(Sigma) norm of Lambda_1 f - Lambda_2 f per entry
  std::vector<double> error_bars;  ///< sum of the two Richardson L2 error bars per entry
  double gap = 0;                  ///< max over the dictionary
  double error_bar = 0;            ///< max over the dictionary
  double ratio = 0;                ///< gap / error_bar
};

template <int N>
GapReport dtn_gap_probe(const MetricModel<N>& m, const ScalarField<N + 1>& V1, const ScalarField<N + 1>& V2,
                        const std::vector<BoundaryFn<cplx, N>>& dict, const GridSpec<N>& grid) {
  GapReport r;
  for (const auto& f : dict) {
    auto R1 = dtn_map<cplx, N>(m, V1, f, grid);
    auto R2 = dtn_map<cplx, N>(m, V2, f, grid);
    r.gaps.push_back(sigma_l2_diff<cplx, N>(R1, R2));
    r.error_bars.push_back(sigma_l2_error<cplx, N>(R1) + sigma_l2_error<cplx, N>(R2));
  }
  for (std::size_t i = 0; i < r.gaps.size(); ++i) {
    r.gap = std::max(r.gap, r.gaps[i]);
    r.error_bar = std::max(r.error_bar, r.error_bars[i]);
  }
  r.ratio = r.error_bar > 0 ? r.gap / r.error_bar : std::numeric_limits<double>::infinity();
  return r;
}

/// Coefficient of determination of a least-squares line through (x, y).
inline double linear_r2(const std::vector<double>& x, const std::vector<double>& y) {
  double n = static_cast<double>(x.size()), mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i] / n;
    my += y[i] / n;
  }
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (syy == 0) return 1.0;
  return sxy * sxy / (sxx * syy);
}

/// Smooth space-time bump amplitude * psi(|q - c|^2 / r^2), supported in the ball of radius r.
template <int N>
ScalarField<N + 1> potential_bump(double amplitude, const ChartPoint<N>& c, double r) {
  return ScalarField<N + 1>::make(
      [=](const auto& x) {
        using S = std::decay_t<decltype(x[0])>;
        S s2(0.0);
        for (int i = 0; i < N + 1; ++i) s2 = s2 + (x[i] - c[i]) * (x[i] - c[i]);
        return amplitude * catalog::mollifier<S>(s2 / (r * r));
      },
      kMaxJet, "bump");
}

/// Smooth compactly supported pulse in time times a smooth profile along the boundary.
template <int N>
BoundaryFn<cplx, N> boundary_pulse(double t_start, double t_end, int face_axis, double face_value, double freq = 0.0) {
  return [=](const ChartPoint<N>& q) -> cplx {
    if (std::abs(q[1 + face_axis] - face_value) > 1e-12) return 0.0;
    double r = 0.5 * (t_end - t_start);
    double b = detail::smooth_step((q[0] - t_start) / r) * detail::smooth_step((t_end - q[0]) / r);
    if (b == 0.0) return 0.0;
    double tang = 1.0;
    if constexpr (N == 2) tang = std::cos(2.0 * q[2 - face_axis]);
    return b * tang * std::polar(1.0, freq * q[0]);
  };
}

}  // namespace lorcal
