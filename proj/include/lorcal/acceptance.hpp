/** @file acceptance.hpp
 *  @brief Named acceptance pipelines with pinned tolerances, shared by the acceptance binary and the CLI.
 */
#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "beams.hpp"
#include "carleman.hpp"
#include "convexity.hpp"
#include "geodesics.hpp"
#include "recovery.hpp"
#include "wavesolver.hpp"

namespace lorcal::acceptance {

namespace tol {
constexpr double identity_rel = 1e-10;
constexpr double fd_order_lo = 1.7, fd_order_hi = 2.3;
constexpr double riccati_drift = 1e-9;
constexpr double closed_form_Y = 1e-9;
constexpr double flat_hessian = 1e-8;
constexpr double hyperbolic_hessian = -1e-6;
constexpr double radial = 1e-6;
constexpr double residual_slope = -0.5;
constexpr double order_lo = 1.9, order_hi = 2.1;
constexpr double energy_drift = 1e-6;
constexpr double leakage = 1e-12;
constexpr double gauge_order_lo = 1.8, gauge_order_hi = 2.2;
constexpr double point_exponent = -0.8;
constexpr double gradient_rel = 0.1;
constexpr double limit_gap = 0.02;
constexpr double dtn_separation = 10.0;
constexpr double dtn_r2 = 0.99;
}  // namespace tol

struct Criterion {
  int id = 0;
  std::string title;
  bool pass = true;
  std::vector<std::pair<std::string, double>> metrics;

  Criterion(int i, std::string t) : id(i), title(std::move(t)) {}
  void put(const std::string& k, double v) { metrics.emplace_back(k, v); }
  /// Records a named sub-check and folds it into the verdict.
  void check(const std::string& k, bool ok) {
    metrics.emplace_back(k, ok ? 1.0 : 0.0);
    pass = pass && ok;
  }
};

/// Dense random polynomial of total degree <= deg with N(0, scale) coefficients.
template <int D>
struct RandomPoly {
  std::vector<std::pair<std::array<int, D>, double>> terms;

  template <class Rng>
  RandomPoly(Rng& rng, int deg, double scale) {
    std::normal_distribution<double> nd(0.0, scale);
    std::array<int, D> e{};
    auto rec = [&](auto&& self, int i, int left) -> void {
      if (i == D) {
        terms.emplace_back(e, nd(rng));
        return;
      }
      for (int k = 0; k <= left; ++k) {
        e[i] = k;
        self(self, i + 1, left - k);
      }
      e[i] = 0;
    };
    rec(rec, 0, deg);
  }

  ScalarField<D> field() const {
    auto t = terms;
    return ScalarField<D>::make([t](const auto& x) {
      using S = std::decay_t<decltype(x[0])>;
      S s(0.0);
      for (auto& [e, a] : t) {
        S m(a);
        for (int i = 0; i < D; ++i)
          for (int k = 0; k < e[i]; ++k) m = m * x[i];
        s = s + m;
      }
      return s;
    });
  }
};

namespace detail {

inline Box<2> hyp_box() {
  Box<2> b;
  b.lo = {-1.0, -0.5, -0.5};
  b.hi = {1.0, 0.5, 0.5};
  return b;
}

inline MetricModel<2> flat2() { return catalog::minkowski<2>(Box<2>::cube(1, 1)); }
inline MetricModel<2> hyperbolic2() { return catalog::ultrastatic<2>(-1.0, hyp_box()); }

inline double bump(double t, double a, double b) {
  double r = 0.25 * (b - a);
  return lorcal::detail::smooth_step((t - a) / r) * lorcal::detail::smooth_step((b - t) / r);
}

inline bool orders_in(const std::vector<double>& errs, double lo, double hi, Criterion& c, const std::string& tag) {
  bool ok = true;
  auto o = observed_orders(errs);
  for (std::size_t i = 0; i < o.size(); ++i) {
    c.put(tag + "_order_" + std::to_string(i + 1), o[i]);
    ok = ok && o[i] >= lo && o[i] <= hi;
  }
  return ok;
}

}  // namespace detail

inline Criterion carleman_identity(unsigned long long seed) {
  Criterion c{1, "Carleman identity"};
  auto m = detail::flat2();
  std::mt19937_64 rng(seed);
  double worst = 0;
  for (int k = 0; k < 1000; ++k) {
    RandomPoly<3> v(rng, 4, 1.0), l(rng, 4, 0.5), s(rng, 4, 1.0);
    auto q = sample_box<2>(Box<2>::cube(0.8, 0.8), rng);
    auto T = carleman_terms<2>(m, l.field(), s.field(), v.field(), q);
    worst = std::max(worst, T.residual() / T.scale());
  }
  c.put("max_relative_residual", worst);
  c.check("analytic", worst <= tol::identity_rel);
  bool fd_ok = true;
  for (int k = 0; k < 5; ++k) {
    RandomPoly<3> v(rng, 4, 1.0), l(rng, 4, 0.5), s(rng, 4, 1.0);
    auto q = sample_box<2>(Box<2>::cube(0.3, 0.3), rng);
    auto fl = l.field(), fs = s.field(), fv = v.field();
    std::vector<double> res;
    for (double h : {1e-2, 5e-3, 2.5e-3}) res.push_back(carleman_terms_fd<2>(m, fl, fs, fv, q, h).residual());
    fd_ok = detail::orders_in(res, tol::fd_order_lo, tol::fd_order_hi, c, "fd" + std::to_string(k)) && fd_ok;
  }
  c.check("finite_difference_second_order", fd_ok);
  return c;
}

inline Criterion riccati_invariant() {
  Criterion c{2, "Riccati determinant invariant"};
  FermiOptions o;
  o.s_lo = -0.01;
  o.s_hi = 1.0;
  o.step = 1e-3;
  auto flat = catalog::minkowski<2>(Box<2>::cube(1.5, 1.5));
  auto st = beam_propagate<2>(fermi_chart<2>(flat, {-0.5, 0.0, 0.0}, Vec<double, 3>{1.0, 1.0, 0.0}, o));
  double y_err = 0;
  for (int k = 0; k < st.size(); ++k) {
    cplx ys(1.0, 2.0 * st.s_at(k));
    y_err = std::max({y_err, std::abs(st.Y[k](0, 0) - 1.0), std::abs(st.Y[k](1, 1) - ys), std::abs(st.Y[k](0, 1)),
                      std::abs(st.Y[k](1, 0))});
  }
  auto hyp = detail::hyperbolic2();
  ChartPoint<2> p{-0.5, 0.0, 0.0};
  auto xi = null_vector<2>(hyp.metric(p), Vec<double, 2>{0.8, 0.6}, 1.0);
  Eigen::Matrix2cd H0;
  H0 << cplx(0.3, 1.2), cplx(0.1, 0.2), cplx(0.1, 0.2), cplx(-0.2, 0.7);
  auto sh = beam_propagate<2>(fermi_chart<2>(hyp, p, xi, o), H0, Eigen::Matrix2cd::Identity());
  c.put("flat_drift", st.max_invariant_drift);
  c.put("ultrastatic_drift", sh.max_invariant_drift);
  c.put("flat_closed_form_Y_error", y_err);
  c.put("s_hi", std::min(st.s_hi(), sh.s_hi()));
  c.check("flat", st.max_invariant_drift <= tol::riccati_drift);
  c.check("ultrastatic", sh.max_invariant_drift <= tol::riccati_drift);
  c.check("closed_form", y_err <= tol::closed_form_Y);
  c.check("range", st.s_lo() <= 0.0 && sh.s_lo() <= 0.0 && st.s_hi() >= 1.0 - 1e-12 && sh.s_hi() >= 1.0 - 1e-12);
  return c;
}

inline Criterion curvature_bound(unsigned long long seed) {
  Criterion c{3, "Curvature bound"};
  auto flat = detail::flat2();
  auto f0 = curvature_bound_check(flat, flat.domain, 0.0, 10000, seed);
  bool only_zero = f0.pass && !curvature_bound_check(flat, flat.domain, 0.1, 10000, seed).pass &&
                   !curvature_bound_check(flat, flat.domain, -0.1, 10000, seed).pass;
  c.put("minkowski_worst_margin", f0.worst_margin);
  c.check("minkowski_only_K0", only_zero);
  auto hyp = detail::hyperbolic2();
  bool hyp_ok = true;
  for (double K : {-1.0, -0.5, 0.0}) {
    auto r = curvature_bound_check(hyp, hyp.domain, K, 10000, seed + 1);
    c.put("hyperbolic_worst_scaled_K" + std::to_string(static_cast<int>(std::lround(-10 * K))) + "_neg_tenths", r.worst_scaled);
    hyp_ok = hyp_ok && r.pass;
  }
  c.check("hyperbolic_interval", hyp_ok);
  c.check("hyperbolic_rejects_K-1.1", !curvature_bound_check(hyp, hyp.domain, -1.1, 10000, seed + 1).pass);
  Mat<double, 2> C{{{-1.0, 0.0}, {0.0, -1.0}}};
  auto jm = catalog::jet<2>(C, 1.0, Box<2>::cube(0.5, 0.5));
  auto jr = curvature_bound_check(jm, Box<2>::centered({0, 0, 0}, 0.1), -0.5, 10000, seed + 2);
  c.put("jet_worst_margin", jr.worst_margin);
  c.check("jet_ball", jr.pass);
  return c;
}

inline Criterion hessian_comparison(unsigned long long seed) {
  Criterion c{4, "Hessian comparison"};
  auto f = hessian_comparison_check<2>(detail::flat2(), {0, 0, 0}, 0.0, 10000, seed);
  auto h = hessian_comparison_check<2>(detail::hyperbolic2(), {0, 0, 0}, -1.0, 10000, seed + 1);
  auto d = hessian_comparison_check<2>(detail::hyperbolic2(), {0, 0, 0}, 0.5, 10000, seed + 2);
  c.put("minkowski_max_abs_margin", f.max_abs_margin);
  c.put("hyperbolic_worst_margin", h.worst_margin);
  c.put("discrimination_worst_margin", d.worst_margin);
  c.check("minkowski_equality", f.max_abs_margin <= tol::flat_hessian);
  c.check("hyperbolic", h.worst_margin >= tol::hyperbolic_hessian);
  c.check("discrimination", d.worst_margin < 0.0);
  return c;
}

inline Criterion eikonal_radial(unsigned long long seed) {
  Criterion c{5, "Eikonal and radial geodesic"};
  auto f = radial_checks<2>(detail::flat2(), {0, 0, 0}, 1000, seed);
  auto h = radial_checks<2>(detail::hyperbolic2(), {0, 0, 0}, 1000, seed + 1);
  c.put("minkowski_eikonal", f.max_eikonal);
  c.put("minkowski_radial", f.max_radial);
  c.put("hyperbolic_eikonal", h.max_eikonal);
  c.put("hyperbolic_radial", h.max_radial);
  c.check("minkowski", f.max_eikonal <= tol::radial && f.max_radial <= tol::radial);
  c.check("hyperbolic", h.max_eikonal <= tol::radial && h.max_radial <= tol::radial);
  return c;
}

inline Criterion beam_residual_decay() {
  Criterion c{6, "Beam residual decay"};
  std::vector<double> lams{20, 40, 80, 160};
  for (auto m : {detail::flat2(), detail::hyperbolic2()}) {
    ChartPoint<2> p{0.0, 0.05, -0.05};
    FermiOptions o;
    o.delta = 0.5;
    auto st = beam_propagate<2>(fermi_chart<2>(m, p, null_vector<2>(m.metric(p), Vec<double, 2>{0.8, 0.6}, 1.0), o));
    ResidualGrid rg;
    rg.ns = 16;
    auto rep = beam_residual<2>(m, ScalarField<3>::constant(0.0), st, lams, rg);
    std::vector<double> y;
    bool mono = true;
    for (std::size_t i = 0; i < rep.size(); ++i) {
      y.push_back(rep[i].normalized);
      c.put(m.name + "_residual_" + std::to_string(static_cast<int>(lams[i])), rep[i].normalized);
      if (i) mono = mono && rep[i].normalized < rep[i - 1].normalized;
    }
    double slope = loglog_slope(lams, y);
    c.put(m.name + "_slope", slope);
    c.check(m.name + "_monotone", mono);
    c.check(m.name + "_slope_bound", slope <= tol::residual_slope);
  }
  return c;
}

inline Criterion wave_solver() {
  Criterion c{7, "Wave solver"};
  Box<1> strip;
  strip.lo = {-1.0, 0.0};
  strip.hi = {1.0, 1.0};
  auto m = catalog::minkowski<1>(strip);
  auto V0 = ScalarField<2>::constant(0.0);
  auto line = [](int cells, double t1) {
    auto g = GridSpec<1>::interval(-1.0, t1, 0.0, 1.0, cells);
    g.steps = static_cast<int>(std::lround((t1 + 1.0) / (0.5 / cells)));
    return g;
  };
  auto pulse = [](double s) { return std::exp(-(s + 0.3) * (s + 0.3) / 0.01); };
  BoundaryFn<double, 1> travelling = [pulse](const ChartPoint<1>& q) { return pulse(q[0] - q[1]); };

  std::vector<double> err;
  for (int cells : {100, 200, 400}) {
    auto g = line(cells, 0.5);
    auto W = solve_ibvp<double, 1>(m, V0, travelling, g);
    double e = 0;
    for (int k = 0; k < W.size(); ++k) e = std::max(e, std::abs(W.last[2][k] - pulse(g.t1 - W.node(k)[0])));
    err.push_back(e);
  }
  c.check("dalembert_order", detail::orders_in(err, tol::order_lo, tol::order_hi, c, "dalembert"));

  Box<2> b = detail::hyp_box();
  auto mu = catalog::ultrastatic<2>(-0.5, b);
  auto V = ScalarField<3>::make([](const auto& x) { return 0.5 + 0.3 * x[1]; });
  auto u = ScalarField<3>::make([](const auto& x) {
    using std::cos;
    using std::exp;
    auto t = x[0] - 0.2;
    return exp(-t * t / 0.05) * cos(2.0 * x[1] + x[2] + x[0]);
  });
  auto S = ScalarField<3>::make([mu, V, u](const auto& x) {
    using Sc = std::decay_t<decltype(x[0])>;
    constexpr int K = jet_order<Sc>::value;
    if constexpr (K + 2 > kMaxJet) {
      throw CapabilityError("source: order not supplied");
      return Sc(0.0);
    } else {
      auto L = local_geometry<K, 2>(mu, x);
      auto j = to_jet2<K, 3>(field_jet2<K, 3>(u, x));
      return box_of<Sc, 3>(L, j) + V.template eval<K>(x) * j.v;
    }
  });
  BoundaryFn<double, 2> fu = [u](const ChartPoint<2>& q) { return u(q); };
  err.clear();
  for (int cells : {32, 64, 128}) {
    GridSpec<2> g;
    g.t0 = -1.0;
    g.t1 = 0.4;
    g.lo = {-0.5, -0.5};
    g.hi = {0.5, 0.5};
    g.cells = {cells, cells};
    g.steps = static_cast<int>(std::lround(1.4 / (0.4 / cells)));
    SolveOptions o;
    o.traces = false;
    auto W = solve_ibvp<double, 2>(mu, V, fu, g, o, {}, &S);
    double e = 0;
    for (int k = 0; k < W.size(); ++k) {
      auto x = W.node(k);
      e = std::max(e, std::abs(W.last[2][k] - u({g.t1, x[0], x[1]})));
    }
    err.push_back(e);
  }
  c.check("manufactured_order", detail::orders_in(err, tol::order_lo, tol::order_hi, c, "manufactured"));

  SolveOptions eo;
  eo.energy_stride = 1;
  BoundaryFn<double, 1> burst = [](const ChartPoint<1>& q) {
    return q[1] == 0.0 ? detail::bump(q[0], -0.9, -0.5) : 0.0;
  };
  auto W = solve_ibvp<double, 1>(m, V0, burst, line(200, 1.0), eo);
  double ref = -1, drift = 0;
  for (std::size_t i = 0; i < W.energy.size(); ++i)
    if (W.energy_times[i] > -0.5) {
      if (ref < 0) ref = W.energy[i];
      drift = std::max(drift, std::abs(W.energy[i] - ref) / ref);
    }
  c.put("energy_drift", drift);
  c.check("energy", ref > 0 && drift <= tol::energy_drift);

  BoundaryFn<double, 1> late = [](const ChartPoint<1>& q) {
    return q[1] == 0.0 ? detail::bump(q[0], -0.7, -0.4) : 0.0;
  };
  auto L = solve_ibvp<double, 1>(m, ScalarField<2>::constant(1.0), late, line(400, -0.3));
  c.put("leakage", L.leakage);
  c.check("finite_speed", L.first_data_step > 0 && L.leakage <= tol::leakage);
  return c;
}

inline Criterion gauge(unsigned long long seed) {
  Criterion c{8, "Gauge transform"};
  Box<1> strip;
  strip.lo = {-1.0, 0.0};
  strip.hi = {1.0, 1.0};
  auto g1 = catalog::minkowski<1>(strip);
  auto c1 = ScalarField<2>::make([](const auto& x) { return 1.0 + 0.2 * x[1] * x[1]; });
  auto u1 = ScalarField<2>::make([](const auto& x) { return sin(x[0] - 2.0 * x[1]); });
  auto G1 = gauge_transform<1>(g1, c1, u1);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(0.0, 1.0);
  bool exact = true;
  for (int k = 0; k < 1000; ++k) {
    ChartPoint<1> q{d(rng) - 0.5, d(rng)};
    exact = exact && G1.w(q) == u1(q) && G1.V(q) == 0.0;
  }
  c.check("n1_identity", exact);

  Box<2> b = detail::hyp_box();
  auto cfun = [](const auto& x) { return 1.0 + 0.1 * exp(-(x[1] * x[1] + x[2] * x[2] + x[0] * x[0])); };
  auto g = catalog::minkowski<2>(b);
  auto cg = catalog::conformal_minkowski<2>(cfun, "bump", b);
  auto cf = ScalarField<3>::make([cfun](const auto& x) { return cfun(x); });
  auto G = gauge_transform<2>(g, cf, ScalarField<3>::constant(0.0));
  BoundaryFn<double, 2> f = [](const ChartPoint<2>& q) {
    return q[1] == -0.5 ? detail::bump(q[0], -0.9, 0.1) * std::cos(2 * q[2]) : 0.0;
  };
  std::vector<double> res;
  for (int cells : {16, 32, 64}) {
    GridSpec<2> gs;
    gs.t0 = -1.0;
    gs.t1 = 0.3;
    gs.lo = {-0.5, -0.5};
    gs.hi = {0.5, 0.5};
    gs.cells = {cells, cells};
    gs.steps = static_cast<int>(std::lround(1.3 / (0.4 / cells)));
    SolveOptions o;
    o.traces = false;
    auto W = solve_ibvp<double, 2>(cg, ScalarField<3>::constant(0.0), f, gs, o);
    res.push_back(discrete_residual<double, 2>(g, G.V, gauge_transform<double, 2>(G, W)));
  }
  for (std::size_t i = 0; i < res.size(); ++i) c.put("n2_residual_" + std::to_string(i), res[i]);
  c.check("n2_order", detail::orders_in(res, tol::gauge_order_lo, tol::gauge_order_hi, c, "n2"));
  return c;
}

/// Point-value series for V in {0, 1} on one 1+1 model; checks decay, gradient and V-independence.
inline void point_value_case(Criterion& c, const std::string& tag, const MetricModel<1>& m, const ChartPoint<1>& p,
                             const GridSpec<1>& grid, std::vector<ProbeReport<1>>* out = nullptr) {
  auto xi = null_vector<1>(m.metric(p), Vec<double, 1>{1.0}, 1.0);
  PointSeriesOptions o;
  o.fermi.delta = 2.0;
  std::vector<ProbeReport<1>> reps;
  for (double V : {0.0, 1.0})
    reps.push_back(point_value_series<1>(m, ScalarField<2>::constant(V), p, xi, {20, 40, 80, 160}, grid,
                                         Vec<double, 2>{1.0, 0.0}, o));
  const auto& r0 = reps[0];
  const auto& r1 = reps[1];
  bool complete = r0.lambdas.size() == 4 && r1.lambdas.size() == 4;
  c.check(tag + "_ladder_resolved", complete);
  if (!complete) return;
  c.put(tag + "_exponent_V1", r1.exponent);
  c.check(tag + "_exponent", r1.exponent <= tol::point_exponent);
  double ge = std::max(r0.grad_rel_error.back(), r1.grad_rel_error.back());
  c.put(tag + "_grad_rel_error", ge);
  c.check(tag + "_gradient", ge <= tol::gradient_rel);
  bool shrinking = true;
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < 4; ++i) {
    double gap = std::abs(r1.values[i] - r0.values[i]);
    c.put(tag + "_V_gap_" + std::to_string(static_cast<int>(r1.lambdas[i])), gap);
    shrinking = shrinking && gap < prev;
    prev = gap;
  }
  c.check(tag + "_V_independent_limit", shrinking && prev <= tol::limit_gap);
  if (out) *out = reps;
}

inline Criterion point_values(std::vector<ProbeReport<1>>* tables = nullptr) {
  Criterion c{9, "Point-value extraction"};
  Box<1> fb;
  fb.lo = {-4.0, -3.0};
  fb.hi = {4.0, 5.0};
  auto gf = GridSpec<1>::interval(-3.0, 3.0, 0.0, 2.0, 4000, 0.9);
  gf.ramp = 0.05;
  std::vector<ProbeReport<1>> a, b;
  point_value_case(c, "flat", catalog::minkowski<1>(fb), {0.3, 1.5}, gf, &a);
  Box<1> ub;
  ub.lo = {-4.0, -0.9};
  ub.hi = {4.0, 0.9};
  auto gu = GridSpec<1>::interval(-3.0, 3.0, -0.5, 0.5, 8000, 0.9);
  gu.ramp = 0.05;
  point_value_case(c, "ultrastatic", catalog::ultrastatic<1>(-0.5, ub), {0.3, 0.25}, gu, &b);
  if (tables) {
    *tables = a;
    tables->insert(tables->end(), b.begin(), b.end());
  }
  return c;
}

/// Beam and pulse dictionary for the DtN probes on the unit strip.
inline std::vector<BoundaryFn<cplx, 1>> dtn_dictionary(const MetricModel<1>& m) {
  std::vector<BoundaryFn<cplx, 1>> d;
  FermiOptions fo;
  fo.delta = 2.0;
  TimeCutoff eta{5.0, 1.0};
  for (double lam : {8.0, 12.0}) {
    d.push_back(make_beam_datum<1>(m, {0.0, 0.5}, {1.0, 1.0}, lam, eta, fo).fn());
    d.push_back(make_beam_datum<1>(m, {0.0, 0.5}, {1.0, -1.0}, lam, eta, fo).fn());
  }
  d.push_back(boundary_pulse<1>(-1.4, -0.2, 0, 0.0));
  d.push_back(boundary_pulse<1>(-1.3, -0.1, 0, 1.0, 6.0));
  return d;
}

inline MetricModel<1> dtn_strip() {
  Box<1> b;
  b.lo = {-3.0, -2.5};
  b.hi = {3.0, 3.5};
  return catalog::minkowski<1>(b);
}

inline GridSpec<1> dtn_grid(int cells) {
  auto g = GridSpec<1>::interval(-1.6, 1.6, 0.0, 1.0, cells, 0.5);
  g.ramp = 0.05;
  return g;
}

inline Criterion dtn_distinguishability() {
  Criterion c{10, "DtN distinguishability"};
  auto m = dtn_strip();
  auto dict = dtn_dictionary(m);
  auto V0 = ScalarField<2>::constant(0.0);
  ChartPoint<1> center{0.0, 0.5};
  auto g = dtn_grid(300);
  c.check("bump_center_in_recovery_set", in_recovery_set_flat<1>(g, center));
  auto same = dtn_gap_probe<1>(m, V0, V0, dict, g);
  c.put("equal_gap", same.gap);
  c.put("equal_error_bar", same.error_bar);
  c.check("equal_potentials", same.gap <= same.error_bar);
  auto diff = dtn_gap_probe<1>(m, V0, potential_bump<1>(1.0, center, 0.3), dict, g);
  c.put("unit_bump_gap", diff.gap);
  c.put("unit_bump_error_bar", diff.error_bar);
  c.put("unit_bump_ratio", diff.ratio);
  c.check("unit_bump_separated", diff.ratio >= tol::dtn_separation);
  std::vector<double> amps{0.025, 0.05, 0.075, 0.1}, gaps;
  auto gl = dtn_grid(100);
  for (double a : amps) gaps.push_back(dtn_gap_probe<1>(m, V0, potential_bump<1>(a, center, 0.3), dict, gl).gap);
  double r2 = linear_r2(amps, gaps);
  c.put("linearity_r2", r2);
  c.check("linear_in_amplitude", r2 >= tol::dtn_r2);
  return c;
}

inline Criterion causal_structure(unsigned long long seed) {
  Criterion c{11, "Causal structure"};
  auto flat = detail::flat2();
  auto bumped = catalog::perturbed<2>(0.0, 0.05, {0.0, 0.1, 0.0}, 0.3, Box<2>::cube(1, 1));
  auto a = cut_once_check<2>(flat, {0, 0, 0}, Box<2>::cube(0.8, 0.8), 1000, seed);
  auto b = cut_once_check<2>(bumped, {0, 0, 0}, Box<2>::cube(0.8, 0.8), 1000, seed + 1);
  c.put("flat_max_components", a.max_components);
  c.put("perturbed_max_components", b.max_components);
  c.put("skipped", a.n_skipped + b.n_skipped);
  c.check("cut_once", a.max_components == 1 && b.max_components == 1);
  std::mt19937_64 rng(seed + 2);
  int mism = 0;
  for (int k = 0; k < 10000; ++k) {
    auto p = sample_box<2>(flat.domain, rng), q = sample_box<2>(flat.domain, rng);
    if (classify_causal<2>(flat, p, q).label != classify_minkowski<2>(p, q)) ++mism;
  }
  c.put("classification_mismatches", mism);
  c.check("classification", mism == 0);
  return c;
}

/// Criteria 1..11 in order; `progress` sees each result as it completes.
inline std::vector<Criterion> run_all(unsigned long long seed,
                                      const std::function<void(const Criterion&)>& progress = {}) {
  std::vector<std::function<Criterion()>> jobs = {
      [&] { return carleman_identity(seed); },
      [] { return riccati_invariant(); },
      [&] { return curvature_bound(seed + 10); },
      [&] { return hessian_comparison(seed + 20); },
      [&] { return eikonal_radial(seed + 30); },
      [] { return beam_residual_decay(); },
      [] { return wave_solver(); },
      [&] { return gauge(seed + 40); },
      [] { return point_values(); },
      [] { return dtn_distinguishability(); },
      [&] { return causal_structure(seed + 50); },
  };
  std::vector<Criterion> out;
  for (auto& j : jobs) {
    out.push_back(j());
    if (progress) progress(out.back());
  }
  return out;
}

}  // namespace lorcal::acceptance
