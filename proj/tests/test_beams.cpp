#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "lorcal/beams.hpp"

using namespace lorcal;

namespace {

Box<2> hyp_box() {
  Box<2> b;
  b.lo = {-1.0, -0.5, -0.5};
  b.hi = {1.0, 0.5, 0.5};
  return b;
}

MetricModel<2> flat() { return catalog::minkowski<2>(Box<2>::cube(1, 1)); }
MetricModel<2> hyperbolic() { return catalog::ultrastatic<2>(-1.0, hyp_box()); }

template <int N>
Vec<double, N + 1> forward_null(const MetricModel<N>& m, const ChartPoint<N>& p, const Vec<double, N>& dir) {
  return null_vector<N>(m.metric(p), dir, 1.0);
}

BeamFrame<2> frame_of(const MetricModel<2>& m, double delta = 0.25) {
  ChartPoint<2> p{0.0, 0.05, -0.05};
  FermiOptions o;
  o.delta = delta;
  return fermi_chart<2>(m, p, forward_null<2>(m, p, {0.8, 0.6}), o);
}

}  // namespace

TEST(Beams, CutoffProfile) {
  EXPECT_EQ(cutoff(0.0), 1.0);
  EXPECT_EQ(cutoff(0.25), 1.0);
  EXPECT_EQ(cutoff(-0.5), 0.0);
  EXPECT_EQ(cutoff(0.7), 0.0);
  double prev = 1.0;
  for (double t = 0.25; t <= 0.5; t += 0.01) {
    EXPECT_LE(cutoff(t), prev + 1e-15);
    prev = cutoff(t);
  }
  auto j = cutoff_sq_jet(0.1);
  double h = 1e-5;
  EXPECT_NEAR(j[1], (cutoff_sq(0.1 + h) - cutoff_sq(0.1 - h)) / (2 * h), 1e-6);
}

TEST(Beams, TimeCutoffProfile) {
  TimeCutoff eta{1.0, 0.2};
  EXPECT_EQ(eta(1.05), 1.0);
  EXPECT_EQ(eta(1.2), 0.0);
  EXPECT_GT(eta(1.15), 0.0);
  EXPECT_LT(eta(1.15), 1.0);
}

TEST(Beams, AdaptedNullFrameGram) {
  auto m = hyperbolic();
  ChartPoint<2> p{0.1, 0.2, -0.1};
  auto g = m.metric(p);
  auto E = adapted_null_frame<2>(g, forward_null<2>(m, p, {0.3, -0.9}));
  double eta[3][3] = {{0, 1, 0}, {1, 0, 0}, {0, 0, 1}};
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) EXPECT_NEAR((quad<double, 3>(g, E[a], E[b])), eta[a][b], 1e-13);
}

TEST(Beams, NullFrameRejectsTimelike) {
  auto m = flat();
  EXPECT_THROW(adapted_null_frame<2>(m.metric({0, 0, 0}), Vec<double, 3>{1.0, 0.2, 0.0}), DomainError);
  EXPECT_THROW(adapted_null_frame<2>(m.metric({0, 0, 0}), Vec<double, 3>{-1.0, 1.0, 0.0}), DomainError);
}

TEST(Beams, FlatFermiChartIsLinear) {
  auto fr = frame_of(flat());
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  for (int k = 0; k < 20; ++k) {
    Vec<double, 3> sy{u(rng) * 5, u(rng), u(rng)};
    auto q = fr.map(sy);
    for (int i = 0; i < 3; ++i) {
      double ref = fr.p[i];
      for (int a = 0; a < 3; ++a) ref += sy[a] * fr.E[fr.i0][a][i];
      EXPECT_NEAR(q[i], ref, 1e-14);
    }
  }
  auto c = fermi_check(fr);
  EXPECT_LE(c.metric_dev, 1e-14);
  EXPECT_LE(c.derivative_dev, 1e-14);
}

TEST(Beams, HyperbolicFermiInvariants) {
  auto fr = frame_of(hyperbolic());
  auto c = fermi_check(fr);
  EXPECT_LE(c.metric_dev, 1e-8);
  EXPECT_LE(c.derivative_dev, 1e-8);
  EXPECT_LE(c.axis_dev, 1e-9);
}

TEST(Beams, ChartInverseRoundTrip) {
  auto fr = frame_of(hyperbolic());
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  for (int k = 0; k < 20; ++k) {
    Vec<double, 3> sy{u(rng) * 3, u(rng), u(rng)};
    auto back = fr.chart(fr.map(sy));
    ASSERT_TRUE(back);
    for (int a = 0; a < 3; ++a) EXPECT_NEAR((*back)[a], sy[a], 1e-11);
  }
  EXPECT_FALSE(fr.chart({0.0, 0.45, 0.45}).has_value());
}

TEST(Beams, DMatrixFromCurvatureMatchesMetricJet) {
  // 1/4 d^2 g^{11} of the pulled-back metric against -1/2 R(E0,Ej,E0,Ek)
  for (auto m : {hyperbolic(), catalog::perturbed<2>(0.0, 0.05, {0.0, 0.1, 0.0}, 0.3, Box<2>::cube(1, 1))}) {
    auto fr = frame_of(m);
    for (double s : {-0.2, 0.0, 0.3}) {
      auto Dj = fermi_D_from_metric<2>(fr, s);
      EXPECT_LE((Dj - fr.Dm[fr.nearest(s)]).cwiseAbs().maxCoeff(), 1e-7) << m.name << " s=" << s;
    }
  }
}

TEST(Beams, CurvatureSignFocuses) {
  // positive spatial curvature gives D = K0/2 on the spacelike direction for a unit-speed null ray
  Box<2> b;
  b.lo = {-1.0, -0.6, -0.6};
  b.hi = {1.0, 0.6, 0.6};
  auto m = catalog::warped<2>([](const auto& t) { return decltype(t * 1.0)(1.0); }, "one", 1.0, b);
  ChartPoint<2> p{0, 0, 0};
  auto xi = forward_null<2>(m, p, {1.0, 0.0});
  auto E = adapted_null_frame<2>(m.metric(p), xi);
  auto D = beam_D_matrix<2>(m, p, E);
  // the spatial part u of xi has g0(u,u) = xi0^2, so R(E0,E2,E2,E0) = K0 xi0^2
  EXPECT_NEAR(D(1, 1), 0.5 * xi[0] * xi[0], 1e-10);
  EXPECT_NEAR(D(0, 0), 0.0, 1e-12);
}

TEST(Beams, FlatClosedFormYZ) {
  auto m = flat();
  ChartPoint<2> p{-0.5, 0.0, 0.0};
  FermiOptions o;
  o.delta = 0.25;
  auto fr = fermi_chart<2>(m, p, Vec<double, 3>{1.0, 1.0, 0.0}, o);
  auto st = beam_propagate<2>(fr);
  EXPECT_LE(st.max_invariant_drift, 1e-9);
  EXPECT_GT(st.min_imH_eig, 0.0);
  for (int k = 0; k < st.size(); k += 37) {
    double s = st.s_at(k);
    cplx ys(1.0, 2.0 * s);
    EXPECT_NEAR(std::abs(st.Y[k](0, 0) - 1.0), 0.0, 1e-12);
    EXPECT_NEAR(std::abs(st.Y[k](1, 1) - ys), 0.0, 1e-12);
    EXPECT_NEAR(std::abs(st.Y[k](0, 1)), 0.0, 1e-14);
    EXPECT_NEAR(std::abs(st.H[k](1, 1) - cplx(0, 1) / ys), 0.0, 1e-12);
    EXPECT_NEAR(std::abs(st.a[k] - 1.0 / std::sqrt(ys)), 0.0, 1e-12);
  }
}

TEST(Beams, UltrastaticInvariantAndBranch) {
  auto fr = frame_of(hyperbolic());
  using CM = Eigen::Matrix2cd;
  CM H0;
  H0 << cplx(0.3, 1.2), cplx(0.1, 0.2), cplx(0.1, 0.2), cplx(-0.2, 0.7);
  auto st = beam_propagate<2>(fr, H0, CM::Identity());
  EXPECT_LE(st.max_invariant_drift, 1e-9);
  EXPECT_GT(st.min_imH_eig, 0.0);
  EXPECT_LT(st.max_branch_step, M_PI / 2);
}

TEST(Beams, PropagateRejectsBadInitialData) {
  auto fr = frame_of(flat());
  using CM = Eigen::Matrix2cd;
  CM H0 = CM::Identity();
  EXPECT_THROW(beam_propagate<2>(fr, H0, CM::Identity()), DomainError);
  CM Hn;
  Hn << cplx(0, 1), 1.0, 0.0, cplx(0, 1);
  EXPECT_THROW(beam_propagate<2>(fr, Hn, CM::Identity()), DomainError);
}

TEST(Beams, ValueAndGradientAtBasePoint) {
  auto m = hyperbolic();
  auto fr = frame_of(m);
  auto st = beam_propagate<2>(fr);
  auto g = m.metric(fr.p);
  const cplx ad = st.at(0.0).ad;
  for (double lam : {5.0, 50.0, 500.0}) {
    auto v = beam_eval<2>(st, lam, fr.p, true);
    EXPECT_NEAR(std::abs(v.value - 1.0), 0.0, 1e-12);
    cplx along = 0;
    for (int i = 0; i < 3; ++i) {
      double xl = 0;
      for (int j = 0; j < 3; ++j) xl += g[i][j] * fr.xi[j];
      // the amplitude gradient is lambda independent
      EXPECT_LE(std::abs(v.grad[i] - cplx(0, lam * xl)), 1.0);
      along += v.grad[i] * fr.xi[i];
    }
    EXPECT_NEAR(std::abs(along - ad), 0.0, 1e-9 * lam);
  }
  auto neg = beam_eval<2>(st, -20.0, fr.map({0.1, 0.02, 0.01}));
  auto pos = beam_eval<2>(st, 20.0, fr.map({0.1, 0.02, 0.01}));
  EXPECT_NEAR(std::abs(neg.value - std::conj(pos.value)), 0.0, 1e-15);
  EXPECT_THROW(beam_eval<2>(st, 0.0, fr.p), DomainError);
}

TEST(Beams, GradientMatchesFiniteDifferences) {
  auto fr = frame_of(hyperbolic());
  auto st = beam_propagate<2>(fr);
  ChartPoint<2> q = fr.map({0.2, 0.01, -0.02});
  auto v = beam_eval<2>(st, 30.0, q, true);
  double h = 1e-6;
  for (int i = 0; i < 3; ++i) {
    ChartPoint<2> a = q, b = q;
    a[i] += h;
    b[i] -= h;
    cplx fd = (beam_eval<2>(st, 30.0, a).value - beam_eval<2>(st, 30.0, b).value) / (2 * h);
    EXPECT_NEAR(std::abs(fd - v.grad[i]), 0.0, 1e-6 * (1 + std::abs(v.grad[i])));
  }
}

TEST(Beams, GaussianDecayAndCutoffSupport) {
  auto fr = frame_of(hyperbolic());
  auto st = beam_propagate<2>(fr);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double lam = 40.0;
  for (int k = 0; k < 200; ++k) {
    Vec<double, 3> sy{0.3 * u(rng), 0.15 * u(rng), 0.15 * u(rng)};
    auto v = beam_eval<2>(st, lam, fr.map(sy));
    double y2 = sy[1] * sy[1] + sy[2] * sy[2];
    if (std::sqrt(y2) >= 0.5 * fr.delta) {
      EXPECT_EQ(v.value, cplx(0.0));
    } else {
      auto l = st.at(sy[0]);
      EXPECT_LE(std::abs(v.value), std::abs(l.a) * std::exp(-lam * st.min_imH_eig * y2) * (1 + 1e-9));
    }
  }
}

TEST(Beams, AxisEquationsHold) {
  auto st0 = beam_propagate<2>(frame_of(flat()));
  auto a0 = beam_axis_check(st0);
  EXPECT_LE(a0.eikonal, 1e-9);
  EXPECT_LE(a0.transport, 1e-9);
  auto st1 = beam_propagate<2>(frame_of(hyperbolic()));
  auto a1 = beam_axis_check(st1);
  EXPECT_LE(a1.eikonal, 1e-8);
  EXPECT_LE(a1.transport, 1e-8);
  EXPECT_LE(a1.D_mismatch, 1e-8);
}

TEST(Beams, FermiBoxMatchesChartBox) {
  // the wave operator applied through the Fermi geometry equals the chart-coordinate operator
  auto m = hyperbolic();
  auto fr = frame_of(m);
  auto f = [](const auto& x) { return x[0] * x[0] + sin(x[1]) * x[2] + x[1] * x[1] * x[1]; };
  Vec<double, 3> sy{0.15, 0.03, -0.04};
  auto G = fr.geometry(sy);
  auto F = fr.map<2>(jet_point<2, 3>(sy));
  auto fj = to_taylor<3>(f(F));
  cplx box_fermi = 0;
  for (int a = 0; a < 3; ++a) {
    box_fermi += G.gam[a] * fj.g[a];
    for (int b = 0; b < 3; ++b) box_fermi -= G.gi[a][b] * fj.h[a][b];
  }
  auto x = G.x;
  auto xj = jet_point<2, 3>(x);
  auto fx = to_taylor<3>(f(xj));
  auto g = m.metric(x);
  auto gi = inverse<double, 3>(g);
  auto Gam = christoffel<2>(m, x);
  double box_chart = 0;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) {
      box_chart -= gi[a][b] * fx.h[a][b].real();
      for (int c = 0; c < 3; ++c) box_chart += gi[a][b] * Gam[c][a][b] * fx.g[c].real();
    }
  EXPECT_NEAR(box_fermi.real(), box_chart, 1e-10);
  EXPECT_NEAR(G.sqrt_g, std::sqrt(-det<double, 3>(g)) * std::abs(det<double, 3>(fr.jacobian(sy))), 1e-12);
}

TEST(Beams, ResidualDecaysWithLambda) {
  for (auto m : {flat(), hyperbolic()}) {
    auto st = beam_propagate<2>(frame_of(m, 0.5));
    ResidualGrid rg;
    rg.ns = 16;
    std::vector<double> lams{20, 40, 80, 160};
    auto rep = beam_residual<2>(m, ScalarField<3>::constant(0.0), st, lams, rg);
    std::vector<double> y;
    for (std::size_t i = 0; i < rep.size(); ++i) {
      y.push_back(rep[i].normalized);
      if (i) {
        EXPECT_LT(rep[i].normalized, rep[i - 1].normalized) << m.name;
      }
    }
    EXPECT_LE(loglog_slope(lams, y), -0.5) << m.name;
  }
}

TEST(Beams, ResidualScalesExactlyWithoutCutoff) {
  // a wide tube in flat space leaves only the cubic eikonal defect: normalized residual ~ lambda^{-1/2}
  Box<2> b;
  b.lo = {-1, -4, -4};
  b.hi = {1, 4, 4};
  auto m = catalog::minkowski<2>(b);
  ChartPoint<2> p{0, 0, 0};
  FermiOptions o;
  o.delta = 6.0;
  auto st = beam_propagate<2>(fermi_chart<2>(m, p, Vec<double, 3>{1, 1, 0}, o));
  ResidualGrid rg;
  rg.ns = 8;
  rg.points_per_width = 3;
  rg.geometry_points = 5;
  auto rep = beam_residual<2>(m, ScalarField<3>::constant(0.0), st, {80, 320}, rg);
  EXPECT_NEAR(rep[1].normalized / rep[0].normalized, 0.5, 1e-6);
}

TEST(Beams, ResidualRequiresResolution) {
  auto st = beam_propagate<2>(frame_of(flat()));
  ResidualGrid rg;
  rg.ny = 4;
  EXPECT_THROW(beam_residual<2>(flat(), ScalarField<3>::constant(0.0), st, {160}, rg), DomainError);
}

TEST(Beams, BoundaryDataSupportAndWidth) {
  // 1+1D: right-moving beam entering through x = 0
  Box<1> b;
  // the model chart extends past the boundary line so the tube crosses it whole
  b.lo = {-1.0, -0.5};
  b.hi = {1.0, 1.0};
  auto m = catalog::minkowski<1>(b);
  ChartPoint<1> p{0.5, 0.6};
  FermiOptions o;
  o.delta = 0.4;
  auto st = beam_propagate<1>(fermi_chart<1>(m, p, Vec<double, 2>{1.0, 1.0}, o));
  std::vector<ChartPoint<1>> sig;
  for (int k = 0; k <= 2000; ++k) sig.push_back({-1.0 + 2.0 * k / 2000, 0.0});
  TimeCutoff eta{0.5, 0.2};
  auto width = [&](double lam) {
    auto bd = beam_boundary_data<1>(st, lam, eta, sig);
    double w0 = 0, w1 = 0, w2 = 0;
    for (std::size_t i = 0; i < sig.size(); ++i) {
      double a = std::norm(bd.f[i]);
      w0 += a;
      w1 += a * sig[i][0];
      w2 += a * sig[i][0] * sig[i][0];
    }
    EXPECT_LT(bd.t_max, 0.5 - 0.2);
    return std::sqrt(w2 / w0 - (w1 / w0) * (w1 / w0));
  };
  EXPECT_NEAR(width(1000.0) / width(2000.0), std::sqrt(2.0), 1e-3);
  TimeCutoff off{-5.0, 0.1};
  auto bz = beam_boundary_data<1>(st, 100.0, off, sig);
  EXPECT_EQ(bz.nonzero, 0);
  TimeCutoff late{-0.05, 0.1};
  EXPECT_THROW(beam_boundary_data<1>(st, 100.0, late, sig), ConfigError);
}
