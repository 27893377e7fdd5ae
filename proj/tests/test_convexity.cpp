#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "lorcal/convexity.hpp"
#include "oracles.hpp"

using namespace lorcal;

namespace {

Box<2> hyp_box() {
  Box<2> b;
  b.lo = {-1.0, -0.5, -0.5};
  b.hi = {1.0, 0.5, 0.5};
  return b;
}

MetricModel<2> hyperbolic() { return catalog::ultrastatic<2>(-1.0, hyp_box()); }
MetricModel<2> flat() { return catalog::minkowski<2>(Box<2>::cube(1, 1)); }

/// r_p by log_map at displaced points, Richardson central differences.
Vec<double, 3> fd_grad_r(const MetricModel<2>& m, const ChartPoint<2>& p, const ChartPoint<2>& q, double h = 1e-3) {
  Vec<double, 3> g;
  for (int k = 0; k < 3; ++k) {
    auto d = [&](double s) {
      auto a = q, b = q;
      a[k] += s;
      b[k] -= s;
      return (distance_rp<2>(m, p, a) - distance_rp<2>(m, p, b)) / (2 * s);
    };
    g[k] = (4 * d(h / 2) - d(h)) / 3;
  }
  return g;
}

}  // namespace

TEST(Psi, Branches) {
  EXPECT_EQ(psi_value(0.0, 0.7), 1.0);
  EXPECT_NEAR(psi_value(-1.0, 1.0), 1.3130352855, 1e-10);
  EXPECT_NEAR(psi_value(1.0, std::numbers::pi / 4), std::numbers::pi / 4, 1e-12);
  for (double r : {0.1, 0.5, 1.0}) {
    EXPECT_NEAR(psi_value(1e-8, r), 1.0, 1e-8);
    EXPECT_NEAR(psi_value(-1e-8, r), 1.0, 1e-8);
  }
  EXPECT_GT(psi_value(2.0, 1.0), 0.0);
}

TEST(Psi, DomainErrors) {
  EXPECT_THROW(psi_value(1.0, 2.0), DomainError);
  EXPECT_THROW(psi_value(-1.0, 0.0), DomainError);
}

TEST(HessianScalar, FlatQuadraticIsTheMetric) {
  auto m = flat();
  auto f = ScalarField<3>::make([](const auto& x) { return 0.5 * (-x[0] * x[0] + x[1] * x[1] + x[2] * x[2]); });
  auto H = hessian_scalar<2>(m, f, {0.2, 0.1, -0.3});
  auto g = m.metric({0.2, 0.1, -0.3});
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(H.form[i][j], g[i][j], 1e-14);
}

TEST(HessianScalar, ConstantFieldIsZero) {
  auto H = hessian_scalar<2>(hyperbolic(), ScalarField<3>::constant(3.0), {0.0, 0.1, 0.2});
  for (auto& row : H.form)
    for (double x : row) EXPECT_EQ(x, 0.0);
}

TEST(HessianScalar, FiniteDifferenceFallbackAgrees) {
  auto m = hyperbolic();
  auto lam = [](const auto& x) { return sin(x[0]) * x[1] + exp(x[2]) * x[1] * x[1]; };
  auto fa = ScalarField<3>::make(lam);
  auto fb = ScalarField<3>::make(lam, 0, "fd");
  ChartPoint<2> q{0.1, 0.2, -0.1};
  auto A = hessian_scalar<2>(m, fa, q), B = hessian_scalar<2>(m, fb, q);
  EXPECT_FALSE(A.fd_fallback);
  EXPECT_TRUE(B.fd_fallback);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(A.form[i][j], B.form[i][j], 1e-6);
}

TEST(DistanceJet, FlatClosedForm) {
  auto m = flat();
  ChartPoint<2> p{0.1, -0.2, 0.0}, q{0.3, 0.4, 0.3};
  auto lr = log_map<2>(m, p, q);
  auto J = distance_jet<2>(m, p, q, lr);
  Vec<double, 3> d{q[0] - p[0], q[1] - p[1], q[2] - p[2]};
  double r = std::sqrt(-d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
  EXPECT_NEAR(J.r, r, 1e-13);
  Vec<double, 3> dr{-d[0] / r, d[1] / r, d[2] / r};
  auto g = m.metric(q);
  for (int i = 0; i < 3; ++i) {
    EXPECT_NEAR(J.dr[i], dr[i], 1e-12);
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(J.hess[i][k], (g[i][k] - dr[i] * dr[k]) / r, 1e-11);
  }
}

TEST(DistanceJet, GradientMatchesFiniteDifferenceOracle) {
  auto m = hyperbolic();
  ChartPoint<2> p{0.0, -0.1, 0.05};
  for (ChartPoint<2> q : {ChartPoint<2>{0.1, 0.3, -0.2}, ChartPoint<2>{-0.2, -0.4, 0.35}}) {
    auto J = distance_jet<2>(m, p, q, log_map<2>(m, p, q));
    auto fd = fd_grad_r(m, p, q);
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(J.dr[k], fd[k], 1e-7);
  }
}

TEST(DistanceJet, HessianMatchesFiniteDifferenceOracle) {
  auto m = hyperbolic();
  ChartPoint<2> p{0.0, -0.1, 0.05}, q{0.1, 0.3, -0.2};
  auto J = distance_jet<2>(m, p, q, log_map<2>(m, p, q));
  // Hess r = d(dr) - Gamma dr with d(dr) from differencing the gradient oracle
  auto G = christoffel<2>(m, q);
  auto gq = fd_grad_r(m, p, q);
  double h = 1e-3;
  for (int k = 0; k < 3; ++k) {
    auto a = q, b = q;
    a[k] += h;
    b[k] -= h;
    auto ga = fd_grad_r(m, p, a), gb = fd_grad_r(m, p, b);
    for (int i = 0; i < 3; ++i) {
      double s = (ga[i] - gb[i]) / (2 * h);
      for (int c = 0; c < 3; ++c) s -= G[c][i][k] * gq[c];
      EXPECT_NEAR(J.hess[i][k], s, 5e-5 * std::max(1.0, std::abs(s)));
    }
  }
}

TEST(Convexity, MinkowskiEqualityCase) {
  auto rep = hessian_comparison_check<2>(flat(), {0, 0, 0}, 0.0, 300, 1);
  EXPECT_LE(rep.max_abs_margin, 1e-8);
  EXPECT_TRUE(rep.pass);
  EXPECT_EQ(static_cast<int>(rep.records.size()), 300);
}

TEST(Convexity, HyperbolicAdmissibleK) {
  auto m = hyperbolic();
  for (double K : {-1.0, -0.5, 0.0}) {
    auto rep = hessian_comparison_check<2>(m, {0, 0, 0}, K, 150, 2);
    EXPECT_TRUE(rep.pass) << K << " " << rep.worst_scaled;
  }
}

TEST(Convexity, DiscriminatesTooLargeK) {
  auto rep = hessian_comparison_check<2>(hyperbolic(), {0, 0, 0}, 0.5, 300, 3);
  EXPECT_FALSE(rep.pass);
  EXPECT_LT(rep.worst_margin, -1e-3);
}

TEST(Convexity, RadialDirectionGivesZeroBothSides) {
  auto m = hyperbolic();
  ChartPoint<2> p{0, 0, 0}, q{0.1, 0.3, 0.1};
  auto J = distance_jet<2>(m, p, q, log_map<2>(m, p, q));
  auto gi = inverse<double, 3>(m.metric(q));
  auto X = matvec<double, 3>(gi, J.dr_gauss);
  EXPECT_NEAR((quad<double, 3>(J.hess, X, X)), 0.0, 1e-9);
  double xr = 0;
  for (int i = 0; i < 3; ++i) xr += X[i] * J.dr_gauss[i];
  EXPECT_NEAR((quad<double, 3>(m.metric(q), X, X)) - xr * xr, 0.0, 1e-10);
}

TEST(Convexity, Deterministic) {
  auto a = hessian_comparison_check<2>(hyperbolic(), {0, 0, 0}, -1.0, 40, 9);
  auto b = hessian_comparison_check<2>(hyperbolic(), {0, 0, 0}, -1.0, 40, 9);
  EXPECT_EQ(a.worst_margin, b.worst_margin);
  EXPECT_EQ(a.records.back().q, b.records.back().q);
}

TEST(Radial, ResidualsSmall) {
  auto f = radial_checks<2>(flat(), {0, 0, 0}, 100, 4);
  EXPECT_LE(f.max_eikonal, 1e-10);
  EXPECT_LE(f.max_radial, 1e-10);
  auto h = radial_checks<2>(hyperbolic(), {0, 0, 0}, 100, 4);
  EXPECT_LE(h.max_eikonal, 1e-6);
  EXPECT_LE(h.max_radial, 1e-6);
  EXPECT_GT(h.n_causal + h.n_near_cone, 0);
}
