#include <gtest/gtest.h>

#include <cmath>

#include "lorcal/recovery.hpp"

using namespace lorcal;

namespace {

MetricModel<1> wide_flat() {
  Box<1> b;
  b.lo = {-4.0, -3.0};
  b.hi = {4.0, 5.0};
  return catalog::minkowski<1>(b);
}

GridSpec<1> rod(int cells) {
  auto g = GridSpec<1>::interval(-3.0, 3.0, 0.0, 2.0, cells, 0.9);
  g.ramp = 0.05;
  return g;
}

ProbeReport<1> series(double V, int cells, std::vector<double> lams) {
  auto m = wide_flat();
  ChartPoint<1> p{0.3, 1.5};
  PointSeriesOptions o;
  o.fermi.delta = 2.0;
  return point_value_series<1>(m, ScalarField<2>::constant(V), p, Vec<double, 2>{1.0, 1.0}, lams, rod(cells),
                               Vec<double, 2>{1.0, 0.0}, o);
}

MetricModel<1> strip() {
  Box<1> b;
  b.lo = {-3.0, -2.5};
  b.hi = {3.0, 3.5};
  return catalog::minkowski<1>(b);
}

GridSpec<1> unit_grid(int cells) {
  auto g = GridSpec<1>::interval(-1.6, 1.6, 0.0, 1.0, cells, 0.5);
  g.ramp = 0.05;
  return g;
}

std::vector<BoundaryFn<cplx, 1>> dictionary(const MetricModel<1>& m) {
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

}  // namespace

TEST(Recovery, RejectsBadLambdaLists) {
  auto m = wide_flat();
  ChartPoint<1> p{0.3, 1.5};
  Vec<double, 2> xi{1.0, 1.0}, w{1.0, 0.0};
  auto V = ScalarField<2>::constant(0.0);
  EXPECT_THROW(point_value_series<1>(m, V, p, xi, {10, 20, 40}, rod(400), w), ConfigError);
  EXPECT_THROW(point_value_series<1>(m, V, p, xi, {10, 40, 20, 80}, rod(400), w), ConfigError);
  EXPECT_THROW(point_value_series<1>(m, V, {0.3, 2.5}, xi, {10, 20, 40, 80}, rod(400), w), DomainError);
}

TEST(Recovery, UnderResolvedLambdaIsTruncated) {
  auto rep = series(0.0, 200, {5, 10, 20, 200});
  EXPECT_EQ(rep.lambdas.size(), 3u);
  EXPECT_FALSE(rep.warnings.empty());
}

TEST(Recovery, FreeBeamIsReproducedAtP) {
  // with V = 0 in 1+1D the beam solves the equation exactly; only discretization remains
  auto rep = series(0.0, 1000, {10, 20, 40, 80});
  ASSERT_EQ(rep.lambdas.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_LE(rep.deviation[i], 1e-3) << rep.lambdas[i];
    EXPECT_LE(rep.grad_rel_error[i], 1e-3);
  }
  EXPECT_NEAR(rep.w_dot_xi, -1.0, 1e-14);
}

TEST(Recovery, PotentialShiftsPhaseLikeDispersion) {
  // a unit-amplitude wave entering at x = 0 with frequency lambda has wavenumber sqrt(lambda^2 - V),
  // so u(p) = exp(-i V x_p / (2 lambda)) to leading order
  auto rep = series(1.0, 1000, {10, 20, 40, 80});
  ASSERT_EQ(rep.lambdas.size(), 4u);
  for (std::size_t i = 1; i < 4; ++i) EXPECT_LT(rep.deviation[i], rep.deviation[i - 1]);
  EXPECT_LE(rep.exponent, -0.8);
  EXPECT_NEAR(rep.deviation[3] * 80.0, 0.75, 0.05);
  EXPECT_NEAR(rep.values[3].imag() * 80.0, -0.75, 0.05);
  EXPECT_LE(rep.grad_rel_error[3], 0.1);
}

TEST(Recovery, RecoverySetClosedForm) {
  auto g = unit_grid(100);
  EXPECT_TRUE(in_recovery_set_flat<1>(g, {0.0, 0.5}));
  EXPECT_FALSE(in_recovery_set_flat<1>(g, {-1.2, 0.5}));
  EXPECT_FALSE(in_recovery_set_flat<1>(g, {1.2, 0.5}));
  EXPECT_FALSE(in_recovery_set_flat<1>(g, {0.0, 1.0}));
}

TEST(Recovery, RatiosEqualOneForEqualPotentials) {
  auto m = strip();
  auto V = ScalarField<2>::make([](const auto& x) { return 1.0 + 0.5 * x[1]; });
  auto r = omega_ratio<1>(m, V, V, {0.0, 0.5}, dictionary(m), unit_grid(200));
  EXPECT_FALSE(r.inconclusive);
  EXPECT_GE(r.used, 5);
  EXPECT_EQ(r.spread, 0.0);
  EXPECT_EQ(r.mean, cplx(1.0));
}

TEST(Recovery, RatiosIgnoreBumpOutsideInfluence) {
  // the bump sits after t_p, so no entry can feel it at p
  auto m = strip();
  auto V = ScalarField<2>::constant(0.0);
  auto Vb = potential_bump<1>(1.0, {0.6, 0.5}, 0.2);
  auto r = omega_ratio<1>(m, V, Vb, {0.0, 0.5}, dictionary(m), unit_grid(200));
  EXPECT_FALSE(r.inconclusive);
  EXPECT_LE(r.spread, 1e-12);
  EXPECT_NEAR(std::abs(r.mean - 1.0), 0.0, 1e-12);
}

TEST(Recovery, RatiosInconclusiveWithoutSignal) {
  auto m = strip();
  std::vector<BoundaryFn<cplx, 1>> zero{[](const ChartPoint<1>&) { return cplx(0.0); }};
  auto r = omega_ratio<1>(m, ScalarField<2>::constant(0.0), ScalarField<2>::constant(1.0), {0.0, 0.5}, zero,
                          unit_grid(100));
  EXPECT_TRUE(r.inconclusive);
}

TEST(Recovery, DtnGapSeparatesPotentials) {
  auto m = strip();
  auto g = unit_grid(300);
  ChartPoint<1> c{0.0, 0.5};
  ASSERT_TRUE(in_recovery_set_flat<1>(g, c));
  auto V0 = ScalarField<2>::constant(0.0);
  auto dict = dictionary(m);
  auto same = dtn_gap_probe<1>(m, V0, V0, dict, g);
  EXPECT_EQ(same.gap, 0.0);
  EXPECT_LE(same.gap, same.error_bar);
  auto diff = dtn_gap_probe<1>(m, V0, potential_bump<1>(1.0, c, 0.3), dict, g);
  EXPECT_GE(diff.ratio, 10.0);
  // a larger dictionary never lowers the gap
  std::vector<BoundaryFn<cplx, 1>> sub(dict.begin(), dict.begin() + 2);
  auto part = dtn_gap_probe<1>(m, V0, potential_bump<1>(1.0, c, 0.3), sub, g);
  EXPECT_LE(part.gap, diff.gap);
}

TEST(Recovery, DtnGapLinearInSmallAmplitude) {
  auto m = strip();
  auto g = unit_grid(100);
  auto V0 = ScalarField<2>::constant(0.0);
  auto dict = dictionary(m);
  std::vector<double> amps{0.025, 0.05, 0.075, 0.1}, gaps;
  for (double a : amps) gaps.push_back(dtn_gap_probe<1>(m, V0, potential_bump<1>(a, {0.0, 0.5}, 0.3), dict, g).gap);
  EXPECT_GE(linear_r2(amps, gaps), 0.99);
  EXPECT_NEAR(gaps[3] / gaps[0], 4.0, 0.1);
}
