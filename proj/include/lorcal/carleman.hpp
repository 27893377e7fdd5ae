/** @file carleman.hpp
 *  @brief Carleman weight, the pointwise conjugation identity and sampled positivity bounds.
 */
#pragma once

#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "convexity.hpp"

namespace lorcal {

struct CarlemanConfig {
  double rho = 0.2;
  double eps = 0.01;
  double tau = 0;     ///< weight strength; positivity_check calibrates it as a_rho / eps
  double a_rho = 0;   ///< positivity constant
  double K = 0;       ///< curvature bound used in psi
  std::string sigma_rule = "sigma_tilde = -2 F'(r) psi / r";

  void validate() const {
    if (!(rho > 0)) throw ConfigError("carleman: rho must be positive");
    if (!(eps > 0 && eps < rho)) throw ConfigError("carleman: eps must lie in (0, rho)");
    if (!(tau > 1.0 / eps)) throw ConfigError("carleman: tau must exceed 1/eps");
  }
};

struct WeightValues {
  double l, dF, ddF;
};

/// F(r) = 4 log(r - rho) + tau (r - rho)^2 in any jet type.
template <class S>
S weight_F(const CarlemanConfig& c, const S& r) {
  S s = r - c.rho;
  return 4.0 * log(s) + c.tau * s * s;
}

inline WeightValues carleman_weight(const CarlemanConfig& c, double r) {
  if (!(r > c.rho)) throw DomainError("carleman_weight: r must exceed rho");
  double s = r - c.rho;
  WeightValues w{4 * std::log(s) + c.tau * s * s, 4 / s + 2 * c.tau * s, -4 / (s * s) + 2 * c.tau};
  if (s > 2 * std::sqrt(c.eps) && c.tau > 1.0 / c.eps && !(w.ddF > c.tau))
    throw NumericalError("carleman_weight: F'' <= tau on U");
  return w;
}

/// Metric data at a point in jet arithmetic.
template <class S, int D>
struct LocalGeometry {
  Mat<S, D> g, gi;
  Rank3<S, D> G;
  S sqrt_g;
};

template <int K, int N>
LocalGeometry<Jet<K, N + 1>, N + 1> local_geometry(const MetricModel<N>& m, const Vec<Jet<K, N + 1>, N + 1>& x) {
  constexpr int D = N + 1;
  LocalGeometry<Jet<K, D>, D> L;
  L.g = m.template metric<K>(x);
  L.gi = inverse<Jet<K, D>, D>(L.g);
  L.G = christoffel_at<K, N>(m, x);
  L.sqrt_g = sqrt(-det<Jet<K, D>, D>(L.g));
  return L;
}

/// Value, gradient covector and coordinate second partials of a scalar.
template <class S, int D>
struct Jet2 {
  S v;
  Vec<S, D> d;
  Mat<S, D> dd;
};

template <class S, int D>
Vec<S, D> raise(const LocalGeometry<S, D>& L, const Vec<S, D>& w) {
  return matvec<S, D>(L.gi, w);
}

template <class S, int D>
S inner_cov(const LocalGeometry<S, D>& L, const Vec<S, D>& a, const Vec<S, D>& b) {
  return quad<S, D>(L.gi, a, b);
}

/// Covariant Hessian components d_ij f - Gamma^m_ij d_m f.
template <class S, int D>
Mat<S, D> hess_cov(const LocalGeometry<S, D>& L, const Jet2<S, D>& f) {
  Mat<S, D> H;
  for (int i = 0; i < D; ++i)
    for (int j = 0; j < D; ++j) {
      S s = f.dd[i][j];
      for (int m = 0; m < D; ++m) s = s - L.G[m][i][j] * f.d[m];
      H[i][j] = s;
    }
  return H;
}

/// Wave operator -|g|^{-1/2} d_j(|g|^{1/2} g^jk d_k f) = -g^ij Hess_ij f.
template <class S, int D>
S box_of(const LocalGeometry<S, D>& L, const Jet2<S, D>& f) {
  auto H = hess_cov<S, D>(L, f);
  S s(0.0);
  for (int i = 0; i < D; ++i)
    for (int j = 0; j < D; ++j) s = s - L.gi[i][j] * H[i][j];
  return s;
}

/// Terms of the identity that need no further differentiation.
template <class S, int D>
struct CoreTerms {
  S S_, qpot, sigma, sigma_tilde, P, box_l, glv, R0;
  Vec<S, D> B;       ///< contravariant B
  Vec<S, D> boxl_gl; ///< (box l) grad l
};

/// R0 excludes div((box l) grad l) and box sigma, which need one more derivative.
template <class S, int D>
CoreTerms<S, D> carleman_core(const LocalGeometry<S, D>& L, const Jet2<S, D>& l, const Jet2<S, D>& s,
                              const Jet2<S, D>& v) {
  CoreTerms<S, D> T;
  T.box_l = box_of<S, D>(L, l);
  S gll = inner_cov<S, D>(L, l.d, l.d);
  S glv = inner_cov<S, D>(L, l.d, v.d);
  S gvv = inner_cov<S, D>(L, v.d, v.d);
  T.glv = glv;
  T.sigma = s.v;
  T.qpot = -gll - T.box_l - s.v;
  T.S_ = box_of<S, D>(L, v) + T.qpot * v.v;
  T.sigma_tilde = s.v + T.box_l;
  auto Hl = hess_cov<S, D>(L, l);
  auto gradl = raise<S, D>(L, l.d), gradv = raise<S, D>(L, v.d), grads = raise<S, D>(L, s.d);
  S hvv = quad<S, D>(Hl, gradv, gradv), hll = quad<S, D>(Hl, gradl, gradl);
  T.P = T.sigma_tilde * gvv + 2.0 * hvv + (-T.sigma_tilde * gll + 2.0 * hll) * v.v * v.v;
  T.R0 = (-s.v * T.sigma_tilde + 0.5 * s.v * s.v) * v.v * v.v;
  S a1 = -(2.0 * glv + s.v * v.v);
  S a2 = gvv - (T.box_l + gll) * v.v * v.v;
  for (int i = 0; i < D; ++i) {
    T.B[i] = a1 * gradv[i] + 0.5 * v.v * v.v * grads[i] + a2 * gradl[i];
    T.boxl_gl[i] = T.box_l * gradl[i];
  }
  return T;
}

template <int N>
struct CarlemanTerms {
  double S = 0, q_potential = 0, sigma = 0, sigma_tilde = 0, P = 0, R = 0;
  Vec<double, N + 1> B{};
  double divB = 0;
  double grad_l_grad_v = 0;
  double lhs = 0, rhs_sum = 0;

  double residual() const { return std::abs(lhs - rhs_sum); }
  double scale() const { return std::abs(lhs) + std::abs(rhs_sum) + 1.0; }
};

template <int K, int D>
Jet2<Jet<K, D>, D> to_jet2(const FieldJet2<K, D>& f) {
  return {f.v, f.g, f.h};
}

/**
 * All terms of the conjugation identity at q with analytic derivatives. Fields need order 3
 * (div B differentiates second derivatives once more); the left side is e^l box(e^{-l} v)
 * evaluated directly.
 */
template <int N>
CarlemanTerms<N> carleman_terms(const MetricModel<N>& m, const ScalarField<N + 1>& l, const ScalarField<N + 1>& sigma,
                                const ScalarField<N + 1>& v, const ChartPoint<N>& q) {
  constexpr int D = N + 1;
  using J1 = Jet<1, D>;
  m.require_in_domain(q);
  Vec<double, D> q0 = q;
  auto x1 = lift_point<0, D>(q0);
  auto L = local_geometry<1, N>(m, x1);
  auto jl = to_jet2<1, D>(field_jet2<1, D>(l, x1));
  auto js = to_jet2<1, D>(field_jet2<1, D>(sigma, x1));
  auto jv = to_jet2<1, D>(field_jet2<1, D>(v, x1));
  auto T = carleman_core<J1, D>(L, jl, js, jv);
  CarlemanTerms<N> out;
  out.S = T.S_.v;
  out.q_potential = T.qpot.v;
  out.sigma = T.sigma.v;
  out.sigma_tilde = T.sigma_tilde.v;
  out.P = T.P.v;
  out.grad_l_grad_v = T.glv.v;
  double divB = 0, divbl = 0;
  for (int i = 0; i < D; ++i) {
    out.B[i] = T.B[i].v;
    divB += (L.sqrt_g * T.B[i]).d[i];
    divbl += (L.sqrt_g * T.boxl_gl[i]).d[i];
  }
  out.divB = divB / L.sqrt_g.v;
  divbl /= L.sqrt_g.v;
  // box sigma at level 0 from the level-1 jets
  LocalGeometry<double, D> L0;
  Jet2<double, D> s0;
  for (int i = 0; i < D; ++i)
    for (int j = 0; j < D; ++j) {
      L0.g[i][j] = L.g[i][j].v;
      L0.gi[i][j] = L.gi[i][j].v;
      for (int k = 0; k < D; ++k) L0.G[i][j][k] = L.G[i][j][k].v;
      s0.dd[i][j] = js.dd[i][j].v;
    }
  for (int i = 0; i < D; ++i) s0.d[i] = js.d[i].v;
  s0.v = js.v.v;
  double box_s = box_of<double, D>(L0, s0);
  double vv = jv.v.v;
  out.R = T.R0.v + (divbl + 0.5 * box_s) * vv * vv;
  out.rhs_sum = 0.5 * out.S * out.S + 2 * out.grad_l_grad_v * out.grad_l_grad_v + out.P + out.R + out.divB;
  // direct left side
  auto w = ScalarField<D>::make(
      [l, v](const auto& x) {
        using S = std::decay_t<decltype(x[0])>;
        constexpr int K = jet_order<S>::value;
        return exp(-l.template eval<K>(x)) * v.template eval<K>(x);
      },
      kMaxJet - 1, "exp(-l) v");
  auto jw = field_jet2<0, D>(w, q0);
  double conj = std::exp(l(q0)) * box_of<double, D>(L0, Jet2<double, D>{jw.v, jw.g, jw.h});
  out.lhs = 0.5 * conj * conj;
  return out;
}

/// Second-order central-difference jets of a scalar from point values.
template <int D, class F>
Jet2<double, D> fd_jet2(const F& f, const Vec<double, D>& q, double h) {
  Jet2<double, D> J;
  J.v = f(q);
  auto at = [&](int i, double a, int k, double b) {
    auto x = q;
    x[i] += a;
    x[k] += b;
    return f(x);
  };
  for (int i = 0; i < D; ++i) {
    double fp = at(i, h, i, 0), fm = at(i, -h, i, 0);
    J.d[i] = (fp - fm) / (2 * h);
    J.dd[i][i] = (fp - 2 * J.v + fm) / (h * h);
    for (int k = 0; k < i; ++k) {
      J.dd[i][k] = (at(i, h, k, h) - at(i, h, k, -h) - at(i, -h, k, h) + at(i, -h, k, -h)) / (4 * h * h);
      J.dd[k][i] = J.dd[i][k];
    }
  }
  return J;
}

template <int N>
LocalGeometry<double, N + 1> fd_geometry(const MetricModel<N>& m, const ChartPoint<N>& q, double h) {
  constexpr int D = N + 1;
  LocalGeometry<double, D> L;
  L.g = m.metric(q);
  L.gi = inverse<double, D>(L.g);
  L.sqrt_g = std::sqrt(-det<double, D>(L.g));
  Rank3<double, D> dg;  // [k][i][j]
  for (int k = 0; k < D; ++k) {
    auto a = q, b = q;
    a[k] += h;
    b[k] -= h;
    auto ga = m.metric(a), gb = m.metric(b);
    for (int i = 0; i < D; ++i)
      for (int j = 0; j < D; ++j) dg[k][i][j] = (ga[i][j] - gb[i][j]) / (2 * h);
  }
  for (int i = 0; i < D; ++i)
    for (int j = 0; j < D; ++j)
      for (int k = 0; k < D; ++k) {
        double s = 0;
        for (int l = 0; l < D; ++l) s += 0.5 * L.gi[i][l] * (dg[j][l][k] + dg[k][l][j] - dg[l][j][k]);
        L.G[i][j][k] = s;
      }
  return L;
}

/// Same terms with every derivative (fields and metric) replaced by central differences of step h.
template <int N>
CarlemanTerms<N> carleman_terms_fd(const MetricModel<N>& m, const ScalarField<N + 1>& l,
                                   const ScalarField<N + 1>& sigma, const ScalarField<N + 1>& v,
                                   const ChartPoint<N>& q, double h) {
  constexpr int D = N + 1;
  m.require_in_domain(q);
  auto core_at = [&](const ChartPoint<N>& x) {
    auto L = fd_geometry<N>(m, x, h);
    auto T = carleman_core<double, D>(L, fd_jet2<D>(l, x, h), fd_jet2<D>(sigma, x, h), fd_jet2<D>(v, x, h));
    return std::make_pair(L, T);
  };
  auto [L, T] = core_at(q);
  CarlemanTerms<N> out;
  out.S = T.S_;
  out.q_potential = T.qpot;
  out.sigma = T.sigma;
  out.sigma_tilde = T.sigma_tilde;
  out.P = T.P;
  out.grad_l_grad_v = T.glv;
  out.B = T.B;
  double divB = 0, divbl = 0;
  for (int i = 0; i < D; ++i) {
    auto a = q, b = q;
    a[i] += h;
    b[i] -= h;
    auto [La, Ta] = core_at(a);
    auto [Lb, Tb] = core_at(b);
    divB += (La.sqrt_g * Ta.B[i] - Lb.sqrt_g * Tb.B[i]) / (2 * h);
    divbl += (La.sqrt_g * Ta.boxl_gl[i] - Lb.sqrt_g * Tb.boxl_gl[i]) / (2 * h);
  }
  out.divB = divB / L.sqrt_g;
  double vv = v(q);
  double box_s = box_of<double, D>(L, fd_jet2<D>(sigma, q, h));
  out.R = T.R0 + (divbl / L.sqrt_g + 0.5 * box_s) * vv * vv;
  out.rhs_sum = 0.5 * out.S * out.S + 2 * out.grad_l_grad_v * out.grad_l_grad_v + out.P + out.R + out.divB;
  auto w = [&](const Vec<double, D>& x) { return std::exp(-l(x)) * v(x); };
  double conj = std::exp(l(q)) * box_of<double, D>(L, fd_jet2<D>(w, q, h));
  out.lhs = 0.5 * conj * conj;
  return out;
}

/// Fields of the weight construction: r_p, l = F(r), sigma_tilde by the psi rule, sigma = sigma_tilde - box l.
template <int N>
struct WeightFields {
  ScalarField<N + 1> r, l, sigma_tilde, sigma;
};

template <int N>
WeightFields<N> weight_fields(const MetricModel<N>& m, const ScalarField<N + 1>& r, const CarlemanConfig& c) {
  constexpr int D = N + 1;
  WeightFields<N> W;
  W.r = r;
  W.l = ScalarField<D>::make(
      [r, c](const auto& x) {
        using S = std::decay_t<decltype(x[0])>;
        constexpr int K = jet_order<S>::value;
        return weight_F(c, r.template eval<K>(x));
      },
      kMaxJet, "l");
  W.sigma_tilde = ScalarField<D>::make(
      [r, c](const auto& x) {
        using S = std::decay_t<decltype(x[0])>;
        constexpr int K = jet_order<S>::value;
        S rr = r.template eval<K>(x);
        S s = rr - c.rho;
        S dF = 4.0 / s + 2.0 * c.tau * s;
        S psi;
        if (c.K == 0.0) {
          psi = S(1.0);
        } else {
          S a = std::sqrt(std::abs(c.K)) * rr;
          psi = c.K > 0 ? a / tan(a) : a / tanh(a);
        }
        return -2.0 * dF * psi / rr;
      },
      kMaxJet, "sigma_tilde");
  const MetricModel<N>* mp = &m;
  auto l = W.l;
  auto st = W.sigma_tilde;
  // box l at jet level K needs l at K+2 and the metric at K+1, so sigma supplies order kMaxJet - 2
  W.sigma = ScalarField<D>::make(
      [mp, l, st](const auto& x) {
        using S = std::decay_t<decltype(x[0])>;
        constexpr int K = jet_order<S>::value;
        if constexpr (K + 2 > kMaxJet) {
          throw CapabilityError("sigma: order not supplied");
          return S(0.0);
        } else {
          auto L = local_geometry<K, N>(*mp, x);
          auto jl = to_jet2<K, D>(field_jet2<K, D>(l, x));
          return st.template eval<K>(x) - box_of<S, D>(L, jl);
        }
      },
      kMaxJet - 2, "sigma");
  return W;
}

/// Terms needed by the positivity bounds from (l, sigma) jets and a pointwise v-jet (v, dv).
template <int N>
struct PositivityTerms {
  double r, lambda, P, glv, R, R_hat;  ///< R_hat = R / v^2
  double hll, dF, ddF;
};

template <int N>
PositivityTerms<N> positivity_terms(const MetricModel<N>& m, const WeightFields<N>& W, const CarlemanConfig& c,
                                    const ChartPoint<N>& q, double v, const Vec<double, N + 1>& dv) {
  constexpr int D = N + 1;
  using J1 = Jet<1, D>;
  Vec<double, D> q0 = q;
  auto x1 = lift_point<0, D>(q0);
  auto L = local_geometry<1, N>(m, x1);
  auto jl = to_jet2<1, D>(field_jet2<1, D>(W.l, x1));
  Jet2<J1, D> js;
  {
    auto s1 = field_jet1<1, D>(W.sigma, x1);
    js.v = s1.first;
    js.d = s1.second;
    for (auto& row : js.dd)
      for (auto& e : row) e = J1(0.0);
  }
  Jet2<J1, D> jv;
  jv.v = J1(v);
  for (int i = 0; i < D; ++i) {
    jv.d[i] = J1(dv[i]);
    for (int j = 0; j < D; ++j) jv.dd[i][j] = J1(0.0);
  }
  auto T = carleman_core<J1, D>(L, jl, js, jv);
  double divbl = 0;
  for (int i = 0; i < D; ++i) divbl += (L.sqrt_g * T.boxl_gl[i]).d[i];
  divbl /= L.sqrt_g.v;
  auto s2 = field_jet2<0, D>(W.sigma, q0);
  LocalGeometry<double, D> L0;
  for (int i = 0; i < D; ++i)
    for (int j = 0; j < D; ++j) {
      L0.g[i][j] = L.g[i][j].v;
      L0.gi[i][j] = L.gi[i][j].v;
      for (int k = 0; k < D; ++k) L0.G[i][j][k] = L.G[i][j][k].v;
    }
  double box_s = box_of<double, D>(L0, Jet2<double, D>{s2.v, s2.g, s2.h});
  PositivityTerms<N> P;
  P.r = W.r(q0);
  auto wv = carleman_weight(c, P.r);
  P.dF = wv.dF;
  P.ddF = wv.ddF;
  double s = P.r - c.rho;
  P.lambda = c.tau + 1.0 / (s * s);
  P.P = T.P.v;
  P.glv = T.glv.v;
  P.R_hat = (-T.sigma.v * T.sigma_tilde.v + 0.5 * T.sigma.v * T.sigma.v) + divbl + 0.5 * box_s;
  P.R = P.R_hat * v * v;
  auto Hl = hess_cov<J1, D>(L, jl);
  auto gl = raise<J1, D>(L, jl.d);
  P.hll = value(quad<J1, D>(Hl, gl, gl));
  return P;
}

template <int N>
struct PositivityReport {
  CarlemanConfig config;
  double V_inf = 0;
  double c_hat = 0;
  int n_samples = 0, n_calibration = 0;
  unsigned long long seed = 0;
  double worst_key1 = std::numeric_limits<double>::infinity();      ///< min scaled margin of the first bound
  double worst_combined = std::numeric_limits<double>::infinity();  ///< min scaled margin of the combined bound
  bool pass_key1 = true, pass_combined = true;
  int n_rejected = 0;
  struct Record {
    ChartPoint<N> q;
    double v;
    double lhs1, rhs1, lhs2, rhs2;
  };
  std::vector<Record> records;
  std::optional<Record> violating;
  std::string note = "hypotheses sampled, not proven";
};

constexpr double kPositivityTol = 1e-9;

/**
 * Calibrates c_hat = sup |R| / (lambda^2 v^2) on a calibration sample (iterating tau = a_rho / eps
 * to a fixed point), then checks P + 2<grad l, grad v>^2 >= 2 tau (r-rho)^2 lambda^2 v^2 and
 * P + 2<grad l, grad v>^2 + R >= 2 a_rho v^2 on fresh samples of (q, v, dv).
 */
template <int N>
PositivityReport<N> positivity_check(const MetricModel<N>& m, const ChartPoint<N>& p, CarlemanConfig cfg,
                                     double V_inf, int n_samples, unsigned long long seed,
                                     std::optional<Box<N>> region = std::nullopt) {
  constexpr int D = N + 1;
  auto rfield = analytic_distance<N>(m, p);
  if (!rfield) throw CapabilityError("positivity_check: no analytic r_p supplier for model " + m.descriptor);
  if (!(cfg.rho > 0 && cfg.eps > 0 && cfg.eps < cfg.rho)) throw ConfigError("carleman: need 0 < eps < rho");
  const Box<N> box = region.value_or(m.domain);
  std::mt19937_64 rng(seed);
  PositivityReport<N> rep;
  rep.V_inf = V_inf;
  rep.n_samples = n_samples;
  rep.seed = seed;
  const double r_min = cfg.rho + 2 * std::sqrt(cfg.eps);
  auto draw_q = [&]() {
    for (int k = 0; k < 100000; ++k) {
      ChartPoint<N> q = sample_box<N>(box, rng);
      double r = (*rfield)(q);
      if (std::isfinite(r) && r > r_min) return q;
      ++rep.n_rejected;
    }
    throw ConfigError("positivity_check: U = {r_p > rho + 2 sqrt(eps)} is empty in the sampled region");
  };
  auto draw_v = [&](double& v, Vec<double, D>& dv) {
    dv = sample_sphere<D>(rng);
    double w = std::uniform_real_distribution<double>(-1, 1)(rng);
    int k = std::uniform_int_distribution<int>(0, 8)(rng);
    v = w * std::pow(10.0, -k);
  };
  // calibration points
  rep.n_calibration = std::min(n_samples, 500);
  std::vector<ChartPoint<N>> cal;
  for (int k = 0; k < rep.n_calibration; ++k) cal.push_back(draw_q());
  double a = std::max(V_inf * V_inf, 1.01);
  cfg.tau = a / cfg.eps;
  Vec<double, D> zero{};
  for (int it = 0; it < 30; ++it) {
    auto W = weight_fields<N>(m, *rfield, cfg);
    double c_hat = 0;
    for (auto& q : cal) {
      auto T = positivity_terms<N>(m, W, cfg, q, 1.0, zero);
      c_hat = std::max(c_hat, std::abs(T.R_hat) / (T.lambda * T.lambda));
    }
    rep.c_hat = c_hat;
    double a_new = std::max({V_inf * V_inf, c_hat, 1.01});
    bool done = std::abs(a_new - a) <= 1e-6 * a;
    a = a_new;
    cfg.tau = a / cfg.eps;
    if (done) break;
  }
  cfg.a_rho = a;
  cfg.validate();
  rep.config = cfg;
  auto W = weight_fields<N>(m, *rfield, cfg);
  for (int k = 0; k < n_samples; ++k) {
    ChartPoint<N> q = draw_q();
    double v;
    Vec<double, D> dv;
    draw_v(v, dv);
    auto T = positivity_terms<N>(m, W, cfg, q, v, dv);
    double s = T.r - cfg.rho;
    double lhs1 = T.P + 2 * T.glv * T.glv;
    double rhs1 = 2 * cfg.tau * s * s * T.lambda * T.lambda * v * v;
    double lhs2 = lhs1 + T.R;
    double rhs2 = 2 * cfg.a_rho * v * v;
    double sc1 = std::abs(lhs1) + std::abs(rhs1) + 1e-300;
    double sc2 = std::abs(lhs2) + std::abs(rhs2) + 1e-300;
    double m1 = (lhs1 - rhs1) / sc1, m2 = (lhs2 - rhs2) / sc2;
    typename PositivityReport<N>::Record rec{q, v, lhs1, rhs1, lhs2, rhs2};
    rep.records.push_back(rec);
    if (m1 < rep.worst_key1) rep.worst_key1 = m1;
    if (m2 < rep.worst_combined) rep.worst_combined = m2;
    if ((m1 < -kPositivityTol || m2 < -kPositivityTol) && !rep.violating) rep.violating = rec;
  }
  rep.pass_key1 = rep.worst_key1 >= -kPositivityTol;
  rep.pass_combined = rep.worst_combined >= -kPositivityTol;
  return rep;
}

}  // namespace lorcal
