/** @file field.hpp
 *  @brief Type-erased scalar fields evaluable at every jet level up to 4.
 */
#pragma once

#include <functional>
#include <string>
#include <tuple>

#include "dual.hpp"
#include "errors.hpp"
#include "tensor.hpp"

namespace lorcal {

inline constexpr int kMaxJet = 4;

template <int D>
class ScalarField {
 public:
  template <int K>
  using Fn = std::function<Jet<K, D>(const Vec<Jet<K, D>, D>&)>;

  ScalarField() = default;

  /// Wrap a generic callable `f(const Vec<S,D>&) -> S`; orders above max_order are refused.
  template <class F>
  static ScalarField make(F f, int max_order = kMaxJet, std::string name = "field") {
    ScalarField s;
    s.max_order_ = max_order;
    s.name_ = std::move(name);
    s.fill<0>(f);
    return s;
  }

  static ScalarField constant(double c) {
    return make([c](const auto& x) { return decltype(x[0] * 1.0)(c); }, kMaxJet, "const");
  }

  template <int K>
  Jet<K, D> eval(const Vec<Jet<K, D>, D>& x) const {
    if (K > max_order_) throw CapabilityError(name_ + ": derivative order " + std::to_string(K) + " not supplied");
    return std::get<K>(fns_)(x);
  }

  double operator()(const Vec<double, D>& x) const { return eval<0>(x); }

  int max_order() const { return max_order_; }
  const std::string& name() const { return name_; }
  bool valid() const { return static_cast<bool>(std::get<0>(fns_)); }

 private:
  template <int K, class F>
  void fill(const F& f) {
    std::get<K>(fns_) = [f](const Vec<Jet<K, D>, D>& x) -> Jet<K, D> { return f(x); };
    if constexpr (K < kMaxJet) fill<K + 1>(f);
  }

  std::tuple<Fn<0>, Fn<1>, Fn<2>, Fn<3>, Fn<4>> fns_;
  int max_order_ = 0;
  std::string name_ = "field";
};

/// Lift each component one jet level, seeding fresh outermost derivatives.
template <int K, int D>
Vec<Jet<K + 1, D>, D> lift_point(const Vec<Jet<K, D>, D>& x) {
  Vec<Jet<K + 1, D>, D> r;
  for (int i = 0; i < D; ++i) {
    r[i].v = x[i];
    for (int j = 0; j < D; ++j) r[i].d[j] = Jet<K, D>(i == j ? 1.0 : 0.0);
  }
  return r;
}

/// Value, gradient and Hessian (coordinate partials) of a scalar field at a jet-level-K point.
template <int K, int D>
struct FieldJet2 {
  Jet<K, D> v;
  Vec<Jet<K, D>, D> g;
  Mat<Jet<K, D>, D> h;
};

template <int K, int D>
FieldJet2<K, D> field_jet2(const ScalarField<D>& f, const Vec<Jet<K, D>, D>& x) {
  auto x2 = lift_point<K + 1, D>(lift_point<K, D>(x));
  Jet<K + 2, D> y = f.template eval<K + 2>(x2);
  FieldJet2<K, D> r;
  r.v = y.v.v;
  for (int i = 0; i < D; ++i) {
    r.g[i] = y.d[i].v;
    for (int j = 0; j < D; ++j) r.h[i][j] = y.d[i].d[j];
  }
  return r;
}

template <int K, int D>
std::pair<Jet<K, D>, Vec<Jet<K, D>, D>> field_jet1(const ScalarField<D>& f, const Vec<Jet<K, D>, D>& x) {
  Jet<K + 1, D> y = f.template eval<K + 1>(lift_point<K, D>(x));
  Vec<Jet<K, D>, D> g;
  for (int i = 0; i < D; ++i) g[i] = y.d[i];
  return {y.v, g};
}

}  // namespace lorcal
