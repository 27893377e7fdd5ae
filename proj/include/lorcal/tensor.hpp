/** @file tensor.hpp
 *  @brief Fixed-size arrays for metric components over arbitrary scalar types.
 */
#pragma once

#include <array>
#include <stdexcept>

namespace lorcal {

template <class S, int D>
using Vec = std::array<S, D>;
template <class S, int D>
using Mat = std::array<std::array<S, D>, D>;
template <class S, int D>
using Rank3 = std::array<Mat<S, D>, D>;
template <class S, int D>
using Rank4 = std::array<Rank3<S, D>, D>;

template <class S, int D>
Mat<S, D> zero_mat() {
  Mat<S, D> m;
  for (auto& row : m)
    for (auto& x : row) x = S(0.0);
  return m;
}

template <class S, int D>
Vec<S, D> zero_vec() {
  Vec<S, D> v;
  for (auto& x : v) x = S(0.0);
  return v;
}

template <class S, int D>
S det(const Mat<S, D>& m) {
  if constexpr (D == 1) {
    return m[0][0];
  } else if constexpr (D == 2) {
    return m[0][0] * m[1][1] - m[0][1] * m[1][0];
  } else if constexpr (D == 3) {
    return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
           m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
  } else {
    static_assert(D <= 3, "dimension above 3 not supported");
  }
}

template <class S, int D>
Mat<S, D> inverse(const Mat<S, D>& m) {
  Mat<S, D> r;
  S dt = det<S, D>(m);
  S inv = S(1.0) / dt;
  if constexpr (D == 1) {
    r[0][0] = inv;
  } else if constexpr (D == 2) {
    r[0][0] = m[1][1] * inv;
    r[1][1] = m[0][0] * inv;
    r[0][1] = -m[0][1] * inv;
    r[1][0] = -m[1][0] * inv;
  } else {
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        int i1 = (j + 1) % 3, i2 = (j + 2) % 3, j1 = (i + 1) % 3, j2 = (i + 2) % 3;
        r[i][j] = (m[i1][j1] * m[i2][j2] - m[i1][j2] * m[i2][j1]) * inv;
      }
  }
  return r;
}

template <class S, int D>
S quad(const Mat<S, D>& g, const Vec<S, D>& x, const Vec<S, D>& y) {
  S s(0.0);
  for (int i = 0; i < D; ++i)
    for (int j = 0; j < D; ++j) s = s + g[i][j] * x[i] * y[j];
  return s;
}

template <class S, int D>
Vec<S, D> matvec(const Mat<S, D>& g, const Vec<S, D>& x) {
  Vec<S, D> r;
  for (int i = 0; i < D; ++i) {
    r[i] = S(0.0);
    for (int j = 0; j < D; ++j) r[i] = r[i] + g[i][j] * x[j];
  }
  return r;
}

}  // namespace lorcal
