#pragma once

#include <random>

#include "qclimit/common.hpp"

namespace testing_support {

inline qclimit::CVector random_cvector(int n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  qclimit::CVector v(n);
  for (int i = 0; i < n; ++i) v[i] = {g(rng), g(rng)};
  return v;
}

inline qclimit::CMatrix random_cmatrix(int r, int c, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  qclimit::CMatrix m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = {g(rng), g(rng)};
  return m;
}

}  // namespace testing_support
