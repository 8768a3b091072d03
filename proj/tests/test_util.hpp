// Copyright 2026 The mpe-bpsk Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "mpe/mpe.hpp"

#include <cmath>
#include <complex>
#include <functional>

namespace mpe::testing {

// Central differences of a scalar function in the real view.
inline RealVec numeric_gradient(const std::function<double(const RealVec&)>& f, const RealVec& x, double h = 1e-6) {
  RealVec g(x.size());
  for (Index i = 0; i < x.size(); ++i) {
    RealVec a = x, b = x;
    a[i] += h;
    b[i] -= h;
    g[i] = (f(a) - f(b)) / (2.0 * h);
  }
  return g;
}

inline double rel_err(const RealVec& a, const RealVec& b) {
  return (a - b).norm() / std::max(1e-300, std::max(a.norm(), b.norm()));
}

inline ChannelSet make_channels(std::initializer_list<std::initializer_list<cd>> rows) {
  ComplexMat h(static_cast<Index>(rows.size()), static_cast<Index>(rows.begin()->size()));
  Index r = 0;
  for (const auto& row : rows) {
    Index c = 0;
    for (cd v : row) h(r, c++) = v;
    ++r;
  }
  return ChannelSet(h);
}

// pe_user in long double, used where double-precision differences lose the
// gradient to roundoff.
inline long double pe_user_ld(Index j, long double p, long double q, const ComplexMat& U, const ChannelSet& ch, double sigma2,
                              FilterScaling scaling) {
  using ldc = std::complex<long double>;
  const Index k = U.cols();
  const ldc w(p, q);
  const long double denom = std::sqrt(static_cast<long double>(sigma2) / 2.0L) *
                            (scaling == FilterScaling::normalized ? std::abs(w) : 1.0L);
  long double acc = 0.0L;
  const long nb = 1L << k;
  for (long b = 0; b < nb; ++b) {
    ldc y = 0.0L;
    long double sj = 0.0L;
    for (Index l = 0; l < k; ++l) {
      const long double s = (b >> l) & 1 ? 1.0L : -1.0L;
      if (l == j) sj = s;
      ldc g = 0.0L;
      for (Index m = 0; m < U.rows(); ++m) g += ldc(ch.row(j)[m]) * ldc(U(m, l));
      y += g * s;
    }
    acc += 0.5L * std::erfc(sj * std::real(w * y) / denom / std::sqrt(2.0L));
  }
  return acc / static_cast<long double>(nb);
}

}  // namespace mpe::testing
