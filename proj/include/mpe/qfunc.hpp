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

#include <cmath>
#include <numbers>

namespace mpe {

// Gaussian tail probability Q(x) = P(N(0,1) > x), via Q(x) = erfc(x/sqrt2)/2.
inline double q_function(double x) { return 0.5 * std::erfc(x * std::numbers::sqrt2 / 2.0); }

// Standard normal density; Q'(x) = -normal_pdf(x).
inline double normal_pdf(double x) {
  constexpr double inv_sqrt_2pi = 0.3989422804014326779399460599343818684758586311649;
  return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

inline double q_derivative(double x) { return -normal_pdf(x); }

}  // namespace mpe
