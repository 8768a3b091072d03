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

#include <Eigen/Dense>

#include <complex>
#include <stdexcept>
#include <string>

namespace mpe {

using cd = std::complex<double>;
using Index = Eigen::Index;

using ComplexVec = Eigen::VectorXcd;
using ComplexRow = Eigen::RowVectorXcd;
using ComplexMat = Eigen::MatrixXcd;
using RealVec = Eigen::VectorXd;
using RealMat = Eigen::MatrixXd;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Request exceeds a hard size limit (e.g. symbol enumeration beyond K_max).
class CapacityError : public Error {
 public:
  using Error::Error;
};

// A quantity that must be nonzero vanished (zero filter, zero beam gain,
// zero-norm channel, rank-deficient stack).
class DegenerateError : public Error {
 public:
  using Error::Error;
};

// No point satisfies the error-floor constraints.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline void require_dims(bool ok, const std::string& what) {
  if (!ok) throw DimensionError(what);
}

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
  return m.allFinite();
}

// ---------------------------------------------------------------------------
// Real views of complex data
//
// A complex matrix is flattened column-major with interleaved (re, im)
// pairs: entry (m, l) maps to slots 2*(l*rows + m) and 2*(l*rows + m) + 1.
// ---------------------------------------------------------------------------

inline RealVec to_real(const ComplexMat& z) {
  RealVec x(2 * z.size());
  const cd* p = z.data();
  for (Index i = 0; i < z.size(); ++i) {
    x[2 * i] = p[i].real();
    x[2 * i + 1] = p[i].imag();
  }
  return x;
}

inline ComplexMat from_real(const RealVec& x, Index rows, Index cols) {
  require_dims(x.size() == 2 * rows * cols, "from_real: size mismatch");
  ComplexMat z(rows, cols);
  cd* p = z.data();
  for (Index i = 0; i < rows * cols; ++i) p[i] = cd(x[2 * i], x[2 * i + 1]);
  return z;
}

inline Index real_slot(Index rows, Index m, Index l) { return 2 * (l * rows + m); }

}  // namespace mpe
