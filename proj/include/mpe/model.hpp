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

// Domain model of the BPSK MISO broadcast link: channels, symbol
// enumeration, noiseless receiver output and hard decisions.

#include "mpe/rng.hpp"
#include "mpe/types.hpp"

#include <cmath>
#include <cstdint>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace mpe {

inline constexpr int kMaxUsers = 12;  // N_b = 4096

// K_T channel rows h_j, each 1 x M.
class ChannelSet {
 public:
  ChannelSet() = default;

  explicit ChannelSet(ComplexMat rows) : h_(std::move(rows)) {
    if (h_.rows() < 1 || h_.cols() < 1) throw DimensionError("ChannelSet: need K_T >= 1 and M >= 1");
    if (!h_.allFinite()) throw DimensionError("ChannelSet: non-finite entry");
    norm2_ = h_.rowwise().squaredNorm();
  }

  Index users() const { return h_.rows(); }
  Index antennas() const { return h_.cols(); }

  auto row(Index j) const { return h_.row(j); }
  double norm2(Index j) const { return norm2_[j]; }
  const RealVec& norms2() const { return norm2_; }
  const ComplexMat& matrix() const { return h_; }

  ChannelSet subset(std::span<const Index> idx) const {
    ComplexMat s(static_cast<Index>(idx.size()), antennas());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      if (idx[i] < 0 || idx[i] >= users()) throw DimensionError("ChannelSet::subset: index out of range");
      s.row(static_cast<Index>(i)) = h_.row(idx[i]);
    }
    return ChannelSet(std::move(s));
  }

  bool operator==(const ChannelSet& o) const { return h_ == o.h_; }

 private:
  ComplexMat h_;
  RealVec norm2_;
};

// All 2^K BPSK sign tuples in binary-counting order: bit j of b selects
// user j's symbol (0 -> -1, 1 -> +1). Row N_b-1-b is the negation of row b.
class SymbolBook {
 public:
  explicit SymbolBook(int users) : k_(users) {
    if (users < 1) throw CapacityError("SymbolBook: K must be >= 1");
    if (users > kMaxUsers)
      throw CapacityError("SymbolBook: K = " + std::to_string(users) + " exceeds K_max = " +
                          std::to_string(kMaxUsers));
    const Index nb = Index{1} << users;
    s_.resize(nb, users);
    for (Index b = 0; b < nb; ++b)
      for (int j = 0; j < users; ++j) s_(b, j) = ((b >> j) & 1) ? 1.0 : -1.0;
  }

  int users() const { return k_; }
  Index size() const { return s_.rows(); }           // N_b
  Index half_size() const { return s_.rows() / 2; }  // N_pb
  double sign(Index b, Index j) const { return s_(b, j); }
  auto row(Index b) const { return s_.row(b); }
  Index negation(Index b) const { return size() - 1 - b; }
  const RealMat& table() const { return s_; }

 private:
  int k_;
  RealMat s_;
};

struct SystemConfig {
  int M = 1;
  int K = 1;
  double sigma_z2 = 1.0;
  double tau = 1.0;
  std::vector<double> weights;  // empty means all ones

  double weight(Index j) const { return weights.empty() ? 1.0 : weights[static_cast<std::size_t>(j)]; }

  void validate() const {
    if (M < 1) throw ConfigError("SystemConfig: M must be >= 1");
    if (K < 1) throw ConfigError("SystemConfig: K must be >= 1");
    if (K > kMaxUsers) throw CapacityError("SystemConfig: K exceeds K_max");
    if (!(sigma_z2 > 0.0) || !std::isfinite(sigma_z2)) throw ConfigError("SystemConfig: sigma_z2 must be > 0");
    if (!(tau > 0.0) || !std::isfinite(tau)) throw ConfigError("SystemConfig: tau must be > 0");
    if (!weights.empty()) {
      if (static_cast<int>(weights.size()) != K) throw ConfigError("SystemConfig: need one weight per user");
      for (double a : weights)
        if (!(a > 0.0)) throw ConfigError("SystemConfig: weights must be > 0");
    }
  }
};

struct ReceiveFilters {
  ComplexVec w;
  Index size() const { return w.size(); }
  cd operator[](Index j) const { return w[j]; }
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

// I.i.d. CSCG entries with unit variance (1/2 per real component).
inline ChannelSet generate_channels(std::uint64_t seed, Index users, Index antennas) {
  Rng rng(seed);
  return ChannelSet(cscg_matrix(rng, users, antennas));
}

inline ChannelSet generate_channels(Rng& rng, Index users, Index antennas) {
  return ChannelSet(cscg_matrix(rng, users, antennas));
}

inline SymbolBook enumerate_symbols(int users) { return SymbolBook(users); }

// Noiseless receiver output w_j * h_j * U * s_b.
inline cd receiver_output(const ComplexRow& h, const ComplexMat& U, const RealVec& s, cd w) {
  require_dims(h.size() == U.rows(), "receiver_output: h and U disagree on M");
  require_dims(s.size() == U.cols(), "receiver_output: s and U disagree on K");
  return w * (h * U * s.cast<cd>())(0);
}

// sign(y) with the tie rule sign(0) = +1.
inline int detect(double y_real) { return y_real < 0.0 ? -1 : +1; }

// ---------------------------------------------------------------------------
// CSV import/export: user_index,antenna_index,re,im (0-based indices)
// ---------------------------------------------------------------------------

namespace detail {

inline void write_complex_csv(std::ostream& os, const ComplexMat& by_user) {
  os << "user_index,antenna_index,re,im\n";
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (Index j = 0; j < by_user.rows(); ++j)
    for (Index m = 0; m < by_user.cols(); ++m)
      os << j << ',' << m << ',' << by_user(j, m).real() << ',' << by_user(j, m).imag() << '\n';
}

inline ComplexMat read_complex_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw ConfigError("complex CSV: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "user_index,antenna_index,re,im")
    throw ConfigError("complex CSV: header must be 'user_index,antenna_index,re,im'");
  std::map<std::pair<Index, Index>, cd> entries;
  Index max_j = -1, max_m = -1;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string f[4];
    for (int i = 0; i < 4; ++i)
      if (!std::getline(ls, f[i], ',')) throw ConfigError("complex CSV: line " + std::to_string(lineno) + " has < 4 fields");
    std::string extra;
    if (std::getline(ls, extra, ',')) throw ConfigError("complex CSV: line " + std::to_string(lineno) + " has > 4 fields");
    Index j = 0, m = 0;
    double re = 0, im = 0;
    try {
      j = std::stoll(f[0]);
      m = std::stoll(f[1]);
      re = std::stod(f[2]);
      im = std::stod(f[3]);
    } catch (const std::exception&) {
      throw ConfigError("complex CSV: malformed number on line " + std::to_string(lineno));
    }
    if (j < 0 || m < 0) throw ConfigError("complex CSV: negative index on line " + std::to_string(lineno));
    if (!entries.emplace(std::pair{j, m}, cd(re, im)).second)
      throw ConfigError("complex CSV: duplicate entry on line " + std::to_string(lineno));
    max_j = std::max(max_j, j);
    max_m = std::max(max_m, m);
  }
  if (max_j < 0) throw ConfigError("complex CSV: no data rows");
  if (static_cast<Index>(entries.size()) != (max_j + 1) * (max_m + 1))
    throw ConfigError("complex CSV: matrix is not fully populated");
  ComplexMat z(max_j + 1, max_m + 1);
  for (const auto& [key, v] : entries) z(key.first, key.second) = v;
  return z;
}

}  // namespace detail

inline void write_channels_csv(std::ostream& os, const ChannelSet& ch) { detail::write_complex_csv(os, ch.matrix()); }

inline ChannelSet read_channels_csv(std::istream& is) { return ChannelSet(detail::read_complex_csv(is)); }

// Precoder U (M x K) is stored by user: row j of the file block is column u_j.
inline void write_precoder_csv(std::ostream& os, const ComplexMat& U) {
  detail::write_complex_csv(os, U.transpose());
}

inline ComplexMat read_precoder_csv(std::istream& is) { return detail::read_complex_csv(is).transpose(); }

}  // namespace mpe
