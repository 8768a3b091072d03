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

// Exact BPSK error probabilities of a linearly precoded broadcast link and
// their gradients.
//
// For user j with filter w_j the decision statistic for symbol row s_b has
// mean Re{w_j h_j U s_b} and noise standard deviation (sigma_z/sqrt2)|w_j|,
// so
//
//   Pe_j = 1/N_b * sum_b Q( s_bj Re{w_j h_j U s_b} / ((sigma_z/sqrt2)|w_j|) ).
//
// Every sum below runs over b in ascending order so results are bit-stable.
// Gradients treat each complex unknown as a (re, im) pair; all Q arguments
// are real-linear in U and in w (up to the 1/|w| factor), so the gradients
// are exact finite sums.

#include "mpe/model.hpp"
#include "mpe/qfunc.hpp"
#include "mpe/types.hpp"

#include <cmath>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

namespace mpe {

// normalized: Q argument divided by |w_j| (the probability itself).
// unit:       |w_j| assumed to be 1 and not divided out; this is the
//             objective form used inside the joint Tx-Rx solver.
enum class FilterScaling { normalized, unit };

struct PeBreakdown {
  std::vector<double> per_user;
  double average = 0.0;
  std::vector<double> weights;
};

namespace detail {

inline double noise_scale(double sigma_z2) { return std::sqrt(sigma_z2 / 2.0); }

inline void check_link(const ComplexMat& U, const ChannelSet& ch, const SymbolBook& book) {
  require_dims(U.rows() == ch.antennas(), "precoder rows must equal antenna count");
  require_dims(U.cols() == ch.users(), "precoder columns must equal user count");
  require_dims(book.users() == U.cols(), "symbol book size must equal user count");
}

// g_l = h_j u_l for all l.
inline ComplexRow beam_gains(Index j, const ComplexMat& U, const ChannelSet& ch) { return ch.row(j) * U; }

inline double weight_of(std::span<const double> weights, Index j) {
  return weights.empty() ? 1.0 : weights[static_cast<std::size_t>(j)];
}

inline double weight_sum(std::span<const double> weights, Index k) {
  if (weights.empty()) return static_cast<double>(k);
  double s = 0.0;
  for (double a : weights) s += a;
  return s;
}

// Noiseless statistic z_b = h_j U s_b for every row.
inline ComplexVec row_statistics(const ComplexRow& gains, const SymbolBook& book) {
  return book.table().cast<cd>() * gains.transpose();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Probabilities
// ---------------------------------------------------------------------------

inline double pe_user(Index j, cd w_j, const ComplexMat& U, const ChannelSet& ch, const SymbolBook& book,
                      double sigma_z2, FilterScaling scaling = FilterScaling::normalized) {
  detail::check_link(U, ch, book);
  const double wabs = std::abs(w_j);
  if (!(wabs > 0.0)) throw DegenerateError("pe_user: zero filter magnitude");
  const double denom = detail::noise_scale(sigma_z2) * (scaling == FilterScaling::normalized ? wabs : 1.0);
  const ComplexRow g = detail::beam_gains(j, U, ch);
  double acc = 0.0;
  for (Index b = 0; b < book.size(); ++b) {
    cd z = 0.0;
    for (Index l = 0; l < g.size(); ++l) z += g[l] * book.sign(b, l);
    acc += q_function(book.sign(b, j) * std::real(w_j * z) / denom);
  }
  return acc / static_cast<double>(book.size());
}

inline PeBreakdown pe_average(const ReceiveFilters& w, const ComplexMat& U, const ChannelSet& ch,
                              const SymbolBook& book, double sigma_z2, std::span<const double> weights = {},
                              FilterScaling scaling = FilterScaling::normalized) {
  detail::check_link(U, ch, book);
  require_dims(w.size() == U.cols(), "pe_average: one filter per user");
  require_dims(weights.empty() || static_cast<Index>(weights.size()) == U.cols(), "pe_average: one weight per user");
  PeBreakdown out;
  const Index k = U.cols();
  out.per_user.resize(static_cast<std::size_t>(k));
  out.weights.resize(static_cast<std::size_t>(k));
  double num = 0.0;
  for (Index j = 0; j < k; ++j) {
    const double pj = pe_user(j, w[j], U, ch, book, sigma_z2, scaling);
    const double aj = detail::weight_of(weights, j);
    out.per_user[static_cast<std::size_t>(j)] = pj;
    out.weights[static_cast<std::size_t>(j)] = aj;
    num += aj * pj;
  }
  out.average = num / detail::weight_sum(weights, k);
  return out;
}

inline PeBreakdown pe_average(const ReceiveFilters& w, const ComplexMat& U, const ChannelSet& ch,
                              const SymbolBook& book, const SystemConfig& cfg,
                              FilterScaling scaling = FilterScaling::normalized) {
  return pe_average(w, U, ch, book, cfg.sigma_z2, cfg.weights, scaling);
}

// Single-user ML filters w_j = (h_j u_j)^* / |h_j u_j|^2.
inline ReceiveFilters ml_filters(const ComplexMat& U, const ChannelSet& ch, double min_gain = 1e-300) {
  require_dims(U.rows() == ch.antennas() && U.cols() == ch.users(), "ml_filters: shape mismatch");
  ReceiveFilters f;
  f.w.resize(U.cols());
  for (Index j = 0; j < U.cols(); ++j) {
    const cd g = (ch.row(j) * U.col(j))(0);
    const double n2 = std::norm(g);
    if (!(std::sqrt(n2) > min_gain)) throw DegenerateError("ml_filters: user " + std::to_string(j) + " has zero beam gain");
    f.w[j] = std::conj(g) / n2;
  }
  return f;
}

// Average Pe when every receiver uses its ML filter. Depends on U only.
inline double pe_ml(const ComplexMat& U, const ChannelSet& ch, const SymbolBook& book, double sigma_z2,
                    std::span<const double> weights = {}) {
  detail::check_link(U, ch, book);
  const double c = detail::noise_scale(sigma_z2);
  const Index k = U.cols();
  double num = 0.0;
  for (Index j = 0; j < k; ++j) {
    const ComplexRow g = detail::beam_gains(j, U, ch);
    const double gjj = std::abs(g[j]);
    if (!(gjj > 1e-14)) throw DegenerateError("pe_ml: |h_j u_j| vanishes for user " + std::to_string(j));
    const cd gconj = std::conj(g[j]);
    double acc = 0.0;
    for (Index b = 0; b < book.size(); ++b) {
      double num_b = 0.0;
      for (Index l = 0; l < k; ++l) num_b += std::real(gconj * g[l]) * book.sign(b, l) * book.sign(b, j);
      acc += q_function(num_b / (c * gjj));
    }
    num += detail::weight_of(weights, j) * acc / static_cast<double>(book.size());
  }
  return num / detail::weight_sum(weights, k);
}

// Cauchy-Schwarz upper bound on pe_ml for U = U_bar * diag(a): the beam gain
// |h_j u_bar_j| in the denominator is replaced by ||h_j||. The bound holds on
// the floor-free region where every Q argument is nonnegative.
inline double pe_ml_upper(const ComplexMat& Ubar, const RealVec& a, const ChannelSet& ch, const SymbolBook& book,
                          double sigma_z2, std::span<const double> weights = {}) {
  detail::check_link(Ubar, ch, book);
  require_dims(a.size() == Ubar.cols(), "pe_ml_upper: one amplitude per user");
  for (Index l = 0; l < Ubar.cols(); ++l)
    if (std::abs(Ubar.col(l).norm() - 1.0) > 1e-8) throw DimensionError("pe_ml_upper: U_bar columns must have unit norm");
  const double c = detail::noise_scale(sigma_z2);
  const Index k = Ubar.cols();
  double num = 0.0;
  for (Index j = 0; j < k; ++j) {
    const ComplexRow g = detail::beam_gains(j, Ubar, ch);
    const double hn = std::sqrt(ch.norm2(j));
    if (!(hn > 0.0)) throw DegenerateError("pe_ml_upper: zero channel");
    const cd gconj = std::conj(g[j]);
    double acc = 0.0;
    for (Index b = 0; b < book.size(); ++b) {
      double num_b = 0.0;
      for (Index l = 0; l < k; ++l) num_b += std::real(gconj * g[l]) * book.sign(b, l) * book.sign(b, j) * a[l];
      acc += q_function(num_b / (c * hn));
    }
    num += detail::weight_of(weights, j) * acc / static_cast<double>(book.size());
  }
  return num / detail::weight_sum(weights, k);
}

// Rows b with s_bj Re{w_j h_j U s_b} < 0; empty iff user j is floor-free.
inline std::vector<Index> error_floor_violations(Index j, cd w_j, const ComplexMat& U, const ChannelSet& ch,
                                                 const SymbolBook& book) {
  detail::check_link(U, ch, book);
  const ComplexVec z = detail::row_statistics(detail::beam_gains(j, U, ch), book);
  std::vector<Index> out;
  for (Index b = 0; b < book.size(); ++b)
    if (book.sign(b, j) * std::real(w_j * z[b]) < 0.0) out.push_back(b);
  return out;
}

// ---------------------------------------------------------------------------
// Gradients
// ---------------------------------------------------------------------------

// d pe_user / d(Re w_j, Im w_j).
inline Eigen::Vector2d pe_user_grad_w(Index j, cd w_j, const ComplexMat& U, const ChannelSet& ch,
                                      const SymbolBook& book, double sigma_z2,
                                      FilterScaling scaling = FilterScaling::normalized) {
  detail::check_link(U, ch, book);
  const double r = std::abs(w_j);
  if (!(r > 0.0)) throw DegenerateError("pe_user_grad_w: zero filter magnitude");
  const double c = detail::noise_scale(sigma_z2);
  const ComplexVec z = detail::row_statistics(detail::beam_gains(j, U, ch), book);
  const double p = w_j.real(), q = w_j.imag();
  Eigen::Vector2d grad = Eigen::Vector2d::Zero();
  for (Index b = 0; b < book.size(); ++b) {
    const double s = book.sign(b, j);
    const double y = std::real(w_j * z[b]);
    double arg, dp, dq;
    if (scaling == FilterScaling::normalized) {
      arg = s * y / (c * r);
      dp = s * (z[b].real() / r - y * p / (r * r * r)) / c;
      dq = s * (-z[b].imag() / r - y * q / (r * r * r)) / c;
    } else {
      arg = s * y / c;
      dp = s * z[b].real() / c;
      dq = -s * z[b].imag() / c;
    }
    const double dQ = q_derivative(arg);
    grad[0] += dQ * dp;
    grad[1] += dQ * dq;
  }
  return grad / static_cast<double>(book.size());
}

// d pe_average / d U in the real view of U (see to_real()).
inline RealVec pe_average_grad_u(const ReceiveFilters& w, const ComplexMat& U, const ChannelSet& ch,
                                 const SymbolBook& book, double sigma_z2, std::span<const double> weights = {},
                                 FilterScaling scaling = FilterScaling::normalized) {
  detail::check_link(U, ch, book);
  require_dims(w.size() == U.cols(), "pe_average_grad_u: one filter per user");
  const Index m_ant = U.rows(), k = U.cols();
  const double c = detail::noise_scale(sigma_z2);
  const double wsum = detail::weight_sum(weights, k);
  RealVec grad = RealVec::Zero(2 * m_ant * k);
  for (Index j = 0; j < k; ++j) {
    const double r = std::abs(w[j]);
    if (!(r > 0.0)) throw DegenerateError("pe_average_grad_u: zero filter magnitude");
    const double denom = c * (scaling == FilterScaling::normalized ? r : 1.0);
    const ComplexVec z = detail::row_statistics(detail::beam_gains(j, U, ch), book);
    // T_l = sum_b Q'(arg_b) s_bj s_bl
    RealVec t = RealVec::Zero(k);
    for (Index b = 0; b < book.size(); ++b) {
      const double sj = book.sign(b, j);
      const double dQ = q_derivative(sj * std::real(w[j] * z[b]) / denom);
      for (Index l = 0; l < k; ++l) t[l] += dQ * sj * book.sign(b, l);
    }
    const double scale = detail::weight_of(weights, j) / (wsum * static_cast<double>(book.size()) * denom);
    for (Index l = 0; l < k; ++l) {
      for (Index m = 0; m < m_ant; ++m) {
        const cd wh = w[j] * ch.row(j)[m];
        const Index slot = real_slot(m_ant, m, l);
        grad[slot] += scale * t[l] * wh.real();
        grad[slot + 1] -= scale * t[l] * wh.imag();
      }
    }
  }
  return grad;
}

// Gradient of pe_ml_upper with respect to U_bar (real view) and a.
inline std::pair<RealVec, RealVec> pe_ml_upper_grad(const ComplexMat& Ubar, const RealVec& a, const ChannelSet& ch,
                                                    const SymbolBook& book, double sigma_z2,
                                                    std::span<const double> weights = {}) {
  detail::check_link(Ubar, ch, book);
  const Index m_ant = Ubar.rows(), k = Ubar.cols();
  const double c = detail::noise_scale(sigma_z2);
  const double wsum = detail::weight_sum(weights, k);
  RealVec gu = RealVec::Zero(2 * m_ant * k);
  RealVec ga = RealVec::Zero(k);
  for (Index j = 0; j < k; ++j) {
    const ComplexRow g = detail::beam_gains(j, Ubar, ch);
    const double denom = c * std::sqrt(ch.norm2(j));
    const cd gconj = std::conj(g[j]);
    RealVec t = RealVec::Zero(k);
    for (Index b = 0; b < book.size(); ++b) {
      double num_b = 0.0;
      for (Index l = 0; l < k; ++l) num_b += std::real(gconj * g[l]) * book.sign(b, l) * book.sign(b, j) * a[l];
      const double dQ = q_derivative(num_b / denom);
      for (Index l = 0; l < k; ++l) t[l] += dQ * book.sign(b, j) * book.sign(b, l);
    }
    const double scale = detail::weight_of(weights, j) / (wsum * static_cast<double>(book.size()) * denom);
    for (Index l = 0; l < k; ++l) {
      const double coef = scale * t[l];
      ga[l] += coef * std::real(gconj * g[l]);
      for (Index m = 0; m < m_ant; ++m) {
        const cd hjm = ch.row(j)[m];
        // through g_jl = h_j u_bar_l
        const cd via_l = gconj * hjm;
        const Index sl = real_slot(m_ant, m, l);
        gu[sl] += coef * a[l] * via_l.real();
        gu[sl + 1] -= coef * a[l] * via_l.imag();
        // through conj(g_jj)
        const cd via_j = std::conj(hjm) * g[l];
        const Index sj = real_slot(m_ant, m, j);
        gu[sj] += coef * a[l] * via_j.real();
        gu[sj + 1] += coef * a[l] * via_j.imag();
      }
    }
  }
  return {gu, ga};
}

}  // namespace mpe
