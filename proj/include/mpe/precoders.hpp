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

// Linear precoders for the BPSK broadcast channel.
//
//   mpe_ml     alternating minimization of the Cauchy-Schwarz bound on the
//              ML-receiver error probability over unit directions U_bar and
//              amplitudes a (U = U_bar diag(a)).
//   mpe_joint  alternating minimization of the average error probability
//              over U (convex for fixed filters) and the receive filters
//              (K independent convex problems for fixed U).
//   zf, mmse, mslnr, mrt  classical baselines; receivers use ML filters.

#include "mpe/errorprob.hpp"
#include "mpe/model.hpp"
#include "mpe/optim.hpp"
#include "mpe/rng.hpp"
#include "mpe/types.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mpe {

enum class Method { mpe_ml, mpe_joint, zf, mmse, mslnr, mrt };

inline std::string to_string(Method m) {
  switch (m) {
    case Method::mpe_ml: return "mpe_ml";
    case Method::mpe_joint: return "mpe_joint";
    case Method::zf: return "zf";
    case Method::mmse: return "mmse";
    case Method::mslnr: return "mslnr";
    case Method::mrt: return "mrt";
  }
  return "unknown";
}

inline Method method_from_string(std::string_view s) {
  for (Method m : {Method::mpe_ml, Method::mpe_joint, Method::zf, Method::mmse, Method::mslnr, Method::mrt})
    if (s == to_string(m)) return m;
  throw ConfigError("unknown precoding method '" + std::string(s) + "'");
}

inline bool is_mpe(Method m) { return m == Method::mpe_ml || m == Method::mpe_joint; }

struct MpeOptions {
  double pe_threshold = 1e-8;
  int max_outer = 200;
  int multistart = 4;  // starts for the non-convex direction subproblem
  std::uint64_t seed = 0;
  optim::SolveOptions inner{};
};

struct PrecoderResult {
  ComplexMat U;
  ReceiveFilters w;
  Method method = Method::mrt;
  int outer_iterations = 0;
  std::vector<double> pe_trace;
  bool converged = true;
  // mpe_ml factorization U = U_bar diag(a)
  ComplexMat U_bar;
  RealVec amplitudes;
};

namespace detail {

inline void check_precoder_inputs(const ChannelSet& ch, const SystemConfig& cfg) {
  if (!(cfg.sigma_z2 > 0.0) || !(cfg.tau > 0.0)) throw ConfigError("precoder: sigma_z2 and tau must be > 0");
  if (!cfg.weights.empty() && static_cast<Index>(cfg.weights.size()) != ch.users())
    throw ConfigError("precoder: one weight per user required");
  if (ch.users() > kMaxUsers) throw CapacityError("precoder: K exceeds K_max");
}

inline PrecoderResult finish_baseline(ComplexMat U, Method m, const ChannelSet& ch, const SystemConfig& cfg) {
  PrecoderResult r;
  r.w = ml_filters(U, ch);
  r.method = m;
  r.pe_trace = {pe_ml(U, ch, enumerate_symbols(static_cast<int>(ch.users())), cfg.sigma_z2, cfg.weights)};
  r.U = std::move(U);
  return r;
}

// Sphere constraints for the columns of an M x K matrix in real view.
inline std::vector<optim::Sphere> column_spheres(Index rows, Index cols) {
  std::vector<optim::Sphere> out(static_cast<std::size_t>(cols));
  for (Index l = 0; l < cols; ++l)
    for (Index m = 0; m < rows; ++m) {
      out[static_cast<std::size_t>(l)].indices.push_back(real_slot(rows, m, l));
      out[static_cast<std::size_t>(l)].indices.push_back(real_slot(rows, m, l) + 1);
    }
  return out;
}

inline std::vector<Index> iota(Index n) {
  std::vector<Index> v(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = i;
  return v;
}

// Rows b with s_bj = +1; the constraint for the negated row is identical.
inline std::vector<Index> positive_rows(const SymbolBook& book, Index j) {
  std::vector<Index> rows;
  rows.reserve(static_cast<std::size_t>(book.half_size()));
  for (Index b = 0; b < book.size(); ++b)
    if (book.sign(b, j) > 0.0) rows.push_back(b);
  return rows;
}

// Floor-free constraints of the amplitude/direction problem:
//   sum_l Re{conj(h_j ubar_j) h_j ubar_l} s_bl s_bj a_l >= 0.
inline RealVec ml_floor_values(const ComplexMat& Ubar, const RealVec& a, const ChannelSet& ch,
                               const SymbolBook& book) {
  const Index k = Ubar.cols();
  RealVec out(k * book.half_size());
  Index i = 0;
  for (Index j = 0; j < k; ++j) {
    const ComplexRow g = ch.row(j) * Ubar;
    const cd gc = std::conj(g[j]);
    for (Index b : positive_rows(book, j)) {
      double v = 0.0;
      for (Index l = 0; l < k; ++l) v += std::real(gc * g[l]) * book.sign(b, l) * a[l];
      out[i++] = v;
    }
  }
  return out;
}

inline RealVec ml_floor_weighted_grad_ubar(const ComplexMat& Ubar, const RealVec& a, const ChannelSet& ch,
                                           const SymbolBook& book, const RealVec& lambda) {
  const Index m_ant = Ubar.rows(), k = Ubar.cols();
  RealVec grad = RealVec::Zero(2 * m_ant * k);
  Index i = 0;
  for (Index j = 0; j < k; ++j) {
    const ComplexRow g = ch.row(j) * Ubar;
    const cd gc = std::conj(g[j]);
    RealVec t = RealVec::Zero(k);
    for (Index b : positive_rows(book, j)) {
      const double lam = lambda[i++];
      if (lam == 0.0) continue;
      for (Index l = 0; l < k; ++l) t[l] += lam * book.sign(b, l);
    }
    for (Index l = 0; l < k; ++l) {
      if (t[l] == 0.0) continue;
      for (Index m = 0; m < m_ant; ++m) {
        const cd hjm = ch.row(j)[m];
        const cd via_l = gc * hjm;
        const Index sl = real_slot(m_ant, m, l);
        grad[sl] += t[l] * a[l] * via_l.real();
        grad[sl + 1] -= t[l] * a[l] * via_l.imag();
        const cd via_j = std::conj(hjm) * g[l];
        const Index sj = real_slot(m_ant, m, j);
        grad[sj] += t[l] * a[l] * via_j.real();
        grad[sj + 1] += t[l] * a[l] * via_j.imag();
      }
    }
  }
  return grad;
}

// log f has the minimizers of f, and the solver's absolute tolerances act
// on it as relative ones, so tiny error probabilities are still resolved.
inline optim::Objective log_objective(optim::Objective f) {
  return [f = std::move(f)](const RealVec& x, RealVec* grad) {
    constexpr double tiny = 1e-300;
    const double v = f(x, grad);
    if (!(v > tiny)) {
      if (grad) grad->setZero();
      return std::log(tiny);
    }
    if (grad) *grad /= v;
    return std::log(v);
  };
}

inline ComplexMat random_unit_columns(Rng& rng, Index rows, Index cols) {
  ComplexMat u = cscg_matrix(rng, rows, cols);
  for (Index l = 0; l < cols; ++l) u.col(l).normalize();
  return u;
}

// Arc of unit-modulus filters e^{i theta} with Re{e^{i theta} z} >= -tol for
// all z in `stats`; returned as [lo, hi] in radians, or nullopt when empty.
// Any nonempty intersection has an endpoint of some constraint arc, so those
// endpoints are the candidates. Antiparallel statistics can split the set
// into two pieces; the wider one is returned.
inline std::optional<std::pair<double, double>> feasible_phase_arc(const std::vector<cd>& stats, double tol = 0.0) {
  constexpr double pi = std::numbers::pi;
  std::vector<std::pair<double, double>> arcs;  // (center, half width)
  for (const cd& z : stats) {
    if (std::abs(z) == 0.0) continue;
    arcs.emplace_back(-std::arg(z), pi / 2 + std::asin(std::min(1.0, tol / std::abs(z))));
  }
  if (arcs.empty()) return std::pair{-pi, pi};
  std::optional<std::pair<double, double>> best;
  for (const auto& [c0, h0] : arcs) {
    for (double theta : {c0 - h0, c0 + h0}) {
      double lo = -std::numeric_limits<double>::infinity(), hi = std::numeric_limits<double>::infinity();
      bool inside = true;
      for (const auto& [c, h] : arcs) {
        const double cu = theta + std::remainder(c - theta, 2.0 * pi);
        if (std::abs(cu - theta) > h + 1e-12) {
          inside = false;
          break;
        }
        lo = std::max(lo, cu - h);
        hi = std::min(hi, cu + h);
      }
      if (!inside) continue;
      hi = std::max(lo, hi);
      if (!best || hi - lo > best->second - best->first) best = std::pair{lo, hi};
    }
  }
  return best;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Per-user optimal receive filter
// ---------------------------------------------------------------------------

// Unique minimizer (up to positive scaling) of Pe_j over w_j subject to the
// floor-free constraints, returned with |w_j| = 1. Throws InfeasibleError
// when no filter avoids the error floor.
inline cd optimize_filter(Index j, const ComplexMat& U, const ChannelSet& ch, const SymbolBook& book, double sigma_z2,
                          std::optional<cd> start = std::nullopt, const optim::SolveOptions& opt = {}) {
  mpe::detail::check_link(U, ch, book);
  const ComplexVec z_all = mpe::detail::row_statistics(mpe::detail::beam_gains(j, U, ch), book);
  std::vector<cd> stats;  // s_bj z_b for the rows with s_bj = +1
  for (Index b : detail::positive_rows(book, j)) stats.push_back(z_all[b]);

  const auto arc = detail::feasible_phase_arc(stats, opt.c_tol);
  if (!arc) throw InfeasibleError("optimize_filter: error floor unavoidable for user " + std::to_string(j));

  bool all_zero = true;
  for (const cd& z : stats) all_zero = all_zero && std::abs(z) == 0.0;
  if (all_zero) return start && std::abs(*start) > 0.0 ? *start / std::abs(*start) : cd(1.0, 0.0);

  optim::ConstraintSet cs;
  cs.balls.push_back({{0, 1}, 1.0});
  for (const cd& z : stats) {
    optim::Halfspace h;
    h.coeffs = Eigen::Vector2d(z.real(), -z.imag());
    cs.halfspaces.push_back(std::move(h));
  }

  const double c = std::sqrt(sigma_z2 / 2.0);
  const double nb = static_cast<double>(book.size());
  optim::Objective obj = [&](const RealVec& x, RealVec* grad) {
    double f = 0.0;
    if (grad) grad->setZero(2);
    for (const cd& z : stats) {
      const double arg = (x[0] * z.real() - x[1] * z.imag()) / c;
      f += q_function(arg);
      if (grad) {
        const double d = q_derivative(arg) / c;
        (*grad)[0] += d * z.real();
        (*grad)[1] -= d * z.imag();
      }
    }
    // the negated rows contribute identical terms
    if (grad) *grad *= 2.0 / nb;
    return 2.0 * f / nb;
  };

  RealVec x0(2);
  cd w0;
  const double mid = 0.5 * (arc->first + arc->second);
  w0 = std::polar(1.0, mid);
  if (start && std::abs(*start) > 0.0) {
    const cd s = *start / std::abs(*start);
    bool ok = true;
    for (const cd& z : stats) ok = ok && std::real(s * z) >= -opt.c_tol;
    if (ok) w0 = s;
  }
  x0 << w0.real(), w0.imag();
  const auto sol = optim::minimize(detail::log_objective(obj), x0, cs, opt);
  cd w(sol.x[0], sol.x[1]);
  if (!(std::abs(w) > 0.0)) w = w0;
  w /= std::abs(w);
  // renormalizing can only raise nonnegative arguments; keep the better of
  // the solver output and the start for robustness near flat regions
  auto pe_of = [&](cd v) {
    RealVec xv(2);
    xv << v.real(), v.imag();
    return obj(xv, nullptr);
  };
  bool feasible = true;
  for (const cd& z : stats) feasible = feasible && std::real(w * z) >= -opt.c_tol;
  if (!feasible || pe_of(w0) < pe_of(w)) w = w0;
  return w;
}

// ---------------------------------------------------------------------------
// MPE with ML receivers
// ---------------------------------------------------------------------------

inline PrecoderResult mpe_ml(const ChannelSet& ch, const SystemConfig& cfg, const MpeOptions& opts = {}) {
  detail::check_precoder_inputs(ch, cfg);
  const Index k = ch.users(), m_ant = ch.antennas();
  for (Index j = 0; j < k; ++j)
    if (!(ch.norm2(j) > 0.0)) throw DegenerateError("mpe_ml: zero channel for user " + std::to_string(j));
  const SymbolBook book = enumerate_symbols(static_cast<int>(k));
  const std::span<const double> weights(cfg.weights);
  Rng rng = make_rng(opts.seed, {0x4d4cull});

  ComplexMat ubar = detail::random_unit_columns(rng, m_ant, k);
  RealVec a = RealVec::Constant(k, std::sqrt(cfg.tau / static_cast<double>(k)));

  // Minimization 1: directions on the unit spheres, amplitudes fixed.
  auto solve_directions = [&](const ComplexMat& start, const RealVec& amp) {
    optim::ConstraintSet cs;
    cs.spheres = detail::column_spheres(m_ant, k);
    optim::InequalityBlock floor;
    floor.values = [&](const RealVec& x) { return detail::ml_floor_values(from_real(x, m_ant, k), amp, ch, book); };
    floor.weighted_gradient = [&](const RealVec& x, const RealVec& lam) {
      return detail::ml_floor_weighted_grad_ubar(from_real(x, m_ant, k), amp, ch, book, lam);
    };
    cs.inequalities.push_back(std::move(floor));
    optim::Objective obj = [&](const RealVec& x, RealVec* grad) {
      const ComplexMat ub = from_real(x, m_ant, k);
      if (grad) *grad = pe_ml_upper_grad(ub, amp, ch, book, cfg.sigma_z2, weights).first;
      return pe_ml_upper(ub, amp, ch, book, cfg.sigma_z2, weights);
    };
    return optim::minimize(detail::log_objective(obj), to_real(start), cs, opts.inner);
  };

  // Minimization 2: amplitudes, directions fixed. Convex.
  auto solve_amplitudes = [&](const ComplexMat& ub, const RealVec& start) {
    optim::ConstraintSet cs;
    cs.balls.push_back({detail::iota(k), cfg.tau});
    for (Index j = 0; j < k; ++j) {
      const ComplexRow g = ch.row(j) * ub;
      const cd gc = std::conj(g[j]);
      for (Index b : detail::positive_rows(book, j)) {
        optim::Halfspace h;
        h.coeffs.resize(k);
        for (Index l = 0; l < k; ++l) h.coeffs[l] = std::real(gc * g[l]) * book.sign(b, l);
        cs.halfspaces.push_back(std::move(h));
      }
    }
    for (Index l = 0; l < k; ++l) {
      optim::Halfspace h;
      h.coeffs = RealVec::Unit(k, l);
      cs.halfspaces.push_back(std::move(h));
    }
    optim::Objective obj = [&](const RealVec& x, RealVec* grad) {
      if (grad) *grad = pe_ml_upper_grad(ub, x, ch, book, cfg.sigma_z2, weights).second;
      return pe_ml_upper(ub, x, ch, book, cfg.sigma_z2, weights);
    };
    return optim::minimize(detail::log_objective(obj), start, cs, opts.inner);
  };

  PrecoderResult res;
  res.method = Method::mpe_ml;
  double pe1 = 1.0, pe2 = 0.5;
  bool have_feasible = false;
  int iter = 0;
  while (pe1 - pe2 > opts.pe_threshold && iter < opts.max_outer) {
    pe1 = pe2;
    // Minimization 1 with multi-start; the warm start keeps the trace monotone.
    std::optional<optim::Solution> best;
    for (int s = 0; s < std::max(1, opts.multistart); ++s) {
      const ComplexMat start = s == 0 ? ubar : detail::random_unit_columns(rng, m_ant, k);
      optim::Solution sol = solve_directions(start, a);
      if (!sol.report.feasible) continue;
      if (!best || sol.f < best->f) best = std::move(sol);
    }
    if (!best) {
      if (!have_feasible) throw InfeasibleError("mpe_ml: no floor-free start found");
      break;
    }
    ubar = from_real(best->x, m_ant, k);
    for (Index l = 0; l < k; ++l) ubar.col(l).normalize();

    const optim::Solution amp = solve_amplitudes(ubar, a);
    if (amp.report.feasible) a = amp.x.cwiseMax(0.0);
    have_feasible = true;
    pe2 = pe_ml_upper(ubar, a, ch, book, cfg.sigma_z2, weights);
    res.pe_trace.push_back(pe2);
    ++iter;
  }
  res.outer_iterations = iter;
  res.converged = pe1 - pe2 <= opts.pe_threshold;
  res.U_bar = ubar;
  res.amplitudes = a;
  res.U = ubar * a.cast<cd>().asDiagonal();
  res.w.w.resize(k);
  for (Index j = 0; j < k; ++j) {
    const cd g = (ch.row(j) * res.U.col(j))(0);
    if (std::abs(g) > 0.0) {
      res.w.w[j] = std::conj(g) / std::norm(g);
    } else {
      // zero amplitude: keep the phase-aligned direction
      const cd gd = (ch.row(j) * ubar.col(j))(0);
      res.w.w[j] = std::abs(gd) > 0.0 ? std::conj(gd) / std::abs(gd) : cd(1.0, 0.0);
    }
  }
  return res;
}

// ---------------------------------------------------------------------------
// Joint MPE transmit precoding and receive filtering
// ---------------------------------------------------------------------------

inline PrecoderResult mpe_joint(const ChannelSet& ch, const SystemConfig& cfg, const MpeOptions& opts = {}) {
  detail::check_precoder_inputs(ch, cfg);
  const Index k = ch.users(), m_ant = ch.antennas();
  for (Index j = 0; j < k; ++j)
    if (!(ch.norm2(j) > 0.0)) throw DegenerateError("mpe_joint: zero channel for user " + std::to_string(j));
  const SymbolBook book = enumerate_symbols(static_cast<int>(k));
  const std::span<const double> weights(cfg.weights);
  Rng rng = make_rng(opts.seed, {0x4a54ull});

  ComplexMat U = cscg_matrix(rng, m_ant, k);
  U *= std::sqrt(cfg.tau) / U.norm();
  const cd w0 = [&] {
    cd z = cscg(rng);
    return z / std::abs(z);
  }();
  ReceiveFilters w{ComplexVec::Constant(k, w0)};

  auto solve_precoder = [&](const ComplexMat& start) {
    optim::ConstraintSet cs;
    cs.balls.push_back({detail::iota(2 * m_ant * k), cfg.tau});
    for (Index j = 0; j < k; ++j) {
      for (Index b : detail::positive_rows(book, j)) {
        optim::Halfspace h;
        h.coeffs = RealVec::Zero(2 * m_ant * k);
        for (Index l = 0; l < k; ++l)
          for (Index m = 0; m < m_ant; ++m) {
            const cd wh = w[j] * ch.row(j)[m];
            const Index slot = real_slot(m_ant, m, l);
            h.coeffs[slot] = book.sign(b, l) * wh.real();
            h.coeffs[slot + 1] = -book.sign(b, l) * wh.imag();
          }
        cs.halfspaces.push_back(std::move(h));
      }
    }
    optim::Objective obj = [&](const RealVec& x, RealVec* grad) {
      const ComplexMat u = from_real(x, m_ant, k);
      if (grad) *grad = pe_average_grad_u(w, u, ch, book, cfg.sigma_z2, weights, FilterScaling::unit);
      return pe_average(w, u, ch, book, cfg.sigma_z2, weights, FilterScaling::unit).average;
    };
    return optim::minimize(detail::log_objective(obj), to_real(start), cs, opts.inner);
  };

  PrecoderResult res;
  res.method = Method::mpe_joint;
  std::vector<double> pe1(static_cast<std::size_t>(k), 1.0), pe2(static_cast<std::size_t>(k), 0.5);
  auto mean_gap = [&] {
    double s = 0.0;
    for (std::size_t j = 0; j < pe1.size(); ++j) s += pe1[j] - pe2[j];
    return s / static_cast<double>(k);
  };
  int iter = 0;
  while (mean_gap() > opts.pe_threshold && iter < opts.max_outer) {
    pe1 = pe2;
    // Minimization 1: U with w fixed.
    const optim::Solution sol = solve_precoder(U);
    if (!sol.report.feasible) {
      if (iter == 0) throw InfeasibleError("mpe_joint: no floor-free precoder for the initial filters");
      break;
    }
    U = from_real(sol.x, m_ant, k);
    // Minimization 2: each filter independently.
    for (Index j = 0; j < k; ++j) {
      w.w[j] = optimize_filter(j, U, ch, book, cfg.sigma_z2, w[j], opts.inner);
      pe2[static_cast<std::size_t>(j)] = pe_user(j, w[j], U, ch, book, cfg.sigma_z2);
    }
    double avg = 0.0;
    for (Index j = 0; j < k; ++j) avg += mpe::detail::weight_of(weights, j) * pe2[static_cast<std::size_t>(j)];
    res.pe_trace.push_back(avg / mpe::detail::weight_sum(weights, k));
    ++iter;
  }
  res.outer_iterations = iter;
  res.converged = mean_gap() <= opts.pe_threshold;
  res.U = std::move(U);
  res.w = std::move(w);
  return res;
}

// ---------------------------------------------------------------------------
// Baselines
// ---------------------------------------------------------------------------

// Zero forcing with equal per-user power tau/K.
inline PrecoderResult zf(const ChannelSet& ch, const SystemConfig& cfg) {
  detail::check_precoder_inputs(ch, cfg);
  const Index k = ch.users(), m_ant = ch.antennas();
  if (k > m_ant) throw DimensionError("zf: more users than antennas");
  const ComplexMat& H = ch.matrix();
  Eigen::JacobiSVD<ComplexMat> svd(H);
  const RealVec sv = svd.singularValues();
  if (!(sv.minCoeff() > 1e-10 * std::max(1.0, sv.maxCoeff()))) throw DegenerateError("zf: channel stack is rank deficient");
  const ComplexMat gram = H * H.adjoint();
  ComplexMat U = H.adjoint() * gram.ldlt().solve(ComplexMat::Identity(k, k));
  const double amp = std::sqrt(cfg.tau / static_cast<double>(k));
  for (Index l = 0; l < k; ++l) U.col(l) *= amp / U.col(l).norm();
  return detail::finish_baseline(std::move(U), Method::zf, ch, cfg);
}

// Regularized channel inversion H^H (H H^H + (K sigma^2 / tau) I)^-1 scaled
// to total power tau.
inline PrecoderResult mmse(const ChannelSet& ch, const SystemConfig& cfg) {
  detail::check_precoder_inputs(ch, cfg);
  const Index k = ch.users();
  const ComplexMat& H = ch.matrix();
  const double rho = static_cast<double>(k) * cfg.sigma_z2 / cfg.tau;
  const ComplexMat reg = H * H.adjoint() + rho * ComplexMat::Identity(k, k);
  ComplexMat U = H.adjoint() * reg.ldlt().solve(ComplexMat::Identity(k, k));
  const double n = U.norm();
  if (!(n > 0.0)) throw DegenerateError("mmse: zero precoder");
  U *= std::sqrt(cfg.tau) / n;
  return detail::finish_baseline(std::move(U), Method::mmse, ch, cfg);
}

// Maximum signal-to-leakage-and-noise ratio beams with equal power tau/K.
// The dominant generalized eigenvector of (h_j^H h_j, sum_{l != j} h_l^H h_l
// + (K sigma^2/tau) I) is the rank-one solution A^-1 h_j^H.
inline PrecoderResult mslnr(const ChannelSet& ch, const SystemConfig& cfg) {
  detail::check_precoder_inputs(ch, cfg);
  const Index k = ch.users(), m_ant = ch.antennas();
  const ComplexMat& H = ch.matrix();
  const double rho = static_cast<double>(k) * cfg.sigma_z2 / cfg.tau;
  const ComplexMat total = H.adjoint() * H;
  const double amp = std::sqrt(cfg.tau / static_cast<double>(k));
  ComplexMat U(m_ant, k);
  for (Index j = 0; j < k; ++j) {
    const ComplexVec hj = ch.row(j).adjoint();
    const ComplexMat leak = total - hj * hj.adjoint() + rho * ComplexMat::Identity(m_ant, m_ant);
    ComplexVec v = leak.ldlt().solve(hj);
    const double n = v.norm();
    if (!(n > 0.0)) throw DegenerateError("mslnr: zero beam for user " + std::to_string(j));
    U.col(j) = v * (amp / n);
  }
  return detail::finish_baseline(std::move(U), Method::mslnr, ch, cfg);
}

// Normalized maximum ratio transmission u_j = h_j^H sqrt(tau / sum_l ||h_l||^2).
inline PrecoderResult mrt(const ChannelSet& ch, const SystemConfig& cfg) {
  detail::check_precoder_inputs(ch, cfg);
  const double total = ch.norms2().sum();
  if (!(total > 0.0)) throw DegenerateError("mrt: all channels are zero");
  ComplexMat U = ch.matrix().adjoint() * std::sqrt(cfg.tau / total);
  return detail::finish_baseline(std::move(U), Method::mrt, ch, cfg);
}

inline PrecoderResult build_precoder(Method m, const ChannelSet& ch, const SystemConfig& cfg,
                                     const MpeOptions& opts = {}) {
  switch (m) {
    case Method::mpe_ml: return mpe_ml(ch, cfg, opts);
    case Method::mpe_joint: return mpe_joint(ch, cfg, opts);
    case Method::zf: return zf(ch, cfg);
    case Method::mmse: return mmse(ch, cfg);
    case Method::mslnr: return mslnr(ch, cfg);
    case Method::mrt: return mrt(ch, cfg);
  }
  throw ConfigError("build_precoder: unknown method");
}

// Average Pe of a precoder with the filters it ships with.
inline double achieved_pe(const PrecoderResult& r, const ChannelSet& ch, const SystemConfig& cfg) {
  const SymbolBook book = enumerate_symbols(static_cast<int>(ch.users()));
  return pe_average(r.w, r.U, ch, book, cfg.sigma_z2, cfg.weights).average;
}

}  // namespace mpe
