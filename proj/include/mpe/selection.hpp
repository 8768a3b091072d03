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

// User scheduling for the BPSK broadcast link: geometric user selection
// (GUS) driven by the real correlation distance, and a semi-orthogonal
// (SUS) baseline. User indices are 0-based.

#include "mpe/model.hpp"
#include "mpe/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

namespace mpe {

struct SelectionOutcome {
  std::vector<Index> selected;  // in selection order
  int iterations = 0;
  std::vector<int> k_trace;    // K used by each outer iteration
  double alpha_used = 0.0;     // alpha of the iteration that produced `selected`
  int k_final = 0;             // K of that iteration
  std::uint64_t flops = 0;     // GUS only
};

// |Re{h_j h_l^H}| / min(|h_j|^2, |h_l|^2). May exceed 1.
template <class A, class B>
double d_rc(const A& hj, const B& hl) {
  const double nj = hj.squaredNorm(), nl = hl.squaredNorm();
  if (!(nj > 0.0) || !(nl > 0.0)) throw DegenerateError("d_rc: zero-norm channel");
  const double re = (hj.conjugate().cwiseProduct(hl)).sum().real();  // Re{h_l h_j^H} = Re{h_j h_l^H}
  return std::abs(re) / std::min(nj, nl);
}

// sin of the principal angle between two lines. Diagnostic only.
template <class A, class B>
double chordal_distance(const A& hj, const B& hl) {
  const double nj = hj.squaredNorm(), nl = hl.squaredNorm();
  if (!(nj > 0.0) || !(nl > 0.0)) throw DegenerateError("chordal_distance: zero-norm channel");
  const double c = std::norm((hj.conjugate().cwiseProduct(hl)).sum()) / (nj * nl);
  return std::sqrt(std::max(0.0, 1.0 - c));
}

inline int initial_k(int antennas) {
  if (antennas < 1) throw ConfigError("initial_k: M must be >= 1");
  return antennas + 1;
}

struct GusOptions {
  std::optional<double> alpha;  // fixed alpha; default (K-1)/K per iteration
  int k_cap_factor = 2;         // K in [1, k_cap_factor*M]
  int outer_cap_factor = 3;     // at most outer_cap_factor*M outer iterations
};

inline double gus_flop_bound(Index antennas, Index total_users) {
  const double m = static_cast<double>(antennas), kt = static_cast<double>(total_users);
  return 2.0 * m * m * (4.0 * m + 5.0) * kt + (4.0 * m - 1.0) * kt;
}

namespace detail {

struct GusPass {
  std::vector<Index> selected;
  std::uint64_t flops = 0;
};

// One run of the main body with a fixed K.
inline GusPass gus_pass(const ChannelSet& ch, int k, double alpha) {
  const Index kt = ch.users();
  const double limit = k > 1 ? 1.0 / static_cast<double>(k - 1) : std::numeric_limits<double>::infinity();
  const double band = k > 1 ? alpha / static_cast<double>(k - 1) : std::numeric_limits<double>::infinity();
  GusPass out;
  std::vector<Index> avail(static_cast<std::size_t>(kt));
  for (Index j = 0; j < kt; ++j) avail[static_cast<std::size_t>(j)] = j;
  std::vector<Index> cand = avail;
  std::vector<double> dist(static_cast<std::size_t>(kt), 0.0);
  const Index m = ch.antennas();
  for (int i = 1; i <= k && !cand.empty(); ++i) {
    out.flops += cand.size();
    Index best = cand.front();
    for (Index j : cand)
      if (ch.norm2(j) > ch.norm2(best) || (ch.norm2(j) == ch.norm2(best) && j < best)) best = j;
    out.selected.push_back(best);
    std::erase(avail, best);
    out.flops += static_cast<std::uint64_t>((4 * m + 3)) * avail.size();
    std::vector<Index> next;
    next.reserve(avail.size());
    for (Index j : avail) {
      dist[static_cast<std::size_t>(j)] = d_rc(ch.row(j), ch.row(best));
      if (!(dist[static_cast<std::size_t>(j)] > limit)) next.push_back(j);
    }
    avail = std::move(next);
    out.flops += avail.size();
    cand.clear();
    for (Index j : avail)
      if (dist[static_cast<std::size_t>(j)] > band) cand.push_back(j);
    if (cand.empty()) cand = avail;
  }
  return out;
}

}  // namespace detail

// Geometric user selection with the outer K search.
inline SelectionOutcome gus(const ChannelSet& ch, const GusOptions& opt = {}) {
  const int m = static_cast<int>(ch.antennas());
  const int k_max = std::max(1, opt.k_cap_factor * m);
  const int outer_cap = std::max(1, opt.outer_cap_factor * m);
  SelectionOutcome res;
  res.flops = static_cast<std::uint64_t>(ch.users()) * static_cast<std::uint64_t>(4 * m - 1);

  auto alpha_for = [&](int k) { return opt.alpha ? *opt.alpha : static_cast<double>(k - 1) / k; };

  int k = std::min(initial_k(m), k_max);
  std::vector<Index> prev_set;
  int prev_k = 0;
  double prev_alpha = 0.0;
  for (int iter = 1;; ++iter) {
    const double alpha = alpha_for(k);
    detail::GusPass pass = detail::gus_pass(ch, k, alpha);
    res.flops += pass.flops;
    res.k_trace.push_back(k);
    res.iterations = iter;
    const auto cur = static_cast<int>(pass.selected.size());

    auto finish = [&](std::vector<Index> s, int kk, double a) {
      res.selected = std::move(s);
      res.k_final = kk;
      res.alpha_used = a;
      return res;
    };

    int next_k = 0;
    if (iter == 1) {
      next_k = cur == k ? k + 1 : k - 1;
    } else if (k > prev_k) {
      if (cur >= static_cast<int>(prev_set.size())) next_k = k + 1;
      else return finish(std::move(prev_set), prev_k, prev_alpha);
    } else {
      if (cur >= k - 1) return finish(std::move(pass.selected), k, alpha);
      next_k = k - 1;
    }
    // Caps: stop with the current set when K would leave [1, k_max] or the
    // outer budget is spent.
    if (next_k < 1 || next_k > k_max || iter >= outer_cap) return finish(std::move(pass.selected), k, alpha);
    prev_set = std::move(pass.selected);
    prev_k = k;
    prev_alpha = alpha;
    k = next_k;
  }
}

inline std::uint64_t op_counter(const ChannelSet& ch, const GusOptions& opt = {}) { return gus(ch, opt).flops; }

// Semi-orthogonal user selection on orthogonal components.
inline SelectionOutcome sus(const ChannelSet& ch, double epsilon = 0.35, std::optional<Index> max_users = {}) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw ConfigError("sus: epsilon must lie in (0, 1)");
  const Index m = ch.antennas(), kt = ch.users();
  const Index cap = std::min(max_users.value_or(m), m);
  SelectionOutcome res;
  res.alpha_used = epsilon;
  std::vector<Index> pool(static_cast<std::size_t>(kt));
  for (Index j = 0; j < kt; ++j) pool[static_cast<std::size_t>(j)] = j;
  ComplexMat g = ch.matrix();  // row j: component of h_j orthogonal to selected directions
  std::vector<ComplexRow> basis;
  while (!pool.empty() && static_cast<Index>(res.selected.size()) < cap) {
    ++res.iterations;
    for (Index j : pool) {
      ComplexRow v = ch.row(j);
      for (const auto& q : basis) v -= (v * q.adjoint())(0) * q;
      g.row(j) = v;
    }
    Index best = pool.front();
    for (Index j : pool)
      if (g.row(j).squaredNorm() > g.row(best).squaredNorm()) best = j;
    const double gn = g.row(best).norm();
    if (!(gn > 1e-12)) break;
    res.selected.push_back(best);
    const ComplexRow q = g.row(best) / gn;
    basis.push_back(q);
    std::vector<Index> next;
    for (Index j : pool) {
      if (j == best) continue;
      const double c = std::abs((ch.row(j) * q.adjoint())(0)) / ch.row(j).norm();
      if (c < epsilon) next.push_back(j);
    }
    pool = std::move(next);
  }
  res.k_trace.push_back(static_cast<int>(res.selected.size()));
  res.k_final = static_cast<int>(res.selected.size());
  return res;
}

// Mean SUS selection size for each epsilon over a fixed channel sample.
inline std::vector<double> sus_epsilon_sweep(std::span<const ChannelSet> channels, std::span<const double> epsilons) {
  std::vector<double> mean;
  mean.reserve(epsilons.size());
  for (double e : epsilons) {
    double s = 0.0;
    for (const auto& ch : channels) s += static_cast<double>(sus(ch, e).selected.size());
    mean.push_back(channels.empty() ? 0.0 : s / static_cast<double>(channels.size()));
  }
  return mean;
}

}  // namespace mpe
