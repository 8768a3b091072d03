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

// Monte Carlo campaigns: channel draws, optional user selection, precoding,
// BER counting under CSCG noise, and frame throughput.

#include "mpe/errorprob.hpp"
#include "mpe/model.hpp"
#include "mpe/precoders.hpp"
#include "mpe/rng.hpp"
#include "mpe/selection.hpp"
#include "mpe/types.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <iomanip>
#include <limits>
#include <mutex>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <thread>
#include <vector>

namespace mpe {

inline double snr_to_noise(double snr_db, double tau = 1.0) { return tau * std::pow(10.0, -snr_db / 10.0); }

// ---------------------------------------------------------------------------
// Link-level measurement
// ---------------------------------------------------------------------------

struct Observation {
  cd noiseless;
  cd noisy;
};

// Output of receiver j for one symbol row s and one noise draw z.
inline Observation observe(Index j, const ComplexMat& U, const ChannelSet& ch, const RealVec& s, cd w_j, cd z) {
  const cd clean = (ch.row(j) * U * s.cast<cd>())(0);
  return {w_j * clean, w_j * (clean + z)};
}

struct ErrorCount {
  std::uint64_t errors = 0;
  std::uint64_t bits = 0;
  double rate() const { return bits ? static_cast<double>(errors) / static_cast<double>(bits) : 0.0; }
};

// Sends n_symbols uniformly drawn BPSK rows; every user decodes each row.
inline ErrorCount count_errors(const ComplexMat& U, const ReceiveFilters& w, const ChannelSet& ch, double sigma_z2,
                               std::uint64_t n_symbols, Rng& rng) {
  const Index k = ch.users();
  require_dims(U.rows() == ch.antennas() && U.cols() == k && w.size() == k, "count_errors: shape mismatch");
  const ComplexMat G = ch.matrix() * U;  // K x K effective gains
  std::bernoulli_distribution bit(0.5);
  ErrorCount c;
  ComplexVec s(k);
  for (std::uint64_t n = 0; n < n_symbols; ++n) {
    for (Index l = 0; l < k; ++l) s[l] = bit(rng) ? 1.0 : -1.0;
    const ComplexVec clean = G * s;
    for (Index j = 0; j < k; ++j) {
      const cd y = w[j] * (clean[j] + cscg(rng, sigma_z2));
      if (detect(y.real()) != static_cast<int>(s[j].real())) ++c.errors;
    }
  }
  c.bits = n_symbols * static_cast<std::uint64_t>(k);
  return c;
}

inline double measure_ber(const PrecoderResult& r, const ChannelSet& ch, const SystemConfig& cfg,
                          std::uint64_t n_bits, Rng& rng) {
  if (n_bits < 1) throw ConfigError("measure_ber: n_bits must be >= 1");
  return count_errors(r.U, r.w, ch, cfg.sigma_z2, n_bits, rng).rate();
}

struct Interval {
  double lo = 0.0, hi = 0.0;
  double half_width() const { return 0.5 * (hi - lo); }
};

// Wilson score interval; z = 1.96 gives 95 %.
inline Interval wilson_interval(std::uint64_t errors, std::uint64_t trials, double z = 1.959963984540054) {
  if (trials == 0) return {0.0, 1.0};
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(errors) / n;
  const double z2 = z * z;
  const double den = 1.0 + z2 / n;
  const double center = (p + z2 / (2.0 * n)) / den;
  const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / den;
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

inline double expected_throughput(double pe, int frame_len, double k_avg) {
  if (!(pe >= 0.0 && pe <= 1.0)) throw ConfigError("expected_throughput: pe must lie in [0, 1]");
  if (frame_len < 1) throw ConfigError("expected_throughput: frame length must be >= 1");
  return std::pow(1.0 - pe, frame_len) * k_avg;
}

// ---------------------------------------------------------------------------
// Campaigns
// ---------------------------------------------------------------------------

enum class Selection { none, gus, sus };

inline std::string to_string(Selection s) {
  switch (s) {
    case Selection::none: return "none";
    case Selection::gus: return "gus";
    case Selection::sus: return "sus";
  }
  return "unknown";
}

inline Selection selection_from_string(std::string_view s) {
  for (Selection v : {Selection::none, Selection::gus, Selection::sus})
    if (s == to_string(v)) return v;
  throw ConfigError("unknown selection method '" + std::string(s) + "'");
}

struct CampaignSpec {
  int M = 3;
  int K = 3;                   // users when no selection is applied
  int K_T = 0;                 // pool size when selecting
  std::vector<Selection> selections{Selection::none};
  std::vector<double> snr_db{0.0};
  int realizations = 1;
  std::uint64_t bits_per_realization = 500;  // symbol rows per (realization, SNR, method)
  int frame_len = 100;
  std::vector<Method> methods{Method::mpe_joint};
  std::uint64_t seed = 1;
  int workers = 1;
  double tau = 1.0;
  double epsilon_sus = 0.35;
  std::optional<double> alpha;  // GUS alpha override
  MpeOptions mpe{};

  void validate() const {
    if (M < 1) throw ConfigError("campaign: M must be >= 1");
    if (snr_db.empty()) throw ConfigError("campaign: empty SNR grid");
    for (double s : snr_db)
      if (!std::isfinite(s)) throw ConfigError("campaign: SNR grid must be finite");
    if (realizations < 1) throw ConfigError("campaign: realizations must be >= 1");
    if (frame_len < 1) throw ConfigError("campaign: frame length must be >= 1");
    if (methods.empty() || selections.empty()) throw ConfigError("campaign: need at least one method and selection");
    if (workers < 1) throw ConfigError("campaign: workers must be >= 1");
    if (!(tau > 0.0)) throw ConfigError("campaign: tau must be > 0");
    const bool selecting = std::any_of(selections.begin(), selections.end(), [](Selection s) { return s != Selection::none; });
    const bool plain = std::any_of(selections.begin(), selections.end(), [](Selection s) { return s == Selection::none; });
    if (selecting && K_T < 1) throw ConfigError("campaign: selection needs K_T >= 1");
    if (plain && (K < 1 || K > kMaxUsers)) throw ConfigError("campaign: K must lie in [1, " + std::to_string(kMaxUsers) + "]");
    if (!(epsilon_sus > 0.0 && epsilon_sus < 1.0)) throw ConfigError("campaign: epsilon_sus must lie in (0, 1)");
  }
};

// Label of a (selection, method) series, e.g. "gus+mpe_joint".
inline std::string series_label(Selection s, Method m) {
  return s == Selection::none ? to_string(m) : to_string(s) + "+" + to_string(m);
}

struct CellResult {
  std::string label;
  Selection selection = Selection::none;
  Method method = Method::mpe_joint;
  double snr_db = 0.0;
  std::uint64_t errors = 0;
  std::uint64_t bits = 0;
  double pe_bits = 0.0;  // sum over realizations of K_r * Pe_r
  std::uint64_t users = 0;
  std::uint64_t iterations = 0;
  int ok = 0;
  int skipped = 0;  // method not applicable (e.g. ZF with K > M)
  int failed = 0;

  double ber() const { return bits ? static_cast<double>(errors) / static_cast<double>(bits) : 0.0; }
  Interval ci() const { return wilson_interval(errors, bits); }
  double pe_theory() const { return users ? pe_bits / static_cast<double>(users) : 0.0; }
  double mean_iters() const { return ok ? static_cast<double>(iterations) / ok : 0.0; }
  double mean_selected() const { return ok ? static_cast<double>(users) / ok : 0.0; }
  double throughput(int frame_len) const { return expected_throughput(std::clamp(pe_theory(), 0.0, 1.0), frame_len, mean_selected()); }
};

struct SelectionRecord {
  std::uint64_t realization_seed = 0;
  int realization = 0;
  Selection selection = Selection::none;
  std::vector<Index> selected;
  int iterations = 0;
};

struct CampaignResult {
  CampaignSpec spec;
  std::vector<CellResult> cells;  // ordered by selection, method, SNR
  std::vector<SelectionRecord> selections;
  std::vector<std::string> failures;

  const CellResult* find(const std::string& label, double snr) const {
    for (const auto& c : cells)
      if (c.label == label && std::abs(c.snr_db - snr) < 1e-9) return &c;
    return nullptr;
  }
};

namespace detail {

inline bool applicable(Method m, Index k, Index antennas) {
  return !((m == Method::zf || m == Method::mmse) && k > antennas);
}

struct RealizationOutput {
  std::vector<CellResult> cells;  // same layout as CampaignResult::cells
  std::vector<SelectionRecord> selections;
  std::vector<std::string> failures;
};

inline std::size_t cell_index(const CampaignSpec& s, std::size_t sel, std::size_t meth, std::size_t snr) {
  return (sel * s.methods.size() + meth) * s.snr_db.size() + snr;
}

inline std::vector<CellResult> empty_cells(const CampaignSpec& s) {
  std::vector<CellResult> cells(s.selections.size() * s.methods.size() * s.snr_db.size());
  for (std::size_t a = 0; a < s.selections.size(); ++a)
    for (std::size_t m = 0; m < s.methods.size(); ++m)
      for (std::size_t i = 0; i < s.snr_db.size(); ++i) {
        CellResult& c = cells[cell_index(s, a, m, i)];
        c.selection = s.selections[a];
        c.method = s.methods[m];
        c.label = series_label(c.selection, c.method);
        c.snr_db = s.snr_db[i];
      }
  return cells;
}

inline RealizationOutput run_realization(const CampaignSpec& spec, int r) {
  RealizationOutput out;
  out.cells = empty_cells(spec);
  const auto ur = static_cast<std::uint64_t>(r);
  const std::uint64_t ch_seed = derive_seed(spec.seed, {ur});
  const bool selecting = std::any_of(spec.selections.begin(), spec.selections.end(),
                                     [](Selection s) { return s != Selection::none; });
  const Index pool = selecting ? std::max<Index>(spec.K_T, spec.K) : spec.K;
  const ChannelSet all = generate_channels(ch_seed, pool, spec.M);

  for (std::size_t a = 0; a < spec.selections.size(); ++a) {
    const Selection sel = spec.selections[a];
    std::vector<Index> users;
    if (sel == Selection::none) {
      for (Index j = 0; j < spec.K; ++j) users.push_back(j);
    } else {
      const ChannelSet cand = all.subset(detail::iota(spec.K_T));
      SelectionOutcome so;
      if (sel == Selection::gus) {
        GusOptions go;
        go.alpha = spec.alpha;
        so = gus(cand, go);
      } else {
        so = sus(cand, spec.epsilon_sus);
      }
      users = so.selected;
      out.selections.push_back({ch_seed, r, sel, so.selected, so.iterations});
    }
    if (static_cast<int>(users.size()) > kMaxUsers) users.resize(kMaxUsers);
    const ChannelSet ch = all.subset(users);
    const Index k = ch.users();

    for (std::size_t m = 0; m < spec.methods.size(); ++m) {
      const Method meth = spec.methods[m];
      for (std::size_t i = 0; i < spec.snr_db.size(); ++i) {
        CellResult& cell = out.cells[cell_index(spec, a, m, i)];
        if (!applicable(meth, k, ch.antennas())) {
          ++cell.skipped;
          continue;
        }
        SystemConfig cfg;
        cfg.M = spec.M;
        cfg.K = static_cast<int>(k);
        cfg.tau = spec.tau;
        cfg.sigma_z2 = snr_to_noise(spec.snr_db[i], spec.tau);
        MpeOptions opts = spec.mpe;
        opts.seed = derive_seed(spec.seed, {ur, i, m, a, 0x5052});
        try {
          const PrecoderResult pr = build_precoder(meth, ch, cfg, opts);
          const double pe = achieved_pe(pr, ch, cfg);
          Rng noise = make_rng(spec.seed, {ur, i, m, a, 0x4e5a});
          const ErrorCount ec = count_errors(pr.U, pr.w, ch, cfg.sigma_z2, spec.bits_per_realization, noise);
          cell.errors += ec.errors;
          cell.bits += ec.bits;
          cell.pe_bits += pe * static_cast<double>(k);
          cell.users += static_cast<std::uint64_t>(k);
          cell.iterations += static_cast<std::uint64_t>(pr.outer_iterations);
          ++cell.ok;
        } catch (const std::exception& e) {
          ++cell.failed;
          out.failures.push_back("realization " + std::to_string(r) + " " + cell.label + " @ " +
                                 std::to_string(spec.snr_db[i]) + " dB: " + e.what());
        }
      }
    }
  }
  return out;
}

inline void fold(CellResult& acc, const CellResult& x) {
  acc.errors += x.errors;
  acc.bits += x.bits;
  acc.pe_bits += x.pe_bits;
  acc.users += x.users;
  acc.iterations += x.iterations;
  acc.ok += x.ok;
  acc.skipped += x.skipped;
  acc.failed += x.failed;
}

}  // namespace detail

// Realizations run on up to spec.workers threads; results are folded in
// realization order so the output does not depend on scheduling.
inline CampaignResult run_campaign(const CampaignSpec& spec) {
  spec.validate();
  const auto n = static_cast<std::size_t>(spec.realizations);
  std::vector<std::optional<detail::RealizationOutput>> parts(n);
  std::atomic<std::size_t> next{0};
  std::exception_ptr fatal;
  std::mutex fatal_mu;
  auto worker = [&] {
    for (std::size_t r = next++; r < n; r = next++) {
      try {
        parts[r] = detail::run_realization(spec, static_cast<int>(r));
      } catch (...) {
        std::lock_guard lock(fatal_mu);
        if (!fatal) fatal = std::current_exception();
      }
    }
  };
  const auto nthreads = static_cast<std::size_t>(std::min<int>(spec.workers, spec.realizations));
  if (nthreads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < nthreads; ++t) pool.emplace_back(worker);
  }
  if (fatal) std::rethrow_exception(fatal);

  CampaignResult res;
  res.spec = spec;
  res.cells = detail::empty_cells(spec);
  for (auto& p : parts) {
    for (std::size_t c = 0; c < res.cells.size(); ++c) detail::fold(res.cells[c], p->cells[c]);
    for (auto& s : p->selections) res.selections.push_back(std::move(s));
    for (auto& f : p->failures) res.failures.push_back(std::move(f));
  }
  return res;
}

// ---------------------------------------------------------------------------
// CSV output
// ---------------------------------------------------------------------------

inline void write_results_csv(std::ostream& os, const CampaignResult& r) {
  os << "method,snr_db,ber,ber_ci,pe_theory,mean_iters,mean_selected,throughput_l100,throughput_l500,seed,realizations\n";
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const auto& c : r.cells) {
    if (c.ok == 0) continue;
    os << c.label << ',' << c.snr_db << ',' << c.ber() << ',' << c.ci().half_width() << ',' << c.pe_theory() << ','
       << c.mean_iters() << ',' << c.mean_selected() << ',' << c.throughput(100) << ',' << c.throughput(500) << ','
       << r.spec.seed << ',' << c.ok << '\n';
  }
}

inline void write_selections_csv(std::ostream& os, const CampaignResult& r) {
  os << "realization_seed,method,selected_count,selected_indices,iterations\n";
  for (const auto& s : r.selections) {
    os << s.realization_seed << ',' << to_string(s.selection) << ',' << s.selected.size() << ',';
    for (std::size_t i = 0; i < s.selected.size(); ++i) os << (i ? ";" : "") << s.selected[i];
    os << ',' << s.iterations << '\n';
  }
}

}  // namespace mpe
