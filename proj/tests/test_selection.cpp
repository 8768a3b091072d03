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

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <algorithm>

using namespace mpe;
using mpe::testing::make_channels;

TEST(Distance, RealCorrelationExamples) {
  const ComplexRow a = (ComplexRow(2) << cd(1, 0), cd(0, 0)).finished();
  const ComplexRow b = (ComplexRow(2) << cd(0, 0), cd(1, 0)).finished();
  const ComplexRow c = (ComplexRow(2) << cd(0, 1), cd(0, 0)).finished();
  EXPECT_DOUBLE_EQ(d_rc(a, a), 1.0);
  EXPECT_DOUBLE_EQ(d_rc(a, b), 0.0);
  // same line, quadrature phase: real correlation vanishes
  EXPECT_DOUBLE_EQ(d_rc(a, c), 0.0);
  EXPECT_NEAR(chordal_distance(a, c), 0.0, 1e-12);
  EXPECT_NEAR(chordal_distance(a, b), 1.0, 1e-12);
  // normalized by the weaker user, so it can exceed one
  const ComplexRow d = (ComplexRow(2) << cd(3, 0), cd(0, 0)).finished();
  EXPECT_DOUBLE_EQ(d_rc(a, d), 3.0);
  EXPECT_THROW(d_rc(a, ComplexRow::Zero(2)), DegenerateError);
}

TEST(Distance, Symmetric) {
  Rng rng(3);
  for (int t = 0; t < 100; ++t) {
    const ChannelSet ch = generate_channels(rng, 2, 4);
    EXPECT_DOUBLE_EQ(d_rc(ch.row(0), ch.row(1)), d_rc(ch.row(1), ch.row(0)));
  }
}

TEST(Gus, InitialK) {
  EXPECT_EQ(initial_k(1), 2);
  EXPECT_EQ(initial_k(4), 5);
  EXPECT_THROW(initial_k(0), ConfigError);
}

TEST(Gus, HandTracedExample) {
  // K=3 keeps {0,1}; K=2 keeps {0,2}, which has K-1 users, so it stops.
  const ChannelSet ch = make_channels({{cd(2, 0), cd(0, 0)}, {cd(0, 0), cd(1.5, 0)}, {cd(1, 0), cd(1, 0)}});
  const SelectionOutcome r = gus(ch);
  EXPECT_EQ(r.selected, (std::vector<Index>{0, 2}));
  EXPECT_EQ(r.iterations, 2);
  EXPECT_EQ(r.k_trace, (std::vector<int>{3, 2}));
  EXPECT_EQ(r.k_final, 2);
  EXPECT_DOUBLE_EQ(r.alpha_used, 0.5);
  EXPECT_EQ(r.flops, 88u);
}

TEST(Gus, OrthogonalEqualNormUsersAllSelected) {
  for (int m : {2, 3, 5}) {
    const ChannelSet ch(ComplexMat::Identity(m, m));
    const SelectionOutcome r = gus(ch);
    std::vector<Index> s = r.selected;
    std::ranges::sort(s);
    std::vector<Index> all(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) all[static_cast<std::size_t>(i)] = i;
    EXPECT_EQ(s, all);
  }
}

TEST(Gus, SelectedSetRespectsPackingLimit) {
  Rng rng(11);
  for (int t = 0; t < 300; ++t) {
    const int m = 2 + t % 3;
    const ChannelSet ch = generate_channels(rng, 20 + t % 40, m);
    const SelectionOutcome r = gus(ch);
    ASSERT_FALSE(r.selected.empty());
    EXPECT_GE(r.k_final, 1);
    EXPECT_LE(static_cast<int>(r.selected.size()), r.k_final);
    std::vector<Index> s = r.selected;
    std::ranges::sort(s);
    EXPECT_EQ(std::ranges::adjacent_find(s), s.end());
    // the strongest user always opens the set
    Index strongest = 0;
    for (Index j = 1; j < ch.users(); ++j)
      if (ch.norm2(j) > ch.norm2(strongest)) strongest = j;
    EXPECT_EQ(r.selected.front(), strongest);
    if (r.k_final > 1)
      for (std::size_t a = 0; a < r.selected.size(); ++a)
        for (std::size_t b = a + 1; b < r.selected.size(); ++b)
          EXPECT_LE(d_rc(ch.row(r.selected[a]), ch.row(r.selected[b])), 1.0 / (r.k_final - 1) + 1e-12);
  }
}

TEST(Gus, TerminatesWithinCaps) {
  Rng rng(13);
  for (int t = 0; t < 200; ++t) {
    const int m = 1 + t % 6;
    const ChannelSet ch = generate_channels(rng, 1 + t % 300, m);
    const SelectionOutcome r = gus(ch);
    EXPECT_LE(r.iterations, 3 * m);
    EXPECT_EQ(static_cast<int>(r.k_trace.size()), r.iterations);
    for (int k : r.k_trace) {
      EXPECT_GE(k, 1);
      EXPECT_LE(k, 2 * m);
    }
  }
  GusOptions tight;
  tight.outer_cap_factor = 1;
  const ChannelSet ch = generate_channels(17, 1000, 2);
  EXPECT_LE(gus(ch, tight).iterations, 2);
}

TEST(Gus, FixedAlpha) {
  GusOptions o;
  o.alpha = 0.0;
  const SelectionOutcome r = gus(generate_channels(19, 50, 3), o);
  EXPECT_DOUBLE_EQ(r.alpha_used, 0.0);
}

TEST(Gus, FlopsWithinBound) {
  Rng rng(23);
  for (int m : {2, 4, 6}) {
    for (int t = 0; t < 20; ++t) {
      const ChannelSet ch = generate_channels(rng, 1000, m);
      const SelectionOutcome r = gus(ch);
      EXPECT_LE(static_cast<double>(r.flops), gus_flop_bound(m, 1000));
      EXPECT_EQ(op_counter(ch), r.flops);
    }
  }
}

TEST(Gus, FlopsGrowLinearlyInPoolSize) {
  Rng rng(29);
  double f1 = 0.0, f2 = 0.0;
  for (int t = 0; t < 30; ++t) {
    f1 += static_cast<double>(gus(generate_channels(rng, 1000, 4)).flops);
    f2 += static_cast<double>(gus(generate_channels(rng, 4000, 4)).flops);
  }
  EXPECT_GT(f2 / f1, 3.0);
  EXPECT_LT(f2 / f1, 5.0);
}

TEST(Gus, SingleUserIsCheap) {
  for (int m : {1, 2, 4, 8}) {
    const SelectionOutcome r = gus(generate_channels(31, 1, m));
    EXPECT_EQ(r.selected, (std::vector<Index>{0}));
    EXPECT_LT(r.flops, static_cast<std::uint64_t>(10 * m));
  }
}

TEST(Gus, Deterministic) {
  const ChannelSet ch = generate_channels(37, 200, 4);
  const SelectionOutcome a = gus(ch), b = gus(ch);
  EXPECT_EQ(a.selected, b.selected);
  EXPECT_EQ(a.flops, b.flops);
}

TEST(Sus, AtMostAntennas) {
  Rng rng(41);
  for (int t = 0; t < 200; ++t) {
    const int m = 1 + t % 4;
    const ChannelSet ch = generate_channels(rng, 50, m);
    const SelectionOutcome r = sus(ch);
    EXPECT_GE(r.selected.size(), 1u);
    EXPECT_LE(static_cast<int>(r.selected.size()), m);
    Index strongest = 0;
    for (Index j = 1; j < ch.users(); ++j)
      if (ch.norm2(j) > ch.norm2(strongest)) strongest = j;
    EXPECT_EQ(r.selected.front(), strongest);
  }
}

TEST(Sus, OrthogonalPairAndCollinearUsers) {
  const ChannelSet ortho = make_channels({{cd(1, 0), cd(0, 0)}, {cd(0, 0), cd(0, 1)}});
  std::vector<Index> s = sus(ortho).selected;
  std::ranges::sort(s);
  EXPECT_EQ(s, (std::vector<Index>{0, 1}));
  const ChannelSet line = make_channels({{cd(1, 0), cd(1, 0)}, {cd(0, 2), cd(0, 2)}});
  EXPECT_EQ(sus(line).selected, (std::vector<Index>{1}));
  EXPECT_EQ(sus(ortho, 0.35, 1).selected.size(), 1u);
}

TEST(Sus, RejectsBadEpsilon) {
  const ChannelSet ch = generate_channels(43, 5, 2);
  EXPECT_THROW(sus(ch, 0.0), ConfigError);
  EXPECT_THROW(sus(ch, 1.0), ConfigError);
  EXPECT_THROW(sus(ch, -0.2), ConfigError);
}

TEST(Sus, EpsilonSweepMatchesDirectRuns) {
  Rng rng(47);
  std::vector<ChannelSet> pool;
  for (int t = 0; t < 50; ++t) pool.push_back(generate_channels(rng, 10, 2));
  const std::vector<double> eps{0.2, 0.35, 0.6};
  const std::vector<double> mean = sus_epsilon_sweep(pool, eps);
  ASSERT_EQ(mean.size(), 3u);
  for (std::size_t e = 0; e < eps.size(); ++e) {
    double s = 0.0;
    for (const auto& ch : pool) s += static_cast<double>(sus(ch, eps[e]).selected.size());
    EXPECT_DOUBLE_EQ(mean[e], s / 50.0);
  }
}
