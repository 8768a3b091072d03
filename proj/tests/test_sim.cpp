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

#include <sstream>

using namespace mpe;
using mpe::testing::make_channels;

TEST(Link, SnrConvention) {
  EXPECT_DOUBLE_EQ(snr_to_noise(10.0), 0.1);
  EXPECT_DOUBLE_EQ(snr_to_noise(0.0, 2.0), 2.0);
  EXPECT_NEAR(snr_to_noise(-5.0), 3.1622776601683795, 1e-15);
}

TEST(Link, ObservationIsFilteredSuperposition) {
  const ChannelSet ch = make_channels({{cd(1, 0), cd(0, 1)}, {cd(2, 0), cd(1, 1)}});
  ComplexMat U(2, 2);
  U << cd(1, 0), cd(0, 0), cd(0, 0), cd(1, 0);
  RealVec s(2);
  s << 1.0, -1.0;
  const Observation o = observe(0, U, ch, s, cd(0, 1), cd(0.5, 0));
  EXPECT_NEAR(std::abs(o.noiseless - cd(0, 1) * cd(1, -1)), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(o.noisy - cd(0, 1) * cd(1.5, -1)), 0.0, 1e-15);
}

TEST(Link, SingleUserBerMatchesTheory) {
  // y = s + z with unit noise variance: Pe = Q(sqrt 2)
  const ChannelSet ch = make_channels({{cd(1, 0)}});
  const ComplexMat U = ComplexMat::Identity(1, 1);
  const ReceiveFilters w{ComplexVec::Ones(1)};
  Rng rng(5);
  const ErrorCount c = count_errors(U, w, ch, 1.0, 1000000, rng);
  const double p = q_function(std::sqrt(2.0));
  const double sd = std::sqrt(p * (1 - p) / 1e6);
  EXPECT_EQ(c.bits, 1000000u);
  EXPECT_NEAR(c.rate(), p, 3.0 * sd);
}

TEST(Link, ZeroPrecoderIsAFairCoin) {
  const ChannelSet ch = generate_channels(7, 2, 2);
  const ReceiveFilters w{ComplexVec::Ones(2)};
  Rng rng(9);
  const ErrorCount c = count_errors(ComplexMat::Zero(2, 2), w, ch, 1.0, 100000, rng);
  EXPECT_NEAR(c.rate(), 0.5, 3.0 * std::sqrt(0.25 / 2e5));
}

TEST(Link, NoiselessZfIsErrorFree) {
  const ChannelSet ch = generate_channels(11, 3, 3);
  const SystemConfig cfg{3, 3, 1e-30, 1.0, {}};
  const PrecoderResult r = zf(ch, cfg);
  Rng rng(13);
  EXPECT_EQ(measure_ber(r, ch, cfg, 10000, rng), 0.0);
  EXPECT_THROW(measure_ber(r, ch, cfg, 0, rng), ConfigError);
}

TEST(Stats, WilsonInterval) {
  Interval a = wilson_interval(10, 100);
  EXPECT_NEAR(a.lo, 0.0552291370606751, 1e-14);
  EXPECT_NEAR(a.hi, 0.17436566150491345, 1e-14);
  a = wilson_interval(0, 50);
  EXPECT_NEAR(a.lo, 0.0, 1e-15);
  EXPECT_NEAR(a.hi, 0.07134759913335872, 1e-14);
  a = wilson_interval(500, 1000);
  EXPECT_NEAR(a.lo, 0.4690696003681042, 1e-14);
  EXPECT_NEAR(a.hi, 0.5309303996318958, 1e-14);
  a = wilson_interval(0, 0);
  EXPECT_EQ(a.lo, 0.0);
  EXPECT_EQ(a.hi, 1.0);
}

TEST(Stats, ExpectedThroughput) {
  EXPECT_DOUBLE_EQ(expected_throughput(0.0, 100, 3.19), 3.19);
  EXPECT_LT(expected_throughput(0.5, 100, 3.19), 1e-29);
  EXPECT_NEAR(expected_throughput(0.01, 100, 2.0), 2.0 * std::pow(0.99, 100), 1e-15);
  for (double pe : {1e-4, 1e-3, 0.05})
    EXPECT_LE(expected_throughput(pe, 500, 3.0), expected_throughput(pe, 100, 3.0));
  EXPECT_THROW(expected_throughput(-0.1, 100, 1.0), ConfigError);
  EXPECT_THROW(expected_throughput(0.1, 0, 1.0), ConfigError);
}

TEST(Campaign, SelectionNamesRoundTrip) {
  for (Selection s : {Selection::none, Selection::gus, Selection::sus}) EXPECT_EQ(selection_from_string(to_string(s)), s);
  EXPECT_THROW(selection_from_string("random"), ConfigError);
  EXPECT_EQ(series_label(Selection::gus, Method::mpe_joint), "gus+mpe_joint");
  EXPECT_EQ(series_label(Selection::none, Method::zf), "zf");
}

TEST(Campaign, ValidationNamesTheProblem) {
  CampaignSpec s;
  s.realizations = 0;
  EXPECT_THROW(s.validate(), ConfigError);
  s = {};
  s.selections = {Selection::gus};
  EXPECT_THROW(s.validate(), ConfigError);  // no pool size
  s = {};
  s.K = kMaxUsers + 1;
  EXPECT_THROW(s.validate(), ConfigError);
  s = {};
  s.snr_db = {};
  EXPECT_THROW(s.validate(), ConfigError);
}

namespace {

CampaignSpec small_spec() {
  CampaignSpec s;
  s.M = 2;
  s.K = 2;
  s.snr_db = {0.0, 10.0};
  s.realizations = 6;
  s.bits_per_realization = 200;
  s.methods = {Method::mpe_joint, Method::zf, Method::mrt};
  s.seed = 2024;
  return s;
}

std::string results_csv(const CampaignResult& r) {
  std::ostringstream os;
  write_results_csv(os, r);
  return os.str();
}

}  // namespace

TEST(Campaign, IndependentOfWorkerCount) {
  CampaignSpec s = small_spec();
  const CampaignResult a = run_campaign(s);
  s.workers = 3;
  const CampaignResult b = run_campaign(s);
  ASSERT_EQ(a.cells.size(), b.cells.size());
  for (std::size_t c = 0; c < a.cells.size(); ++c) {
    EXPECT_EQ(a.cells[c].errors, b.cells[c].errors);
    EXPECT_EQ(a.cells[c].pe_bits, b.cells[c].pe_bits);
    EXPECT_EQ(a.cells[c].iterations, b.cells[c].iterations);
  }
  EXPECT_EQ(results_csv(a), results_csv(b));
}

TEST(Campaign, TheoryColumnAveragesAchievedPe) {
  const CampaignSpec s = small_spec();
  const CampaignResult res = run_campaign(s);
  const CellResult* cell = res.find("zf", 10.0);
  ASSERT_NE(cell, nullptr);
  EXPECT_EQ(cell->ok, 6);
  EXPECT_EQ(cell->bits, 6u * 200u * 2u);
  double pe = 0.0;
  for (int r = 0; r < 6; ++r) {
    const ChannelSet ch = generate_channels(derive_seed(s.seed, {static_cast<std::uint64_t>(r)}), 2, 2);
    const SystemConfig cfg{2, 2, snr_to_noise(10.0), 1.0, {}};
    pe += achieved_pe(zf(ch, cfg), ch, cfg) / 6.0;
  }
  EXPECT_NEAR(cell->pe_theory(), pe, 1e-14);
  EXPECT_DOUBLE_EQ(cell->mean_selected(), 2.0);
}

TEST(Campaign, CsvSchema) {
  const CampaignResult res = run_campaign(small_spec());
  std::istringstream is(results_csv(res));
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line,
            "method,snr_db,ber,ber_ci,pe_theory,mean_iters,mean_selected,throughput_l100,throughput_l500,seed,"
            "realizations");
  int rows = 0;
  while (std::getline(is, line)) {
    ++rows;
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 10) << line;
  }
  EXPECT_EQ(rows, 6);
}

TEST(Campaign, SelectionRecordsAndSkippedBaselines) {
  CampaignSpec s;
  s.M = 2;
  s.K_T = 30;
  s.selections = {Selection::gus, Selection::sus};
  s.methods = {Method::zf, Method::mrt};
  s.snr_db = {10.0};
  s.realizations = 20;
  s.bits_per_realization = 50;
  const CampaignResult res = run_campaign(s);
  EXPECT_EQ(res.selections.size(), 40u);
  for (const auto& rec : res.selections) {
    EXPECT_GE(rec.selected.size(), 1u);
    if (rec.selection == Selection::sus) EXPECT_LE(rec.selected.size(), 2u);
  }
  // ZF needs K <= M, so GUS realizations with three users are skipped
  const CellResult* gzf = res.find("gus+zf", 10.0);
  const CellResult* gmrt = res.find("gus+mrt", 10.0);
  ASSERT_TRUE(gzf && gmrt);
  EXPECT_EQ(gmrt->ok, 20);
  EXPECT_EQ(gzf->ok + gzf->skipped, 20);
  EXPECT_EQ(res.find("sus+zf", 10.0)->ok, 20);
  std::ostringstream os;
  write_selections_csv(os, res);
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')),
            "realization_seed,method,selected_count,selected_indices,iterations");
}

TEST(Campaign, SolverFailuresAreRecordedNotFatal) {
  CampaignSpec s = small_spec();
  s.methods = {Method::mpe_joint, Method::mrt};
  s.mpe.inner.dykstra_max_cycles = 0;  // every projection reports failure
  const CampaignResult res = run_campaign(s);
  EXPECT_FALSE(res.failures.empty());
  EXPECT_GT(res.find("mpe_joint", 0.0)->failed, 0);
  EXPECT_EQ(res.find("mrt", 0.0)->ok, 6);
}

TEST(Campaign, TheoryDecreasesWithSnrAndBerFollows) {
  CampaignSpec s;
  s.M = 3;
  s.K = 3;
  s.methods = {Method::zf, Method::mmse};
  s.snr_db = {0.0, 5.0, 10.0, 15.0};
  s.realizations = 30;
  s.bits_per_realization = 400;
  const CampaignResult res = run_campaign(s);
  for (const std::string m : {"zf", "mmse"})
    for (std::size_t i = 1; i < s.snr_db.size(); ++i) {
      const CellResult* lo = res.find(m, s.snr_db[i - 1]);
      const CellResult* hi = res.find(m, s.snr_db[i]);
      EXPECT_LT(hi->pe_theory(), lo->pe_theory());
      EXPECT_LE(hi->ci().lo, lo->ci().hi);
    }
}
