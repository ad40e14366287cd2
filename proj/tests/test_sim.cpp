#include <gtest/gtest.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <set>
#include <vector>

#include "faros/results.hpp"
#include "faros/sim.hpp"
#include "scenario.hpp"

using namespace faros;

TEST(SampleClients, AllWhenKEqualsTotal) {
  std::vector<int> all(17);
  std::iota(all.begin(), all.end(), 0);
  EXPECT_EQ(sample_clients(17, 17, 3, 9), all);
}

TEST(SampleClients, DeterministicDistinctSorted) {
  for (int round = 1; round < 200; ++round) {
    const auto a = sample_clients(50, 10, round, 4);
    ASSERT_EQ(a, sample_clients(50, 10, round, 4));
    ASSERT_TRUE(std::is_sorted(a.begin(), a.end()));
    ASSERT_EQ(std::set<int>(a.begin(), a.end()).size(), 10u);
    ASSERT_GE(a.front(), 0);
    ASSERT_LT(a.back(), 50);
  }
  EXPECT_NE(sample_clients(50, 10, 1, 4), sample_clients(50, 10, 2, 4));
  EXPECT_THROW(sample_clients(5, 6, 1, 1), ConfigError);
  EXPECT_THROW(sample_clients(5, 0, 1, 1), ConfigError);
}

// Each id is picked with probability p = k/total per round, so its count over
// 10,000 rounds is binomial. The 3 sigma band is applied family-wise over the
// 50 ids (Sidak: per-id z = 4.0 keeps the overall false-alarm rate at 0.27%).
// The chi-square statistic sum (c - mean)^2 / (mean (1 - p)) has 49 dof and
// must stay below its 99.9% quantile, 85.35.
TEST(SampleClients, UniformOverTenThousandRounds) {
  const int total = 50, k = 10, rounds = 10000;
  std::vector<int> count(total, 0);
  for (int r = 1; r <= rounds; ++r)
    for (int id : sample_clients(total, k, r, 123)) ++count[id];
  const double p = static_cast<double>(k) / total;
  const double mean = rounds * p, sd = std::sqrt(rounds * p * (1 - p));
  double chi2 = 0.0;
  for (int c : count) {
    EXPECT_LE(std::abs(c - mean), 4.0 * sd);
    chi2 += (c - mean) * (c - mean) / mean;
  }
  EXPECT_LT(chi2 / (1 - p), 85.35);
}

TEST(SampleClients, ForcedPinsRosterCount) {
  for (int round = 1; round < 100; ++round) {
    const auto ids = sample_clients_forced(50, 10, 10, 3, round, 5);
    ASSERT_EQ(ids.size(), 10u);
    ASSERT_EQ(std::count_if(ids.begin(), ids.end(), [](int id) { return id < 10; }), 3);
    ASSERT_EQ(std::set<int>(ids.begin(), ids.end()).size(), 10u);
  }
  EXPECT_THROW(sample_clients_forced(50, 10, 2, 3, 1, 5), ConfigError);
}

TEST(SimConfig, ResolveChecks) {
  auto c = scenario::standard();
  c.clients_per_round = 60;
  EXPECT_THROW(c.resolve(), ConfigError);
  c = scenario::standard();
  c.defense.accept_count = 11;
  EXPECT_THROW(c.resolve(), ConfigError);
  c = scenario::standard();
  c.malicious_count = 30;
  EXPECT_FALSE(c.resolve().empty());
  c = scenario::standard();
  c.force_c_per_round = 5;
  EXPECT_FALSE(c.resolve().empty());
  c = scenario::standard();
  EXPECT_TRUE(c.resolve().empty());
  EXPECT_EQ(c.model.input_dim, 16);
  c.attack_boost = 0;
  c.resolve();
  EXPECT_EQ(c.attack.boost, 10.0);
}

TEST(RunRound, CleanCountsAreZero) {
  auto c = scenario::clean();
  c.rounds = 10;
  for (const auto& r : run_simulation(c)) {
    EXPECT_EQ(r.tp, 0);
    EXPECT_EQ(r.fn, 0);
    EXPECT_TRUE(r.malicious_selected.empty());
  }
}

TEST(RunRound, FedAvgAndAcceptAllFarosShareTrajectory) {
  auto c = scenario::clean(3);
  c.rounds = 15;
  c.defense.kind = DefenseKind::kFedAvg;
  Simulation a(c);
  c.defense.kind = DefenseKind::kFaros;
  c.defense.accept_count = c.clients_per_round;
  Simulation b(c);
  SimState sa = a.initial_state(), sb = b.initial_state();
  for (int r = 0; r < c.rounds; ++r) {
    a.run_round(sa);
    b.run_round(sb);
    ASSERT_EQ(sa.global, sb.global) << "round " << r + 1;
  }
}

TEST(RunRound, ConservationAndConfusionCounts) {
  auto c = scenario::standard(5);
  c.rounds = 20;
  c.defense.accept_count = 6;
  Simulation sim(c);
  SimState st = sim.initial_state();
  for (int r = 0; r < c.rounds; ++r) {
    const auto ids = sim.sample(st.round + 1);
    const auto rec = sim.run_round(st);
    ASSERT_EQ(rec.accepted.size(), 6u);
    int mal = 0, hon = 0;
    for (int id : ids) (sim.is_malicious(id) ? mal : hon) += 1;
    ASSERT_EQ(mal + hon, static_cast<int>(ids.size()));
    ASSERT_EQ(static_cast<int>(rec.malicious_selected.size()), mal);
    ASSERT_EQ(rec.tp + rec.fn, mal);
    int accepted_mal = 0, rejected_hon = 0;
    for (int id : ids) {
      const bool acc = std::binary_search(rec.accepted.begin(), rec.accepted.end(), id);
      if (sim.is_malicious(id) && acc) ++accepted_mal;
      if (!sim.is_malicious(id) && !acc) ++rejected_hon;
    }
    ASSERT_EQ(rec.fn, accepted_mal);
    ASSERT_EQ(rec.fp, rejected_hon);
    ASSERT_EQ(rec.tp + rec.fp + static_cast<int>(rec.accepted.size()), 10);
  }
}

TEST(RunRound, SummaryMatchesRecountFromIds) {
  auto c = scenario::standard(6);
  c.rounds = 25;
  c.defense.accept_count = 6;
  Simulation sim(c);
  const auto recs = sim.run();
  double p = 0, r = 0;
  int np = 0, nr = 0;
  for (const auto& rec : recs) {
    int tp = 0, fp = 0, fn = 0;
    for (int id : rec.malicious_selected)
      (std::binary_search(rec.accepted.begin(), rec.accepted.end(), id) ? fn : tp) += 1;
    fp = 10 - static_cast<int>(rec.accepted.size()) - tp;
    ASSERT_EQ(tp, rec.tp);
    ASSERT_EQ(fp, rec.fp);
    ASSERT_EQ(fn, rec.fn);
    if (tp + fp) p += static_cast<double>(tp) / (tp + fp), ++np;
    if (tp + fn) r += static_cast<double>(tp) / (tp + fn), ++nr;
  }
  const auto s = summarize(recs);
  ASSERT_TRUE(s.mean_detection_precision && s.mean_detection_recall);
  EXPECT_DOUBLE_EQ(*s.mean_detection_precision, p / np);
  EXPECT_DOUBLE_EQ(*s.mean_detection_recall, r / nr);
}

TEST(RunRound, OneRoundUnderOneSecondAtDefaultScale) {
  SimConfig c;  // 200 clients, 20 per round
  c.rounds = 1;
  Simulation sim(c);
  SimState st = sim.initial_state();
  const auto t0 = std::chrono::steady_clock::now();
  sim.run_round(st);
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_LT(s, 1.0);
}

TEST(RunSimulation, BitIdenticalRepeatsAndThreadCounts) {
  auto c = scenario::standard(7);
  c.rounds = 12;
  c.attack.kind = AttackKind::kConstrainAndScale;
  const auto a = run_simulation(c);
  c.threads = 4;
  const auto b = run_simulation(c);
  c.threads = 1;
  const auto d = run_simulation(c);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_TRUE(a[i].same_outcome(b[i])) << i;
    EXPECT_TRUE(a[i].same_outcome(d[i])) << i;
  }
  EXPECT_EQ(results_csv(a), results_csv(b));
}

TEST(RunSimulation, SeedsDiffer) {
  auto c = scenario::standard(1);
  c.rounds = 3;
  const auto a = run_simulation(c);
  c.master_seed = 2;
  EXPECT_NE(results_csv(a), results_csv(run_simulation(c)));
}

TEST(RunSimulation, EvalEveryKeepsEvaluatedRounds) {
  auto c = scenario::clean();
  c.rounds = 10;
  c.eval_every = 3;
  const auto recs = run_simulation(c);
  ASSERT_EQ(recs.size(), 3u);
  EXPECT_EQ(recs.back().round, 9);
  for (const auto& r : recs) EXPECT_FALSE(std::isnan(r.acc));
}

TEST(RunSimulation, CleanRunReachesNinetyPercent) {
  SimConfig c;
  c.eval_every = 100;
  const auto recs = run_simulation(c);
  ASSERT_FALSE(recs.empty());
  EXPECT_GE(recs.back().acc, 0.90);
}

TEST(RunSimulation, FedAvgModelReplacementImplantsBackdoorByRoundFifty) {
  SimConfig c;
  c.malicious_count = 4;
  c.force_c_per_round = 0;
  c.rounds = 50;
  c.eval_every = 50;
  c.attack.kind = AttackKind::kModelReplacement;
  c.attack_boost = 20;
  c.defense.kind = DefenseKind::kFedAvg;
  const auto recs = run_simulation(c);
  ASSERT_FALSE(recs.empty());
  EXPECT_GE(recs.back().asr, 0.80);
}
