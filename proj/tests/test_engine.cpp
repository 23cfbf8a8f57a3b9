#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "banditspec/engine.hpp"

using namespace banditspec;

namespace {

std::vector<Policy> all_policies(int K, int L) {
  std::vector<Policy> out = {UcbSpec(K, L), Exp3Spec(K, L)};
  for (int i = 0; i < K; ++i) out.push_back(FixedArm(i, K));
  return out;
}

// Stopping time of one arm sequence on a committed table, by direct scan.
long sequence_st(const std::vector<std::vector<int>>& y, const std::vector<int>& arms, long n) {
  long emitted = 0;
  for (std::size_t t = 0; t < arms.size(); ++t) {
    emitted += y[static_cast<std::size_t>(arms[t])][t];
    if (emitted >= n) return static_cast<long>(t + 1);
  }
  return -1;
}

}  // namespace

TEST(RunEpisode, ConstantEnvironmentStopsAtThree) {
  const EnvSpec spec = EnvSpec::constant(4, {5, 5, 5});
  for (const auto& policy : all_policies(3, 4)) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto out = run_episode(policy, spec, ResponseLengthModel::fixed(12), seed, true);
      EXPECT_EQ(out.stopping_time, 3) << policy_name(policy);
      EXPECT_EQ(out.total_tokens, 12);
      ASSERT_EQ(out.rounds.size(), 3u);
      EXPECT_EQ(out.rounds.back().emitted, 2);
      EXPECT_EQ(out.rounds.back().accepted, 5);
      EXPECT_EQ(out.rounds.back().remaining, 0);
    }
  }
}

TEST(RunEpisode, SingleTokenBudget) {
  const EnvSpec spec = EnvSpec::stationary(4, {0.2, 0.8});
  for (const auto& policy : all_policies(2, 4)) {
    const auto out = run_episode(policy, spec, ResponseLengthModel::fixed(1), 3);
    EXPECT_EQ(out.stopping_time, 1);
    EXPECT_EQ(out.pulls[0] + out.pulls[1], 1);
  }
}

TEST(RunEpisode, FixedArmPullsOnlyItsArm) {
  const EnvSpec spec = EnvSpec::stationary(4, {0.2, 0.8, 0.5});
  const auto out = run_episode(FixedArm(1, 3), spec, ResponseLengthModel::fixed(500), 3);
  EXPECT_EQ(out.pulls[0], 0);
  EXPECT_EQ(out.pulls[2], 0);
  EXPECT_EQ(out.pulls[1], out.stopping_time);
}

TEST(RunEpisode, MismatchedShapesRejected) {
  const EnvSpec spec = EnvSpec::stationary(4, {0.2, 0.8});
  EXPECT_THROW(run_episode(UcbSpec(3, 4), spec, ResponseLengthModel::fixed(10), 0), ConfigError);
  EXPECT_THROW(run_episode(UcbSpec(2, 8), spec, ResponseLengthModel::fixed(10), 0), ConfigError);
  EXPECT_THROW(run_episode(Exp3Spec(2, 3), spec, ResponseLengthModel::fixed(10), 0), ConfigError);
  EXPECT_THROW(run_episode(FixedArm(0, 1), spec, ResponseLengthModel::fixed(10), 0), ConfigError);
}

TEST(RunEpisode, InvariantsAcrossKindsAndPolicies) {
  const std::vector<EnvSpec> specs = {
      EnvSpec::stationary(4, {0.9, 0.6, 0.3}), EnvSpec::correlated(4, {{4.0, 1.0}, {3.0, 1.0}, {2.0, 1.0}}),
      EnvSpec::blocks(4, 25, {0.9, 0.7, 0.5}, 0.3, 11), EnvSpec::constant(4, {2, 5, 1}),
      EnvSpec::trace(4, {{1, 2}, {5, 4, 3}, {1}})};
  RngStream gen(13);
  for (const auto& spec : specs) {
    for (const auto& policy : all_policies(3, 4)) {
      for (int e = 0; e < 40; ++e) {
        const auto rlm = e % 2 == 0 ? ResponseLengthModel::fixed(1 + static_cast<long>(gen.uniform() * 3000))
                                    : ResponseLengthModel::geometric(50.0 + gen.uniform() * 500);
        const auto out = run_episode(policy, spec, rlm, gen.next_u64());
        const long n = out.total_tokens;
        EXPECT_EQ(std::accumulate(out.pulls.begin(), out.pulls.end(), 0L), out.stopping_time);
        EXPECT_LE(out.stopping_time, n);
        EXPECT_GE(out.stopping_time * 5, n);
        if (rlm.kind == ResponseLengthModel::Kind::fixed) {
          EXPECT_EQ(n, rlm.fixed_len);
        }
      }
    }
  }
}

TEST(RunEpisode, BudgetIndependentOfPolicy) {
  // Same episode seed -> same drawn N for every policy.
  const EnvSpec spec = EnvSpec::correlated(4, {{4.0, 1.0}, {2.0, 1.0}});
  const auto rlm = ResponseLengthModel::geometric(300.0);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const long n = run_episode(FixedArm(0, 2), spec, rlm, seed).total_tokens;
    for (const auto& policy : all_policies(2, 4)) {
      EXPECT_EQ(run_episode(policy, spec, rlm, seed).total_tokens, n);
    }
  }
}

TEST(RunEpisode, AdversarialValuesIndependentOfPolicy) {
  const EnvSpec spec = EnvSpec::blocks(4, 10, {0.8, 0.6, 0.4}, 0.2, 77);
  const auto table = materialize(spec, 2000);
  for (const auto& policy : all_policies(3, 4)) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto out = run_episode(policy, spec, ResponseLengthModel::fixed(1500), seed, true);
      for (const auto& r : out.rounds) {
        ASSERT_EQ(r.accepted, table[static_cast<std::size_t>(r.arm)][static_cast<std::size_t>(r.t - 1)]);
      }
    }
  }
}

TEST(RunBatch, SingleEpisodeHasZeroError) {
  const EnvSpec spec = EnvSpec::stationary(4, {0.5, 0.7});
  const auto b = run_batch(UcbSpec(2, 4), spec, ResponseLengthModel::fixed(300), 5, 1);
  const auto single = run_episode(UcbSpec(2, 4), spec, ResponseLengthModel::fixed(300), episode_seed(5, 0));
  EXPECT_EQ(b.mean_st, static_cast<double>(single.stopping_time));
  EXPECT_EQ(b.std_error, 0.0);
  EXPECT_THROW(run_batch(UcbSpec(2, 4), spec, ResponseLengthModel::fixed(300), 5, 0), ConfigError);
}

TEST(RunBatch, StandardErrorDefinition) {
  const EnvSpec spec = EnvSpec::stationary(4, {0.5, 0.7});
  const auto b = run_batch(Exp3Spec(2, 4), spec, ResponseLengthModel::fixed(300), 5, 40);
  double mean = 0.0;
  for (long st : b.stopping_times) mean += static_cast<double>(st);
  mean /= 40.0;
  double ss = 0.0;
  for (long st : b.stopping_times) ss += (st - mean) * (st - mean);
  EXPECT_NEAR(b.mean_st, mean, 1e-12);
  EXPECT_NEAR(b.std_error, std::sqrt(ss / 39.0) / std::sqrt(40.0), 1e-12);
  EXPECT_NEAR(b.pull_fractions[0] + b.pull_fractions[1], 1.0, 1e-12);
}

TEST(RunBatch, DeterministicAcrossRunsAndThreadCounts) {
  const EnvSpec spec = EnvSpec::correlated(4, {{4.0, 1.0}, {3.0, 1.0}});
  const auto rlm = ResponseLengthModel::geometric(400.0);
  for (const auto& policy : all_policies(2, 4)) {
    BatchOptions serial{1, 3};
    BatchOptions threaded{4, 3};
    const auto a = run_batch(policy, spec, rlm, 99, 64, serial);
    const auto b = run_batch(policy, spec, rlm, 99, 64, serial);
    const auto c = run_batch(policy, spec, rlm, 99, 64, threaded);
    EXPECT_EQ(a, b);
    EXPECT_EQ(a, c);
    EXPECT_EQ(a.round_logs.size(), 3u);
  }
}

TEST(RunBatch, BestArmMatchesRenewalApproximation) {
  const EnvSpec spec = EnvSpec::stationary(4, {0.9});
  BatchOptions options;
  options.jobs = 0;
  const auto b = run_batch(FixedArm(0, 1), spec, ResponseLengthModel::fixed(10000), 1, 2000, options);
  const double renewal = 10000.0 / 4.0951;
  EXPECT_NEAR(b.mean_st, renewal, 0.02 * renewal);
}

TEST(RunBatch, CommonRandomNumbersAcrossFixedArms) {
  const EnvSpec spec = EnvSpec::stationary(4, {0.9, 0.2});
  const auto rlm = ResponseLengthModel::geometric(500.0);
  const auto a = run_batch(FixedArm(0, 2), spec, rlm, 4, 100);
  const auto b = run_batch(FixedArm(1, 2), spec, rlm, 4, 100);
  EXPECT_EQ(a.total_tokens, b.total_tokens);
}

TEST(OracleBestFixedArm, SingleArm) {
  const auto best = oracle_best_fixed_arm(EnvSpec::stationary(4, {0.4}), ResponseLengthModel::fixed(100), 1, 20);
  EXPECT_EQ(best.arm, 0);
  EXPECT_EQ(best.per_arm.size(), 1u);
}

TEST(OracleBestFixedArm, StationaryPicksHighestMean) {
  const auto best = oracle_best_fixed_arm(EnvSpec::stationary(4, {0.9, 0.6, 0.3}),
                                          ResponseLengthModel::fixed(2000), 1, 200);
  EXPECT_EQ(best.arm, 0);
  EXPECT_LT(best.per_arm[0].mean_st, best.per_arm[1].mean_st);
  EXPECT_LT(best.per_arm[1].mean_st, best.per_arm[2].mean_st);
}

TEST(OracleBestFixedArm, DominantArmInCommittedMatrix) {
  // Arm 1 emits strictly more than arm 0 in every round.
  std::vector<std::vector<int>> rows(2, std::vector<int>(300));
  RngStream gen(3);
  for (int t = 0; t < 300; ++t) {
    rows[0][static_cast<std::size_t>(t)] = 1 + static_cast<int>(gen.uniform() * 3);
    rows[1][static_cast<std::size_t>(t)] = rows[0][static_cast<std::size_t>(t)] + 1 + static_cast<int>(gen.uniform() * 2);
  }
  const EnvSpec spec = EnvSpec::table(4, rows);
  const auto best = oracle_best_fixed_arm(spec, ResponseLengthModel::fixed(400), 1, 3);
  EXPECT_EQ(best.arm, 1);
  long emitted = 0;
  long t = 0;
  while (emitted < 400) emitted += rows[1][static_cast<std::size_t>(t++)];
  EXPECT_EQ(best.per_arm[1].mean_st, static_cast<double>(t));
}

TEST(OracleBestFixedArm, TiesGoToLowestIndex) {
  const auto best = oracle_best_fixed_arm(EnvSpec::constant(4, {3, 3}), ResponseLengthModel::fixed(30), 1, 5);
  EXPECT_EQ(best.arm, 0);
}

TEST(SmallInstance, TwoRowExample) {
  const EnvSpec spec = EnvSpec::table(4, {std::vector<int>(10, 3), std::vector<int>(10, 1)});
  const auto report = exhaustive_small_instance_check(spec, 9, 10, all_policies(2, 4), 5);
  EXPECT_EQ(*std::min_element(report.fixed_arm_st.begin(), report.fixed_arm_st.end()), 3);
  EXPECT_EQ(report.min_st, 3);
  EXPECT_EQ(report.max_st, 9);
  EXPECT_TRUE(report.passed());
}

TEST(SmallInstance, SingleArmHasOneSequence) {
  const EnvSpec spec = EnvSpec::table(4, {{2, 5, 1, 3, 4, 2, 2, 5, 1, 1}});
  const auto report = exhaustive_small_instance_check(spec, 13, 10, all_policies(1, 4), 3);
  EXPECT_EQ(report.sequences, 1);
  EXPECT_EQ(report.min_st, report.max_st);
  EXPECT_TRUE(report.passed());
}

TEST(SmallInstance, EnumerationMatchesIndependentScan) {
  RngStream gen(55);
  for (int trial = 0; trial < 10; ++trial) {
    const int K = 2 + static_cast<int>(gen.uniform() * 2);
    const long n = 5 + static_cast<long>(gen.uniform() * 20);
    const int L = 4;
    std::vector<std::vector<int>> rows(static_cast<std::size_t>(K), std::vector<int>(10));
    for (auto& row : rows) {
      for (int& y : row) y = static_cast<int>(std::ceil(n / 10.0)) + static_cast<int>(gen.uniform() * (L + 2 - std::ceil(n / 10.0)));
    }
    for (auto& row : rows) {
      for (int& y : row) y = std::min(y, L + 1);
    }
    const auto report = exhaustive_small_instance_check(EnvSpec::table(L, rows), n, 10, all_policies(K, L), 3);
    // Independent odometer over all K^10 arm sequences.
    long lo = n + 1;
    long hi = 0;
    std::vector<int> arms(10, 0);
    while (true) {
      const long st = sequence_st(rows, arms, n);
      ASSERT_GT(st, 0);
      lo = std::min(lo, st);
      hi = std::max(hi, st);
      int d = 0;
      while (d < 10 && ++arms[static_cast<std::size_t>(d)] == K) arms[static_cast<std::size_t>(d++)] = 0;
      if (d == 10) break;
    }
    EXPECT_EQ(report.min_st, lo);
    EXPECT_EQ(report.max_st, hi);
    EXPECT_GE(report.min_st, (n + L) / (L + 1));
    EXPECT_TRUE(report.passed());
  }
}

TEST(SmallInstance, RejectsLargeInstances) {
  const EnvSpec spec = EnvSpec::table(4, {std::vector<int>(10, 1), std::vector<int>(10, 1)});
  EXPECT_THROW(exhaustive_small_instance_check(spec, 31, 10, {}, 1), ConfigError);
  EXPECT_THROW(exhaustive_small_instance_check(spec, 20, 10, {}, 1), ConfigError);  // needs 20 rounds
  EXPECT_THROW(exhaustive_small_instance_check(EnvSpec::constant(4, {1, 1, 1, 1}), 5, 5, {}, 1), ConfigError);
  EXPECT_THROW(exhaustive_small_instance_check(EnvSpec::stationary(4, {0.5}), 5, 5, {}, 1), ConfigError);
}
