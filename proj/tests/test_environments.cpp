#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <sstream>
#include <vector>

#include "banditspec/acceptance_csv.hpp"
#include "banditspec/environments.hpp"

using namespace banditspec;

namespace {

double tgd_mean_ref(double p, int L) {
  double s = 0.0;
  for (int x = 1; x <= L; ++x) s += x * std::pow(p, x - 1) * (1.0 - p);
  return s + (L + 1) * std::pow(p, L);
}

double tgd_var_ref(double p, int L) {
  const double m = tgd_mean_ref(p, L);
  double s = 0.0;
  for (int x = 1; x <= L; ++x) s += (x - m) * (x - m) * std::pow(p, x - 1) * (1.0 - p);
  return s + (L + 1 - m) * (L + 1 - m) * std::pow(p, L);
}

}  // namespace

TEST(ResponseLength, FixedBudget) {
  const EnvSpec spec = EnvSpec::stationary(4, {0.5});
  Environment env(spec, ResponseLengthModel::fixed(100), 1);
  EXPECT_EQ(env.remaining(), 100);
  EXPECT_EQ(env.total_length(), 100);
}

TEST(ResponseLength, GeometricMeanWithinThreeSigma) {
  const auto rlm = ResponseLengthModel::geometric(200.0);
  const int n = 100000;
  double sum = 0.0;
  long min_len = 1L << 40;
  for (int i = 0; i < n; ++i) {
    RngStream rng(derive_seed(11, static_cast<std::uint64_t>(i)));
    const long len = rlm.draw(rng);
    min_len = std::min(min_len, len);
    sum += static_cast<double>(len);
  }
  const double q = 1.0 / 200.0;
  const double sd = std::sqrt((1.0 - q) / (q * q));
  EXPECT_NEAR(sum / n, 200.0, 3.0 * sd / std::sqrt(n));
  EXPECT_GE(min_len, 1);
}

TEST(ResponseLength, InvalidModelsRejected) {
  EXPECT_THROW(ResponseLengthModel::fixed(0).validate(), ConfigError);
  EXPECT_THROW(ResponseLengthModel::geometric(1.0).validate(), ConfigError);
}

TEST(EnvStep, ClipsFinalRound) {
  const EnvSpec spec = EnvSpec::constant(4, {5});
  Environment env(spec, ResponseLengthModel::fixed(3), 0);
  const StepResult r = env.step(0, 1);
  EXPECT_EQ(r.accepted_len, 5);
  EXPECT_EQ(r.emitted_tokens, 3);
  EXPECT_TRUE(r.eos_reached);
  EXPECT_EQ(env.remaining(), 0);
}

TEST(EnvStep, StepAfterEosThrows) {
  const EnvSpec spec = EnvSpec::constant(4, {5});
  Environment env(spec, ResponseLengthModel::fixed(3), 0);
  env.step(0, 1);
  EXPECT_THROW(env.step(0, 2), StateError);
}

TEST(EnvStep, BadArmThrows) {
  const EnvSpec spec = EnvSpec::constant(4, {5, 2});
  Environment env(spec, ResponseLengthModel::fixed(30), 0);
  EXPECT_THROW(env.step(2, 1), DomainError);
  EXPECT_THROW(env.step(-1, 1), DomainError);
}

TEST(EnvStep, StationaryMeanWithinThreeSigma) {
  const EnvSpec spec = EnvSpec::stationary(4, {0.9});
  const long n = 100000;
  Environment env(spec, ResponseLengthModel::fixed(10 * n), 3);
  double sum = 0.0;
  for (long t = 1; t <= n; ++t) {
    const auto r = env.step(0, t);
    ASSERT_GE(r.accepted_len, 1);
    ASSERT_LE(r.accepted_len, 5);
    sum += r.accepted_len;
  }
  EXPECT_NEAR(sum / n, 4.0951, 3.0 * std::sqrt(tgd_var_ref(0.9, 4) / n));
}

TEST(EnvStep, HistoryCorrelatedConditionalMean) {
  // Arm 0 sets up a one-round history; arm 1 (mean 3, amplitude 1) is then
  // sampled. Conditioning on each possible prefix value, the mean of the next
  // draw must stay at 3 while its spread changes with the prefix.
  const EnvSpec spec = EnvSpec::correlated(4, {{3.0, 1.0}, {3.0, 1.0}});
  std::map<int, std::pair<double, double>> by_prefix;  // sum, sum of squares
  std::map<int, long> count;
  for (long e = 0; e < 400000; ++e) {
    Environment env(spec, ResponseLengthModel::fixed(1000), derive_seed(21, static_cast<std::uint64_t>(e)));
    const int prefix = env.step(0, 1).emitted_tokens;
    const int y = env.step(1, 2).accepted_len;
    ASSERT_GE(y, 1);
    ASSERT_LE(y, 5);
    by_prefix[prefix].first += y;
    by_prefix[prefix].second += static_cast<double>(y) * y;
    ++count[prefix];
  }
  std::map<int, double> variance;
  for (const auto& [prefix, sums] : by_prefix) {
    const double n = static_cast<double>(count[prefix]);
    if (n < 10000) continue;
    const double mean = sums.first / n;
    const double var = sums.second / n - mean * mean;
    variance[prefix] = var;
    EXPECT_NEAR(mean, 3.0, 3.0 * std::sqrt(var / n)) << "prefix " << prefix;
  }
  ASSERT_TRUE(variance.count(2) && variance.count(3));
  // Odd prefix: values {2, 4}, variance 1. Even prefix: {2.5, 3.5} rounded, variance 0.5.
  EXPECT_NEAR(variance[3], 1.0, 0.05);
  EXPECT_NEAR(variance[2], 0.5, 0.05);
}

TEST(EnvSpecValidation, Errors) {
  EXPECT_THROW(validate(EnvSpec::trace(4, {{}})), ConfigError);
  EXPECT_THROW(validate(EnvSpec::trace(4, {})), ConfigError);
  EXPECT_THROW(validate(EnvSpec::constant(4, {6})), ConfigError);
  EXPECT_THROW(validate(EnvSpec::correlated(4, {{1.5, 1.0}})), ConfigError);
  EXPECT_THROW(validate(EnvSpec::blocks(4, 0, {0.5}, 0.5, 1)), ConfigError);
  EXPECT_THROW(validate(EnvSpec::blocks(4, 10, {1.5}, 0.5, 1)), ConfigError);
  EXPECT_THROW(validate(EnvSpec::table(4, {{1, 2}, {3}})), ConfigError);
  EXPECT_THROW(Environment(EnvSpec::trace(4, {{}}), ResponseLengthModel::fixed(3), 0), ConfigError);
}

TEST(AdversarialMatrix, SameSeedSameMatrix) {
  const EnvSpec a = EnvSpec::blocks(4, 7, {0.9, 0.6}, 0.3, 42);
  const EnvSpec b = EnvSpec::blocks(4, 7, {0.9, 0.6}, 0.3, 42);
  const EnvSpec c = EnvSpec::blocks(4, 7, {0.9, 0.6}, 0.3, 43);
  EXPECT_EQ(materialize(a, 500), materialize(b, 500));
  EXPECT_NE(materialize(a, 500), materialize(c, 500));
}

TEST(AdversarialMatrix, IndependentOfEpisodeSeedAndQueryOrder) {
  const EnvSpec spec = EnvSpec::blocks(4, 5, {0.8, 0.8, 0.8}, 0.2, 9);
  const auto table = materialize(spec, 60);
  // Two environments with different episode seeds, queried in different arm orders.
  Environment e1(spec, ResponseLengthModel::fixed(100000), 1);
  Environment e2(spec, ResponseLengthModel::fixed(100000), 2);
  for (long t = 1; t <= 60; ++t) {
    const int a1 = static_cast<int>(t % 3);
    const int a2 = static_cast<int>((t * 7 + 1) % 3);
    EXPECT_EQ(e1.step(a1, t).accepted_len, table[static_cast<std::size_t>(a1)][static_cast<std::size_t>(t - 1)]);
    EXPECT_EQ(e2.step(a2, t).accepted_len, table[static_cast<std::size_t>(a2)][static_cast<std::size_t>(t - 1)]);
  }
}

TEST(AdversarialMatrix, BlocksFavorRotatingArm) {
  const EnvSpec spec = EnvSpec::blocks(4, 100, {0.9, 0.9}, 0.1, 5);
  const auto table = materialize(spec, 400);
  for (int block = 0; block < 4; ++block) {
    double sums[2] = {0.0, 0.0};
    for (int t = block * 100; t < (block + 1) * 100; ++t) {
      for (int i = 0; i < 2; ++i) sums[i] += table[static_cast<std::size_t>(i)][static_cast<std::size_t>(t)];
    }
    const int favored = block % 2;
    EXPECT_GT(sums[favored], sums[1 - favored]) << "block " << block;
  }
}

TEST(TraceReplay, Cyclic) {
  const EnvSpec spec = EnvSpec::trace(4, {{1, 2, 3}, {5}});
  Environment env(spec, ResponseLengthModel::fixed(1000), 0);
  const int expected[] = {1, 2, 3, 1, 2, 3, 1};
  for (long t = 1; t <= 7; ++t) EXPECT_EQ(env.step(0, t).accepted_len, expected[t - 1]);
  EXPECT_EQ(env.step(1, 8).accepted_len, 5);
}

TEST(FixedArmExpectedSt, ConstantArmHandSimulation) {
  const EnvSpec spec = EnvSpec::constant(4, {5});
  const auto r = env_fixed_arm_expected_st(spec, ResponseLengthModel::fixed(12), 0);
  EXPECT_TRUE(r.exact);
  EXPECT_EQ(r.mean_st, 3.0);
  EXPECT_EQ(exact_fixed_arm_st(spec, 0, 12), 3);
}

TEST(FixedArmExpectedSt, SingleTokenBudget) {
  for (const EnvSpec& spec : {EnvSpec::constant(4, {5}), EnvSpec::stationary(4, {0.3}),
                              EnvSpec::correlated(4, {{3.0, 1.0}}), EnvSpec::trace(4, {{2, 1}})}) {
    const auto r = env_fixed_arm_expected_st(spec, ResponseLengthModel::fixed(1), 0, 7, 50);
    EXPECT_EQ(r.mean_st, 1.0) << spec.kind_name();
  }
}

TEST(FixedArmExpectedSt, RenewalCrossCheck) {
  const EnvSpec spec = EnvSpec::stationary(4, {0.9});
  const auto r = env_fixed_arm_expected_st(spec, ResponseLengthModel::fixed(10000), 0, 3, 300);
  const double renewal = 10000.0 / tgd_mean_ref(0.9, 4);
  EXPECT_NEAR(r.renewal_approx, renewal, 1e-9);
  EXPECT_NEAR(r.mean_st, renewal, 0.02 * renewal);
  EXPECT_GT(r.std_error, 0.0);
}

TEST(EnvInvariants, EveryKindRespectsBudgetAndLengthBounds) {
  // Random arm sequences across every environment kind.
  const std::vector<EnvSpec> specs = {
      EnvSpec::stationary(4, {0.9, 0.2}), EnvSpec::correlated(6, {{4.0, 1.5}, {2.0, 1.0}}),
      EnvSpec::blocks(3, 4, {0.7, 0.5}, 0.1, 3), EnvSpec::constant(5, {6, 1}),
      EnvSpec::trace(2, {{1, 3, 2}, {3}})};
  RngStream gen(77);
  for (const auto& spec : specs) {
    for (int e = 0; e < 300; ++e) {
      const long n = 1 + static_cast<long>(gen.uniform() * 400);
      Environment env(spec, ResponseLengthModel::fixed(n), gen.next_u64());
      long t = 0;
      long emitted = 0;
      while (!env.finished()) {
        const int arm = static_cast<int>(gen.uniform() * spec.K());
        const auto r = env.step(arm, ++t);
        ASSERT_GE(r.accepted_len, 1);
        ASSERT_LE(r.accepted_len, spec.L + 1);
        ASSERT_EQ(r.emitted_tokens, std::min<long>(r.accepted_len, n - emitted));
        emitted += r.emitted_tokens;
        ASSERT_EQ(r.eos_reached, emitted == n);
      }
      EXPECT_EQ(emitted, n);
      EXPECT_LE(t, n);
      EXPECT_GE(t * (spec.L + 1), n);
    }
  }
}

TEST(AcceptanceCsv, RoundTrip) {
  const std::vector<std::vector<int>> rows = {{1, 5, 3}, {2, 2}};
  std::ostringstream out;
  write_acceptance_csv(out, rows);
  std::istringstream in(out.str());
  EXPECT_EQ(parse_acceptance_csv(in, 4), rows);
}

TEST(AcceptanceCsv, RejectsMalformedInput) {
  auto parse = [](const std::string& text) {
    std::istringstream in(text);
    return parse_acceptance_csv(in, 4, "t.csv");
  };
  EXPECT_THROW(parse(""), ConfigError);
  EXPECT_THROW(parse("arm,round,accepted_len\n0,1,1\n"), ConfigError);
  EXPECT_THROW(parse("arm,t,accepted_len\r\n0,1,1\r\n"), ConfigError);
  EXPECT_THROW(parse("arm,t,accepted_len\n0,1,6\n"), ConfigError);
  EXPECT_THROW(parse("arm,t,accepted_len\n0,1,0\n"), ConfigError);
  EXPECT_THROW(parse("arm,t,accepted_len\n0,2,1\n"), ConfigError);
  EXPECT_THROW(parse("arm,t,accepted_len\n1,1,1\n"), ConfigError);
  EXPECT_THROW(parse("arm,t,accepted_len\n0,1,1\n1,1,1\n0,2,1\n"), ConfigError);
  EXPECT_THROW(parse("arm,t,accepted_len\n0,1,x\n"), ConfigError);
  EXPECT_THROW(parse("arm,t,accepted_len\n0,1,1,1\n"), ConfigError);
  EXPECT_THROW(parse("arm,t,accepted_len\n"), ConfigError);
  try {
    parse("arm,t,accepted_len\n0,1,1\n0,2,9\n");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("t.csv:3"), std::string::npos) << e.what();
  }
}

TEST(AcceptanceCsv, LoadsFile) {
  const auto rows = load_acceptance_csv(std::string(BANDITSPEC_TEST_DATA) + "/two_arm_trace.csv", 4);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0], (std::vector<int>{5, 4, 5, 3}));
  EXPECT_EQ(rows[1], (std::vector<int>{1, 2, 1, 1}));
  EXPECT_THROW(load_acceptance_csv("/nonexistent/file.csv", 4), IoError);
}
