#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <tuple>
#include <utility>
#include <variant>
#include <vector>

#include "banditspec/environments.hpp"
#include "banditspec/errors.hpp"
#include "banditspec/policies.hpp"
#include "banditspec/rng.hpp"

namespace banditspec {

struct RoundLog {
  long t = 0;
  int arm = 0;
  int accepted = 0;
  int emitted = 0;
  long remaining = 0;

  friend bool operator==(const RoundLog&, const RoundLog&) = default;
};

struct EpisodeOutcome {
  long stopping_time = 0;
  long total_tokens = 0;
  std::vector<long> pulls;
  std::vector<RoundLog> rounds;  // empty unless requested
};

struct NoObserver {
  void operator()(const History&, const StepResult&) const {}
};

inline void check_compatible(const Policy& policy, const EnvSpec& spec) {
  validate(spec);
  const int K = policy_K(policy);
  if (K != spec.K()) {
    throw ConfigError("policy " + policy_name(policy) + " has K=" + std::to_string(K) +
                      " but the environment has K=" + std::to_string(spec.K()));
  }
  const int L = policy_L(policy);
  if (L != 0 && L != spec.L) {
    throw ConfigError("policy " + policy_name(policy) + " has L=" + std::to_string(L) +
                      " but the environment has L=" + std::to_string(spec.L));
  }
}

namespace detail {

// Select -> step -> record until EOS. `P` is a concrete policy type.
template <class P, class Observer>
EpisodeOutcome episode_loop(P policy, const EnvSpec& spec, const ResponseLengthModel& rlm,
                            std::uint64_t seed, bool log_rounds, Observer& observer) {
  Environment env(spec, rlm, seed);
  RngStream policy_rng(derive_seed(seed, 2));
  History history(env.K(), env.L());
  EpisodeOutcome out;
  if (log_rounds) out.rounds.reserve(static_cast<std::size_t>(env.total_length()));

  long t = 0;
  bool eos = false;
  while (!eos) {
    ++t;
    const int arm = policy.select(history, policy_rng);
    const StepResult step = env.step(arm, t);
    history.append(arm, step.accepted_len);
    policy.observe(arm, step.accepted_len);
    if (log_rounds) {
      out.rounds.push_back({t, arm, step.accepted_len, step.emitted_tokens, env.remaining()});
    }
    observer(history, step);
    eos = step.eos_reached;
  }
  out.stopping_time = t;
  out.total_tokens = env.total_length() - env.remaining();
  out.pulls.assign(history.pull_counts().begin(), history.pull_counts().end());
  return out;
}

}  // namespace detail

// One BanditSpec episode. The policy is copied, so the caller's instance is
// never mutated. Environment streams derive from `seed`; the policy's own
// randomness uses a separate child stream, so two policies run with the same
// seed face the same response length and the same per-arm draws.
template <class Observer = NoObserver>
EpisodeOutcome run_episode(const Policy& policy, const EnvSpec& spec,
                           const ResponseLengthModel& rlm, std::uint64_t seed,
                           bool log_rounds = false, Observer observer = {}) {
  check_compatible(policy, spec);
  rlm.validate();
  return std::visit(
      [&](const auto& p) {
        return detail::episode_loop(p, spec, rlm, seed, log_rounds, observer);
      },
      policy);
}

struct BatchResult {
  std::string policy;
  long episodes = 0;
  double mean_st = 0.0;
  double std_error = 0.0;
  std::vector<double> pull_fractions;       // per arm, averaged over episodes
  std::vector<long> stopping_times;         // indexed by episode
  std::vector<long> total_tokens;           // indexed by episode
  std::vector<std::vector<RoundLog>> round_logs;  // first `log_episodes` episodes

  friend bool operator==(const BatchResult&, const BatchResult&) = default;
};

struct BatchOptions {
  unsigned jobs = 1;       // 0 = hardware concurrency
  long log_episodes = 0;
};

inline std::uint64_t episode_seed(std::uint64_t master_seed, long episode) {
  return derive_seed(master_seed, static_cast<std::uint64_t>(episode));
}

inline unsigned resolve_jobs(unsigned jobs) {
  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  return jobs;
}

// Runs fn(e) for e in [0, count) on `jobs` threads. The first exception is rethrown.
template <class Fn>
void parallel_for(long count, unsigned jobs, Fn&& fn) {
  jobs = std::min<unsigned>(resolve_jobs(jobs), static_cast<unsigned>(std::max(1L, count)));
  if (jobs <= 1) {
    for (long e = 0; e < count; ++e) fn(e);
    return;
  }
  std::atomic<long> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> workers;
  workers.reserve(jobs);
  for (unsigned w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      for (long e = next++; e < count; e = next++) {
        try {
          fn(e);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          next = count;
        }
      }
    });
  }
  for (auto& w : workers) w.join();
  if (error) std::rethrow_exception(error);
}

// Mean and standard error (sample std / sqrt(M)); SE is 0 for M = 1.
inline std::pair<double, double> mean_and_se(const std::vector<double>& xs) {
  const double m = static_cast<double>(xs.size());
  double sum = 0.0;
  for (double x : xs) sum += x;
  const double mean = sum / m;
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / (m - 1.0) / m)};
}

// M episodes with seeds derive_seed(master_seed, e). Outcomes are stored by
// episode index and reduced in index order, so the result is bit-identical
// for any `jobs`.
inline BatchResult run_batch(const Policy& policy, const EnvSpec& spec,
                             const ResponseLengthModel& rlm, std::uint64_t master_seed,
                             long episodes, const BatchOptions& options = {}) {
  if (episodes < 1) throw ConfigError("episodes must be >= 1");
  check_compatible(policy, spec);
  rlm.validate();

  std::vector<EpisodeOutcome> outcomes(static_cast<std::size_t>(episodes));
  parallel_for(episodes, options.jobs, [&](long e) {
    outcomes[static_cast<std::size_t>(e)] =
        run_episode(policy, spec, rlm, episode_seed(master_seed, e), e < options.log_episodes);
  });

  BatchResult r;
  r.policy = policy_name(policy);
  r.episodes = episodes;
  const auto K = static_cast<std::size_t>(spec.K());
  r.pull_fractions.assign(K, 0.0);
  std::vector<double> st(outcomes.size());
  for (std::size_t e = 0; e < outcomes.size(); ++e) {
    auto& o = outcomes[e];
    st[e] = static_cast<double>(o.stopping_time);
    r.stopping_times.push_back(o.stopping_time);
    r.total_tokens.push_back(o.total_tokens);
    for (std::size_t i = 0; i < K; ++i) {
      r.pull_fractions[i] += static_cast<double>(o.pulls[i]) / static_cast<double>(o.stopping_time);
    }
    if (static_cast<long>(e) < options.log_episodes) r.round_logs.push_back(std::move(o.rounds));
  }
  for (double& f : r.pull_fractions) f /= static_cast<double>(episodes);
  std::tie(r.mean_st, r.std_error) = mean_and_se(st);
  return r;
}

struct BestFixedArm {
  int arm = 0;
  std::vector<BatchResult> per_arm;
};

// i* = argmin_i E[ST(ALG_i)], estimated with every fixed arm on the same
// episode seeds (common random numbers). Ties go to the lowest index.
inline BestFixedArm oracle_best_fixed_arm(const EnvSpec& spec, const ResponseLengthModel& rlm,
                                          std::uint64_t master_seed, long episodes,
                                          const BatchOptions& options = {}) {
  validate(spec);
  BestFixedArm out;
  for (int i = 0; i < spec.K(); ++i) {
    out.per_arm.push_back(run_batch(FixedArm(i, spec.K()), spec, rlm, master_seed, episodes, options));
    if (out.per_arm.back().mean_st < out.per_arm[static_cast<std::size_t>(out.arm)].mean_st) {
      out.arm = i;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Brute-force oracle for tiny committed matrices.

struct SmallInstanceLimits {
  long max_tokens = 30;
  int max_arms = 3;
  int max_horizon = 10;
};

struct PolicyRun {
  std::string policy;
  std::uint64_t seed = 0;
  long stopping_time = 0;
};

struct SmallInstanceReport {
  long sequences = 0;        // distinct complete arm sequences
  long min_st = 0;
  long max_st = 0;
  long st_lower_bound = 0;      // ceil(N / (L+1))
  std::vector<long> fixed_arm_st;
  std::vector<PolicyRun> policy_runs;
  bool policies_within_range = true;
  bool best_fixed_consistent = true;  // min over sequences <= min_i ST(ALG_i)
  bool st_bounds_hold = true;            // every sequence within [N/(L+1), N]

  bool passed() const { return policies_within_range && best_fixed_consistent && st_bounds_hold; }
};

// Enumerates every arm sequence on a committed matrix with response length N
// (each sequence ends at its first round reaching N tokens), then checks the
// given policies against the enumerated range of stopping times.
inline SmallInstanceReport exhaustive_small_instance_check(
    const EnvSpec& spec, long N, int horizon, const std::vector<Policy>& policies,
    int seeds_per_policy, const SmallInstanceLimits& limits = {}) {
  validate(spec);
  const auto* matrix = std::get_if<AdversarialMatrix>(&spec.model);
  if (matrix == nullptr) throw ConfigError("small-instance check needs an adversarial_matrix env");
  const int K = spec.K();
  if (N < 1 || N > limits.max_tokens || K > limits.max_arms || horizon < 1 ||
      horizon > limits.max_horizon) {
    throw ConfigError("instance too large for exhaustive enumeration (N=" + std::to_string(N) +
                      ", K=" + std::to_string(K) + ", horizon=" + std::to_string(horizon) + ")");
  }

  const MatrixView view(*matrix, spec.L);
  SmallInstanceReport report;
  report.st_lower_bound = (N + spec.L) / (spec.L + 1);
  report.min_st = N + 1;
  report.max_st = 0;

  // Depth-first over (round, remaining budget).
  auto visit = [&](auto&& self, long t, long remaining) -> void {
    if (remaining <= 0) {
      const long st = t;
      ++report.sequences;
      report.min_st = std::min(report.min_st, st);
      report.max_st = std::max(report.max_st, st);
      if (st < report.st_lower_bound || st > N) report.st_bounds_hold = false;
      return;
    }
    if (t >= horizon) {
      throw ConfigError("some arm sequence needs more than " + std::to_string(horizon) +
                        " rounds; instance too large");
    }
    for (int arm = 0; arm < K; ++arm) self(self, t + 1, remaining - view.value(arm, t + 1));
  };
  visit(visit, 0, N);

  const auto rlm = ResponseLengthModel::fixed(N);
  for (int i = 0; i < K; ++i) report.fixed_arm_st.push_back(exact_fixed_arm_st(spec, i, N));
  const long best_fixed = *std::min_element(report.fixed_arm_st.begin(), report.fixed_arm_st.end());
  report.best_fixed_consistent = report.min_st <= best_fixed;

  for (const auto& policy : policies) {
    for (int s = 0; s < seeds_per_policy; ++s) {
      const auto seed = static_cast<std::uint64_t>(s);
      const long st = run_episode(policy, spec, rlm, seed).stopping_time;
      report.policy_runs.push_back({policy_name(policy), seed, st});
      if (st < report.min_st || st > report.max_st) report.policies_within_range = false;
    }
  }
  return report;
}

}  // namespace banditspec
