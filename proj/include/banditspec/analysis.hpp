#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "banditspec/distributions.hpp"
#include "banditspec/engine.hpp"
#include "banditspec/environments.hpp"
#include "banditspec/errors.hpp"
#include "banditspec/policies.hpp"

namespace banditspec {

// H = sum_{i != i*} 1 / (mu_{i*} * Delta_i), i* the lowest-index maximizer.
// Returns +infinity when a non-best arm has zero gap.
inline double hardness(const std::vector<double>& mu) {
  if (mu.empty()) throw DomainError("hardness needs at least one arm");
  const auto best = static_cast<std::size_t>(argmax_lowest(mu));
  double h = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    if (i == best) continue;
    const double gap = mu[best] - mu[i];
    if (gap <= 0.0) return std::numeric_limits<double>::infinity();
    h += 1.0 / (mu[best] * gap);
  }
  return h;
}

struct BoundConstants {
  int L = 0;
  int best_arm = 0;
  std::vector<double> means;
  std::vector<double> gaps;
  std::vector<double> kl;  // kl_i; zero for the best arm
  double hardness = 0.0;
  // sum_{i != i*} (Delta_i / mu_{i*}) / kl_i
  double lower_bound_constant = 0.0;
  // p*(1 - p*^L) / (1 - p*) for the best arm's parameter p*
  double tightness_factor = 0.0;
  // H * tightness_factor: the TGD-family lower-bound constant
  double tgd_lower_bound = 0.0;
  // L^2 (1 - p*) / (p* (1 - p*^L)): upper/lower constant mismatch
  double upper_lower_ratio = 0.0;
};

inline BoundConstants lower_bound_constant(const std::vector<TGDParams>& arms) {
  if (arms.size() < 2) throw DomainError("bound constants need at least two arms");
  BoundConstants c;
  c.L = arms.front().L;
  for (const auto& a : arms) {
    validate(a);
    if (a.L != c.L) throw DomainError("all arms must share L");
    c.means.push_back(tgd_mean(a));
  }
  c.best_arm = argmax_lowest(c.means);
  const auto best = static_cast<std::size_t>(c.best_arm);
  const double mu_star = c.means[best];
  for (std::size_t i = 0; i < arms.size(); ++i) {
    const double gap = mu_star - c.means[i];
    if (i != best && gap <= 0.0) {
      throw DomainError("arm " + std::to_string(i) + " ties the best arm: zero gap");
    }
    c.gaps.push_back(gap);
    c.kl.push_back(i == best ? 0.0 : tgd_kl_inf(arms[i], mu_star));
  }
  c.hardness = hardness(c.means);
  for (std::size_t i = 0; i < arms.size(); ++i) {
    if (i == best) continue;
    c.lower_bound_constant += (c.gaps[i] / mu_star) / c.kl[i];
  }
  const double p = arms[best].p;
  const double pL = std::pow(p, c.L);
  c.tightness_factor = p * (1.0 - pL) / (1.0 - p);
  c.tgd_lower_bound = c.hardness * c.tightness_factor;
  c.upper_lower_ratio = c.tightness_factor > 0.0
                            ? static_cast<double>(c.L) * c.L / c.tightness_factor
                            : std::numeric_limits<double>::infinity();
  return c;
}

// ---------------------------------------------------------------------------
// Stopping-time regret

struct RegretReport {
  double length = 0.0;  // N for a fixed budget, E[N] otherwise
  int K = 0;
  int L = 0;
  BatchResult policy;
  std::vector<BatchResult> fixed_arms;
  int best_arm = 0;
  double regret = 0.0;
  double regret_se = 0.0;  // SE of the per-episode paired differences

  const BatchResult& best() const { return fixed_arms[static_cast<std::size_t>(best_arm)]; }
};

// Pairs a policy batch with fixed-arm batches run on the same episode seeds.
// The baseline is the fixed arm with the smallest mean ST; the regret SE
// comes from the per-episode differences against it.
inline RegretReport paired_regret(BatchResult policy, BestFixedArm oracle, const EnvSpec& spec,
                                  const ResponseLengthModel& rlm) {
  const auto& base = oracle.per_arm.at(static_cast<std::size_t>(oracle.arm));
  if (base.stopping_times.size() != policy.stopping_times.size()) {
    throw ConfigError("paired regret needs equal episode counts");
  }
  std::vector<double> diffs(policy.stopping_times.size());
  for (std::size_t e = 0; e < diffs.size(); ++e) {
    diffs[e] = static_cast<double>(policy.stopping_times[e] - base.stopping_times[e]);
  }
  RegretReport r;
  r.length = rlm.expected();
  r.K = spec.K();
  r.L = spec.L;
  std::tie(r.regret, r.regret_se) = mean_and_se(diffs);
  r.policy = std::move(policy);
  r.best_arm = oracle.arm;
  r.fixed_arms = std::move(oracle.per_arm);
  return r;
}

inline RegretReport regret_report(const Policy& policy, const EnvSpec& spec,
                                  const ResponseLengthModel& rlm, std::uint64_t master_seed,
                                  long episodes, const BatchOptions& options = {}) {
  check_compatible(policy, spec);
  auto batch = run_batch(policy, spec, rlm, master_seed, episodes, options);
  BatchOptions fixed_options = options;
  fixed_options.log_episodes = 0;
  auto oracle = oracle_best_fixed_arm(spec, rlm, master_seed, episodes, fixed_options);
  return paired_regret(std::move(batch), std::move(oracle), spec, rlm);
}

// Regret across response lengths. Each grid value becomes a fixed budget (or
// the mean of a geometric budget, matching `base`).
inline std::vector<RegretReport> regret_curve(const Policy& policy, const EnvSpec& spec,
                                              const ResponseLengthModel& base,
                                              const std::vector<long>& grid,
                                              std::uint64_t master_seed, long episodes,
                                              const BatchOptions& options = {}) {
  if (grid.size() < 3) throw ConfigError("regret curve needs at least 3 grid points");
  const auto [lo, hi] = std::minmax_element(grid.begin(), grid.end());
  if (*lo < 1 || static_cast<double>(*hi) < 100.0 * static_cast<double>(*lo)) {
    throw ConfigError("regret curve grid must span at least two decades");
  }
  std::vector<RegretReport> out;
  for (long n : grid) {
    const auto rlm = base.kind == ResponseLengthModel::Kind::fixed
                         ? ResponseLengthModel::fixed(n)
                         : ResponseLengthModel::geometric(static_cast<double>(n));
    out.push_back(regret_report(policy, spec, rlm, master_seed, episodes, options));
  }
  return out;
}

// Ratio-of-ratios test for logarithmic growth between the two largest grid
// points: regret(N_hi)/regret(N_lo) <= factor * ln(N_hi)/ln(N_lo).
struct LogScalingCheck {
  bool regret_positive = true;
  bool regret_per_token_decreasing = true;
  double regret_ratio = 0.0;
  double log_ratio = 0.0;
  double factor = 2.5;
  bool within_factor = false;

  bool passed() const { return regret_positive && regret_per_token_decreasing && within_factor; }
};

inline LogScalingCheck log_scaling_check(const std::vector<RegretReport>& curve,
                                         double factor = 2.5) {
  if (curve.size() < 2) throw ConfigError("log scaling check needs two or more grid points");
  LogScalingCheck c;
  c.factor = factor;
  for (std::size_t i = 0; i < curve.size(); ++i) {
    if (!(curve[i].regret > 0.0)) c.regret_positive = false;
    if (i > 0 && !(curve[i].regret / curve[i].length < curve[i - 1].regret / curve[i - 1].length)) {
      c.regret_per_token_decreasing = false;
    }
  }
  const auto& hi = curve[curve.size() - 1];
  const auto& lo = curve[curve.size() - 2];
  c.regret_ratio = hi.regret / lo.regret;
  c.log_ratio = std::log(hi.length) / std::log(lo.length);
  c.within_factor = c.regret_positive && c.regret_ratio <= factor * c.log_ratio;
  return c;
}

// Lower-bound direction, reported only: regret / ln N against 0.5 x the
// asymptotic constant. Finite-N values are not expected to respect it.
struct LowerBoundDirection {
  double length = 0.0;
  double regret_over_log = 0.0;
  double half_constant = 0.0;
  bool above = false;
};

inline std::vector<LowerBoundDirection> lower_bound_direction(
    const std::vector<RegretReport>& curve, const BoundConstants& constants) {
  std::vector<LowerBoundDirection> out;
  for (const auto& r : curve) {
    LowerBoundDirection d;
    d.length = r.length;
    d.regret_over_log = r.regret / std::log(r.length);
    d.half_constant = 0.5 * constants.lower_bound_constant;
    d.above = d.regret_over_log >= d.half_constant;
    out.push_back(d);
  }
  return out;
}

// ---------------------------------------------------------------------------
// EXP3Spec worst-case bound:
//   Reg <= 2L * min{ sqrt(len K ln K), 2 L K ln K + sqrt(ST_best K ln K) }

struct Exp3Bound {
  double worst_case_branch = 0.0;  // sqrt(len K ln K)
  double instance_branch = 0.0;    // 2 L K ln K + sqrt(ST_best K ln K)
  double bound = 0.0;              // 2L * min(branches)
};

inline Exp3Bound exp3_worst_case_bound(int L, int K, double length, double best_st) {
  const double klog = static_cast<double>(K) * std::log(static_cast<double>(K));
  Exp3Bound b;
  b.worst_case_branch = std::sqrt(length * klog);
  b.instance_branch = 2.0 * L * klog + std::sqrt(best_st * klog);
  b.bound = 2.0 * L * std::min(b.worst_case_branch, b.instance_branch);
  return b;
}

struct Exp3BoundCheck {
  Exp3Bound bound;
  double regret = 0.0;
  double margin = 0.0;  // bound - regret
  bool satisfied = false;
};

inline Exp3BoundCheck exp3_bound_check(const RegretReport& report, const EnvSpec& spec) {
  if (!spec.is_deterministic()) {
    throw ConfigError("EXP3 bound check needs a committed (adversarial or trace) environment");
  }
  Exp3BoundCheck c;
  c.bound = exp3_worst_case_bound(report.L, report.K, report.length, report.best().mean_st);
  c.regret = report.regret;
  c.margin = c.bound.bound - c.regret;
  c.satisfied = c.regret <= c.bound.bound;
  return c;
}

// ---------------------------------------------------------------------------
// UCB confidence coverage

struct CoverageReport {
  long pairs = 0;   // (arm, round) pairs checked
  long misses = 0;  // pairs with mu_i outside [mean - cr, mean + cr]
  double rate() const { return pairs == 0 ? 0.0 : static_cast<double>(misses) / pairs; }
};

// Runs UCBSpec and, after every round where all arms have been pulled, checks
// whether each arm's true mean lies inside its confidence interval.
inline CoverageReport ucb_coverage(const EnvSpec& spec, const ResponseLengthModel& rlm,
                                   double delta, std::uint64_t master_seed, long episodes,
                                   unsigned jobs = 1) {
  const auto mu = arm_means(spec);
  const UcbSpec ucb(spec.K(), spec.L, delta);
  std::vector<CoverageReport> per_episode(static_cast<std::size_t>(episodes));
  parallel_for(episodes, jobs, [&](long e) {
    auto& cov = per_episode[static_cast<std::size_t>(e)];
    auto observer = [&](const History& h, const StepResult&) {
      if (h.rounds() < h.K()) return;
      const auto indices = ucb.indices(h);
      for (std::size_t i = 0; i < indices.size(); ++i) {
        ++cov.pairs;
        if (std::abs(mu[i] - indices[i].mean) > indices[i].radius) ++cov.misses;
      }
    };
    run_episode(Policy{ucb}, spec, rlm, episode_seed(master_seed, e), false, observer);
  });
  CoverageReport total;
  for (const auto& c : per_episode) {
    total.pairs += c.pairs;
    total.misses += c.misses;
  }
  return total;
}

}  // namespace banditspec
