#pragma once

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "banditspec/analysis.hpp"
#include "banditspec/config.hpp"
#include "banditspec/engine.hpp"
#include "banditspec/errors.hpp"

namespace banditspec {

inline constexpr const char* kToolVersion = "0.3.0";

struct RunOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<long> episodes;
  std::optional<std::string> output_dir;
  std::optional<unsigned> jobs;
  std::optional<long> log_rounds;
};

inline ExperimentConfig apply_overrides(ExperimentConfig c, const RunOverrides& o) {
  if (o.seed) c.seed = *o.seed;
  if (o.episodes) c.episodes = *o.episodes;
  if (o.output_dir) c.output_dir = *o.output_dir;
  if (o.jobs) c.jobs = *o.jobs;
  if (o.log_rounds) c.log_rounds = *o.log_rounds;
  validate(c);
  return c;
}

struct GridPointResult {
  long length = 0;
  std::vector<RegretReport> policies;    // one per configured policy
  std::vector<RegretReport> fixed_arms;  // fixed arm i against the best fixed arm
};

struct ExperimentResult {
  std::filesystem::path output_dir;
  std::string config_hash;
  std::vector<GridPointResult> grid;
  std::vector<std::string> files;
};

namespace detail {

inline std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << content;
  if (!out.flush()) throw IoError("write failed for " + path.string());
}

inline std::string regret_rows(long n, const RegretReport& r) {
  std::ostringstream out;
  out << n << ',' << r.policy.policy << ',' << fmt(r.policy.mean_st) << ','
      << fmt(r.policy.std_error) << ',' << fmt(r.regret) << ',' << fmt(r.regret_se) << '\n';
  return out.str();
}

inline std::string batch_row(long n, const BatchResult& b) {
  std::ostringstream out;
  out << n << ',' << b.policy << ',' << b.episodes << ',' << fmt(b.mean_st) << ','
      << fmt(b.std_error);
  for (double f : b.pull_fractions) out << ',' << fmt(f);
  out << '\n';
  return out.str();
}

inline json number_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

}  // namespace detail

inline std::filesystem::path resolve_output_dir(const ExperimentConfig& c) {
  if (!c.output_dir.empty()) return c.output_dir;
  return std::filesystem::path(default_output_root()) / (c.name.empty() ? "experiment" : c.name);
}

// Runs every configured policy (plus every fixed arm as baseline) at each
// response length, then writes, from a single thread:
//   regret_curve.csv     N,policy,mean_st,se,regret,regret_se
//   batch_results.csv    N,policy,episodes,mean_st,se,pull_frac_<i>...
//   bound_constants.json theory constants and bound checks
//   manifest.json        config_hash, seed, tool_version, started_at
//   rounds_<policy>_N<N>.csv  when log_rounds > 0
// CSV and bound outputs depend only on the semantic config.
inline ExperimentResult run_experiment(const ExperimentConfig& config) {
  validate(config);
  const std::string started_at = detail::utc_timestamp();
  ExperimentResult result;
  result.output_dir = resolve_output_dir(config);
  result.config_hash = config_hash(config);

  std::error_code ec;
  std::filesystem::create_directories(result.output_dir, ec);
  if (ec || !std::filesystem::is_directory(result.output_dir)) {
    throw IoError("cannot create output directory " + result.output_dir.string());
  }

  const auto& env = config.env;
  const std::uint64_t seed = *config.seed;
  const auto policies = make_policies(config);
  BatchOptions options;
  options.jobs = config.jobs;

  std::vector<long> grid = config.n_grid;
  if (grid.empty()) {
    grid.push_back(config.response_length.kind == ResponseLengthModel::Kind::fixed
                       ? config.response_length.fixed_len
                       : static_cast<long>(config.response_length.mean_len));
  }

  for (long n : grid) {
    const auto rlm = config.response_length.kind == ResponseLengthModel::Kind::fixed
                         ? ResponseLengthModel::fixed(n)
                         : ResponseLengthModel::geometric(static_cast<double>(n));
    GridPointResult point;
    point.length = n;
    const auto oracle = oracle_best_fixed_arm(env, rlm, seed, config.episodes, options);
    for (const auto& fixed : oracle.per_arm) {
      point.fixed_arms.push_back(paired_regret(fixed, oracle, env, rlm));
    }
    for (const auto& policy : policies) {
      BatchOptions po = options;
      po.log_episodes = std::min(config.log_rounds, config.episodes);
      auto batch = run_batch(policy, env, rlm, seed, config.episodes, po);
      point.policies.push_back(paired_regret(std::move(batch), oracle, env, rlm));
    }
    result.grid.push_back(std::move(point));
  }

  // Reduction done; write everything.
  std::string regret_csv = "N,policy,mean_st,se,regret,regret_se\n";
  std::string batch_csv = "N,policy,episodes,mean_st,se";
  for (int i = 0; i < env.K(); ++i) batch_csv += ",pull_frac_" + std::to_string(i);
  batch_csv += '\n';
  for (const auto& point : result.grid) {
    for (const auto& r : point.policies) {
      regret_csv += detail::regret_rows(point.length, r);
      batch_csv += detail::batch_row(point.length, r.policy);
    }
    for (const auto& r : point.fixed_arms) {
      regret_csv += detail::regret_rows(point.length, r);
      batch_csv += detail::batch_row(point.length, r.policy);
    }
  }

  json bounds;
  bounds["env_kind"] = env.kind_name();
  bounds["K"] = env.K();
  bounds["L"] = env.L;
  std::optional<BoundConstants> constants;
  if (const auto* m = std::get_if<StationaryTgd>(&env.model)) {
    try {
      constants = lower_bound_constant(m->arms);
      json c;
      c["means"] = constants->means;
      c["gaps"] = constants->gaps;
      c["best_arm"] = constants->best_arm;
      c["kl"] = constants->kl;
      c["hardness"] = detail::number_or_null(constants->hardness);
      c["lower_bound_constant"] = detail::number_or_null(constants->lower_bound_constant);
      c["tightness_factor"] = detail::number_or_null(constants->tightness_factor);
      c["tgd_lower_bound"] = detail::number_or_null(constants->tgd_lower_bound);
      c["upper_lower_ratio"] = detail::number_or_null(constants->upper_lower_ratio);
      bounds["tgd_constants"] = c;
    } catch (const DomainError& e) {
      bounds["tgd_constants"] = {{"error", e.what()}};
    }
  }
  if (!env.is_deterministic()) {
    bounds["hardness"] = detail::number_or_null(hardness(arm_means(env)));
  }
  bounds["log_scaling"] = json::array();
  bounds["exp3_bound"] = json::array();
  bounds["lower_bound_direction"] = json::array();
  for (std::size_t p = 0; p < policies.size(); ++p) {
    std::vector<RegretReport> curve;
    for (const auto& point : result.grid) curve.push_back(point.policies[p]);
    const std::string name = policy_name(policies[p]);
    if (curve.size() >= 2) {
      const auto check = log_scaling_check(curve);
      bounds["log_scaling"].push_back({{"policy", name},
                                       {"regret_positive", check.regret_positive},
                                       {"regret_per_token_decreasing", check.regret_per_token_decreasing},
                                       {"regret_ratio", detail::number_or_null(check.regret_ratio)},
                                       {"log_ratio", check.log_ratio},
                                       {"factor", check.factor},
                                       {"within_factor", check.within_factor}});
    }
    if (std::holds_alternative<Exp3Spec>(policies[p]) && env.is_deterministic()) {
      for (const auto& r : curve) {
        const auto check = exp3_bound_check(r, env);
        bounds["exp3_bound"].push_back({{"N", r.length},
                                        {"policy", name},
                                        {"worst_case_branch", check.bound.worst_case_branch},
                                        {"instance_branch", check.bound.instance_branch},
                                        {"bound", check.bound.bound},
                                        {"regret", check.regret},
                                        {"margin", check.margin},
                                        {"satisfied", check.satisfied}});
      }
    }
    if (std::holds_alternative<UcbSpec>(policies[p]) && constants) {
      for (const auto& d : lower_bound_direction(curve, *constants)) {
        bounds["lower_bound_direction"].push_back({{"N", d.length},
                                                   {"policy", name},
                                                   {"regret_over_log", d.regret_over_log},
                                                   {"half_constant", d.half_constant},
                                                   {"above", d.above}});
      }
    }
  }

  json manifest;
  manifest["config_hash"] = result.config_hash;
  manifest["seed"] = seed;
  manifest["tool_version"] = kToolVersion;
  manifest["started_at"] = started_at;

  const auto& dir = result.output_dir;
  auto emit = [&](const std::string& name, const std::string& content) {
    detail::write_file(dir / name, content);
    result.files.push_back(name);
  };
  emit("regret_curve.csv", regret_csv);
  emit("batch_results.csv", batch_csv);
  emit("bound_constants.json", bounds.dump(2) + "\n");
  emit("manifest.json", manifest.dump(2) + "\n");

  if (config.log_rounds > 0) {
    for (const auto& point : result.grid) {
      for (const auto& r : point.policies) {
        std::string csv = "episode,t,arm,accepted,emitted,remaining\n";
        for (std::size_t e = 0; e < r.policy.round_logs.size(); ++e) {
          for (const auto& row : r.policy.round_logs[e]) {
            csv += std::to_string(e) + ',' + std::to_string(row.t) + ',' + std::to_string(row.arm) +
                   ',' + std::to_string(row.accepted) + ',' + std::to_string(row.emitted) + ',' +
                   std::to_string(row.remaining) + '\n';
          }
        }
        emit("rounds_" + r.policy.policy + "_N" + std::to_string(point.length) + ".csv", csv);
      }
    }
  }
  return result;
}

}  // namespace banditspec
