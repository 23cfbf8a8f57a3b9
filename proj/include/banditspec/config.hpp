#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "banditspec/acceptance_csv.hpp"
#include "banditspec/environments.hpp"
#include "banditspec/errors.hpp"
#include "banditspec/policies.hpp"

namespace banditspec {

// Experiment configuration, stored as JSON. Schema (defaults in brackets):
//
//   name          string                                   [""]
//   seed          unsigned integer                         required
//   episodes      integer >= 1                             [1000]
//   delta         UCB confidence parameter in (0, 1)       [0.5]
//   K, L          optional; must agree with env and policies
//   env           { kind, L, ... } with kind one of
//                   stationary_tgd      p: [p_1, ..., p_K]
//                   history_correlated  arms: [{mean, amplitude}, ...]
//                   adversarial_matrix  generator: blocks   block_len, p_favored, p_other, matrix_seed
//                                       generator: constant values
//                                       generator: file     path
//                   trace               path
//   response_length  {kind: fixed, length} | {kind: geometric, mean}
//   n_grid        [N_1, ...]; each entry replaces the response length
//                 (fixed length or geometric mean)        [absent]
//   policies      [{type: ucb|exp3|fixed, arm?, delta?, K?, L?}, ...]   required
//   output_dir    string                                   [$BANDITSPEC_OUT or "banditspec_out"]
//   jobs          worker threads, 0 = all cores            [0]
//   log_rounds    episodes per run to log round by round   [0]
//
// Relative file paths resolve against the config file's directory. Unknown
// keys are rejected.

using json = nlohmann::json;

struct PolicyConfig {
  std::string type;  // "ucb", "exp3" or "fixed"
  int arm = -1;
  std::optional<double> delta;
  std::optional<int> K;
  std::optional<int> L;

  friend bool operator==(const PolicyConfig&, const PolicyConfig&) = default;
};

struct ExperimentConfig {
  std::string name;
  std::optional<std::uint64_t> seed;
  long episodes = 1000;
  double delta = 0.5;
  std::optional<int> K;
  std::optional<int> L;
  EnvSpec env;
  std::string env_path;  // source of file-backed envs, as written in the config
  ResponseLengthModel response_length = ResponseLengthModel::fixed(1000);
  std::vector<long> n_grid;
  std::vector<PolicyConfig> policies;
  std::string output_dir;
  unsigned jobs = 0;
  long log_rounds = 0;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

namespace detail {

inline void reject_unknown(const json& obj, const std::string& path,
                           std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError(path + ": expected an object");
  const std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (!keys.count(key)) {
      throw ConfigError((path.empty() ? key : path + "." + key) + ": unknown key");
    }
  }
}

template <class T>
T get_field(const json& obj, const std::string& key, const std::string& path) {
  const std::string where = path.empty() ? key : path + "." + key;
  if (!obj.contains(key)) throw ConfigError(where + ": required");
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

template <class T>
T get_or(const json& obj, const std::string& key, const std::string& path, T fallback) {
  return obj.contains(key) ? get_field<T>(obj, key, path) : fallback;
}

inline std::string resolve_path(const std::string& path, const std::filesystem::path& base) {
  std::filesystem::path p(path);
  if (p.is_relative() && !base.empty()) p = base / p;
  return p.string();
}

inline EnvSpec parse_env(const json& j, const std::filesystem::path& base, std::string& env_path) {
  const std::string kind = get_field<std::string>(j, "kind", "env");
  const int L = get_field<int>(j, "L", "env");
  if (L < 1) throw ConfigError("env.L: must be >= 1");
  if (kind == "stationary_tgd") {
    reject_unknown(j, "env", {"kind", "L", "p"});
    return EnvSpec::stationary(L, get_field<std::vector<double>>(j, "p", "env"));
  }
  if (kind == "history_correlated") {
    reject_unknown(j, "env", {"kind", "L", "arms"});
    std::vector<CorrelatedArm> arms;
    const json& list = j.contains("arms") ? j.at("arms") : throw ConfigError("env.arms: required");
    if (!list.is_array()) throw ConfigError("env.arms: expected an array");
    for (std::size_t i = 0; i < list.size(); ++i) {
      const std::string p = "env.arms[" + std::to_string(i) + "]";
      reject_unknown(list[i], p, {"mean", "amplitude"});
      arms.push_back({get_field<double>(list[i], "mean", p), get_field<double>(list[i], "amplitude", p)});
    }
    return EnvSpec::correlated(L, std::move(arms));
  }
  if (kind == "adversarial_matrix") {
    const std::string gen = get_field<std::string>(j, "generator", "env");
    if (gen == "blocks") {
      reject_unknown(j, "env", {"kind", "L", "generator", "block_len", "p_favored", "p_other",
                                "matrix_seed"});
      return EnvSpec::blocks(L, get_field<long>(j, "block_len", "env"),
                             get_field<std::vector<double>>(j, "p_favored", "env"),
                             get_field<double>(j, "p_other", "env"),
                             get_field<std::uint64_t>(j, "matrix_seed", "env"));
    }
    if (gen == "constant") {
      reject_unknown(j, "env", {"kind", "L", "generator", "values"});
      return EnvSpec::constant(L, get_field<std::vector<int>>(j, "values", "env"));
    }
    if (gen == "file") {
      reject_unknown(j, "env", {"kind", "L", "generator", "path"});
      env_path = get_field<std::string>(j, "path", "env");
      return EnvSpec::table(L, load_acceptance_csv(resolve_path(env_path, base), L));
    }
    throw ConfigError("env.generator: expected blocks, constant or file, got '" + gen + "'");
  }
  if (kind == "trace") {
    reject_unknown(j, "env", {"kind", "L", "path"});
    env_path = get_field<std::string>(j, "path", "env");
    return EnvSpec::trace(L, load_acceptance_csv(resolve_path(env_path, base), L));
  }
  throw ConfigError("env.kind: unknown kind '" + kind + "'");
}

inline json env_to_json(const EnvSpec& spec, const std::string& env_path, bool inline_tables) {
  json j;
  j["L"] = spec.L;
  if (const auto* m = std::get_if<StationaryTgd>(&spec.model)) {
    j["kind"] = "stationary_tgd";
    std::vector<double> p;
    for (const auto& a : m->arms) p.push_back(a.p);
    j["p"] = p;
  } else if (const auto* m = std::get_if<HistoryCorrelated>(&spec.model)) {
    j["kind"] = "history_correlated";
    j["arms"] = json::array();
    for (const auto& a : m->arms) j["arms"].push_back({{"mean", a.mean}, {"amplitude", a.amplitude}});
  } else if (const auto* m = std::get_if<AdversarialMatrix>(&spec.model)) {
    j["kind"] = "adversarial_matrix";
    if (const auto* b = std::get_if<BlockGenerator>(&m->source)) {
      j["generator"] = "blocks";
      j["block_len"] = b->block_len;
      j["p_favored"] = b->p_favored;
      j["p_other"] = b->p_other;
      j["matrix_seed"] = b->seed;
    } else if (const auto* c = std::get_if<ConstantGenerator>(&m->source)) {
      j["generator"] = "constant";
      j["values"] = c->values;
    } else {
      j["generator"] = "file";
      if (inline_tables) {
        j["rows"] = std::get<AcceptanceTable>(m->source).rows;
      } else {
        j["path"] = env_path;
      }
    }
  } else {
    j["kind"] = "trace";
    if (inline_tables) {
      j["rows"] = std::get<TraceReplay>(spec.model).traces;
    } else {
      j["path"] = env_path;
    }
  }
  return j;
}

}  // namespace detail

// Checks cross-field invariants; messages name the offending fields.
inline void validate(const ExperimentConfig& c) {
  if (!c.seed) throw ConfigError("seed: required (no wall-clock seeding)");
  if (c.episodes < 1) throw ConfigError("episodes: must be >= 1");
  if (!(c.delta > 0.0 && c.delta < 1.0)) throw ConfigError("delta: must lie in (0, 1)");
  try {
    validate(c.env);
  } catch (const Error& e) {
    throw ConfigError(std::string("env: ") + e.what());
  }
  c.response_length.validate();
  const int K = c.env.K();
  const int L = c.env.L;
  if (c.K && *c.K != K) {
    throw ConfigError("K=" + std::to_string(*c.K) + " conflicts with env (K=" + std::to_string(K) + ")");
  }
  if (c.L && *c.L != L) {
    throw ConfigError("L=" + std::to_string(*c.L) + " conflicts with env.L=" + std::to_string(L));
  }
  if (c.policies.empty()) throw ConfigError("policies: at least one policy required");
  for (std::size_t i = 0; i < c.policies.size(); ++i) {
    const auto& p = c.policies[i];
    const std::string path = "policies[" + std::to_string(i) + "]";
    if (p.type != "ucb" && p.type != "exp3" && p.type != "fixed") {
      throw ConfigError(path + ".type: expected ucb, exp3 or fixed, got '" + p.type + "'");
    }
    if (p.L && *p.L != L) {
      throw ConfigError(path + ".L=" + std::to_string(*p.L) + " conflicts with env.L=" +
                        std::to_string(L));
    }
    if (p.K && *p.K != K) {
      throw ConfigError(path + ".K=" + std::to_string(*p.K) + " conflicts with env (K=" +
                        std::to_string(K) + ")");
    }
    if (p.type == "fixed" && (p.arm < 0 || p.arm >= K)) {
      throw ConfigError(path + ".arm: must lie in [0, " + std::to_string(K) + ")");
    }
    if (p.type != "fixed" && p.arm != -1) throw ConfigError(path + ".arm: only valid for fixed");
    if (p.delta && p.type != "ucb") throw ConfigError(path + ".delta: only valid for ucb");
    if (p.delta && !(*p.delta > 0.0 && *p.delta < 1.0)) {
      throw ConfigError(path + ".delta: must lie in (0, 1)");
    }
  }
  for (std::size_t i = 0; i < c.n_grid.size(); ++i) {
    if (c.n_grid[i] < (c.response_length.kind == ResponseLengthModel::Kind::fixed ? 1 : 2)) {
      throw ConfigError("n_grid[" + std::to_string(i) + "]: response length out of range");
    }
  }
  if (c.log_rounds < 0) throw ConfigError("log_rounds: must be >= 0");
}

inline ExperimentConfig parse_config(const json& j, const std::filesystem::path& base = {}) {
  detail::reject_unknown(j, "", {"name", "seed", "episodes", "delta", "K", "L", "env",
                                 "response_length", "n_grid", "policies", "output_dir", "jobs",
                                 "log_rounds"});
  ExperimentConfig c;
  c.name = detail::get_or<std::string>(j, "name", "", "");
  if (j.contains("seed")) c.seed = detail::get_field<std::uint64_t>(j, "seed", "");
  c.episodes = detail::get_or<long>(j, "episodes", "", c.episodes);
  c.delta = detail::get_or<double>(j, "delta", "", c.delta);
  if (j.contains("K")) c.K = detail::get_field<int>(j, "K", "");
  if (j.contains("L")) c.L = detail::get_field<int>(j, "L", "");
  if (!j.contains("env")) throw ConfigError("env: required");
  c.env = detail::parse_env(j.at("env"), base, c.env_path);

  if (j.contains("response_length")) {
    const json& r = j.at("response_length");
    const auto kind = detail::get_field<std::string>(r, "kind", "response_length");
    if (kind == "fixed") {
      detail::reject_unknown(r, "response_length", {"kind", "length"});
      c.response_length = ResponseLengthModel::fixed(detail::get_field<long>(r, "length", "response_length"));
    } else if (kind == "geometric") {
      detail::reject_unknown(r, "response_length", {"kind", "mean"});
      c.response_length =
          ResponseLengthModel::geometric(detail::get_field<double>(r, "mean", "response_length"));
    } else {
      throw ConfigError("response_length.kind: expected fixed or geometric, got '" + kind + "'");
    }
  } else if (!j.contains("n_grid")) {
    throw ConfigError("response_length: required when n_grid is absent");
  }
  c.n_grid = detail::get_or<std::vector<long>>(j, "n_grid", "", {});

  if (!j.contains("policies") || !j.at("policies").is_array()) {
    throw ConfigError("policies: required array");
  }
  const json& list = j.at("policies");
  for (std::size_t i = 0; i < list.size(); ++i) {
    const std::string path = "policies[" + std::to_string(i) + "]";
    detail::reject_unknown(list[i], path, {"type", "arm", "delta", "K", "L"});
    PolicyConfig p;
    p.type = detail::get_field<std::string>(list[i], "type", path);
    p.arm = detail::get_or<int>(list[i], "arm", path, -1);
    if (list[i].contains("delta")) p.delta = detail::get_field<double>(list[i], "delta", path);
    if (list[i].contains("K")) p.K = detail::get_field<int>(list[i], "K", path);
    if (list[i].contains("L")) p.L = detail::get_field<int>(list[i], "L", path);
    c.policies.push_back(p);
  }
  c.output_dir = detail::get_or<std::string>(j, "output_dir", "", "");
  c.jobs = detail::get_or<unsigned>(j, "jobs", "", 0u);
  c.log_rounds = detail::get_or<long>(j, "log_rounds", "", 0L);
  validate(c);
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return parse_config(j, std::filesystem::path(path).parent_path());
}

namespace detail {

inline json semantic_json(const ExperimentConfig& c, bool inline_tables) {
  json j;
  if (c.seed) j["seed"] = *c.seed;
  j["episodes"] = c.episodes;
  j["delta"] = c.delta;
  if (c.K) j["K"] = *c.K;
  if (c.L) j["L"] = *c.L;
  j["env"] = env_to_json(c.env, c.env_path, inline_tables);
  if (c.response_length.kind == ResponseLengthModel::Kind::fixed) {
    j["response_length"] = {{"kind", "fixed"}, {"length", c.response_length.fixed_len}};
  } else {
    j["response_length"] = {{"kind", "geometric"}, {"mean", c.response_length.mean_len}};
  }
  if (!c.n_grid.empty()) j["n_grid"] = c.n_grid;
  j["policies"] = json::array();
  for (const auto& p : c.policies) {
    json pj{{"type", p.type}};
    if (p.arm >= 0) pj["arm"] = p.arm;
    if (p.delta) pj["delta"] = *p.delta;
    if (p.K) pj["K"] = *p.K;
    if (p.L) pj["L"] = *p.L;
    j["policies"].push_back(pj);
  }
  return j;
}

}  // namespace detail

inline json config_to_json(const ExperimentConfig& c) {
  json j = detail::semantic_json(c, false);
  j["name"] = c.name;
  if (!c.output_dir.empty()) j["output_dir"] = c.output_dir;
  j["jobs"] = c.jobs;
  j["log_rounds"] = c.log_rounds;
  return j;
}

// FNV-1a over the canonical JSON of every field that affects results.
// File-backed tables are hashed by content, not by path; the name, output
// location, thread count and logging are excluded.
inline std::string config_hash(const ExperimentConfig& c) {
  const std::string canonical = detail::semantic_json(c, true).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canonical) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream out;
  out << std::hex;
  out.width(16);
  out.fill('0');
  out << h;
  return out.str();
}

// ---------------------------------------------------------------------------
// Presets

inline std::vector<std::string> preset_names() { return {"stoc-tgd-k3", "adv-blocks-k2", "hist-corr-k3"}; }

inline std::optional<ExperimentConfig> preset(const std::string& name) {
  ExperimentConfig c;
  c.name = name;
  if (name == "stoc-tgd-k3") {
    // UCBSpec log-regret scaling on three TGD arms.
    c.seed = 20240521;
    c.episodes = 2000;
    c.env = EnvSpec::stationary(4, {0.9, 0.6, 0.3});
    c.response_length = ResponseLengthModel::fixed(1000);
    c.n_grid = {1000, 10000, 100000};
    c.policies = {{"ucb", -1, 0.5, {}, {}}, {"exp3", -1, {}, {}, {}}};
    return c;
  }
  if (name == "adv-blocks-k2") {
    // EXP3Spec on a committed matrix whose favored arm alternates every 200 rounds.
    c.seed = 20240522;
    c.episodes = 500;
    c.env = EnvSpec::blocks(4, 200, {0.9, 0.7}, 0.3, 7);
    c.response_length = ResponseLengthModel::fixed(1000);
    c.n_grid = {1000, 10000, 100000};
    c.policies = {{"exp3", -1, {}, {}, {}}, {"ucb", -1, 0.5, {}, {}}};
    return c;
  }
  if (name == "hist-corr-k3") {
    // Stationary means without independence.
    c.seed = 20240523;
    c.episodes = 1000;
    c.env = EnvSpec::correlated(4, {{4.0, 1.0}, {3.0, 1.0}, {2.0, 1.0}});
    c.response_length = ResponseLengthModel::geometric(1000.0);
    c.n_grid = {1000, 10000, 100000};
    c.policies = {{"ucb", -1, 0.5, {}, {}}, {"exp3", -1, {}, {}, {}}};
    return c;
  }
  return std::nullopt;
}

// Instantiates the configured policies (fixed, ucb, exp3) for the env's K and L.
inline std::vector<Policy> make_policies(const ExperimentConfig& c) {
  std::vector<Policy> out;
  const int K = c.env.K();
  const int L = c.env.L;
  for (const auto& p : c.policies) {
    if (p.type == "fixed") {
      out.emplace_back(FixedArm(p.arm, K));
    } else if (p.type == "ucb") {
      out.emplace_back(UcbSpec(K, L, p.delta.value_or(c.delta)));
    } else {
      out.emplace_back(Exp3Spec(K, L));
    }
  }
  return out;
}

inline std::string default_output_root() {
  if (const char* env = std::getenv("BANDITSPEC_OUT"); env != nullptr && *env != '\0') return env;
  return "banditspec_out";
}

}  // namespace banditspec
