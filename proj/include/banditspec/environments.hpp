#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "banditspec/distributions.hpp"
#include "banditspec/errors.hpp"
#include "banditspec/rng.hpp"

namespace banditspec {

// Total response length N (tokens up to and including EOS). Drawn once per
// episode, independently of every arm choice.
struct ResponseLengthModel {
  enum class Kind { fixed, geometric };

  Kind kind = Kind::fixed;
  long fixed_len = 1;
  double mean_len = 2.0;

  static ResponseLengthModel fixed(long n) { return {Kind::fixed, n, 0.0}; }
  static ResponseLengthModel geometric(double mean) { return {Kind::geometric, 0, mean}; }

  void validate() const {
    if (kind == Kind::fixed && fixed_len < 1) {
      throw ConfigError("fixed response length must be >= 1");
    }
    if (kind == Kind::geometric && !(mean_len > 1.0 && std::isfinite(mean_len))) {
      throw ConfigError("geometric response length mean must be > 1");
    }
  }

  double expected() const {
    return kind == Kind::fixed ? static_cast<double>(fixed_len) : mean_len;
  }

  // Geometric on {1, 2, ...} with success probability 1/mean_len.
  long draw(RngStream& rng) const {
    if (kind == Kind::fixed) return fixed_len;
    const double q = 1.0 / mean_len;
    const double u = rng.uniform();
    const double extra = std::floor(std::log1p(-u) / std::log1p(-q));
    return 1 + static_cast<long>(extra);
  }

  friend bool operator==(const ResponseLengthModel&, const ResponseLengthModel&) = default;
};

// ---------------------------------------------------------------------------
// Environment specifications

struct StationaryTgd {
  std::vector<TGDParams> arms;
  friend bool operator==(const StationaryTgd&, const StationaryTgd&) = default;
};

struct CorrelatedArm {
  double mean = 1.0;
  double amplitude = 0.0;
  friend bool operator==(const CorrelatedArm&, const CorrelatedArm&) = default;
};

// Conditional mean is fixed per arm; the conditional law depends on the history.
struct HistoryCorrelated {
  std::vector<CorrelatedArm> arms;
  friend bool operator==(const HistoryCorrelated&, const HistoryCorrelated&) = default;
};

// Explicit y[arm][t-1] table, replayed cyclically past its last column.
struct AcceptanceTable {
  std::vector<std::vector<int>> rows;
  friend bool operator==(const AcceptanceTable&, const AcceptanceTable&) = default;
};

// Arm (b mod K) is favored during block b = floor((t-1) / block_len). Favored
// arm i draws from TGD(p_favored[i]); the others draw from TGD(p_other). Each
// entry is addressed by (seed, arm, t), so the matrix is fixed before any
// policy runs and independent of query order.
struct BlockGenerator {
  long block_len = 1;
  std::vector<double> p_favored;
  double p_other = 0.0;
  std::uint64_t seed = 0;
  friend bool operator==(const BlockGenerator&, const BlockGenerator&) = default;
};

struct ConstantGenerator {
  std::vector<int> values;
  friend bool operator==(const ConstantGenerator&, const ConstantGenerator&) = default;
};

struct AdversarialMatrix {
  std::variant<AcceptanceTable, BlockGenerator, ConstantGenerator> source;
  friend bool operator==(const AdversarialMatrix&, const AdversarialMatrix&) = default;
};

// Recorded per-arm acceptance lengths; arm i at round t replays trace[i][(t-1) mod len_i].
struct TraceReplay {
  std::vector<std::vector<int>> traces;
  friend bool operator==(const TraceReplay&, const TraceReplay&) = default;
};

using EnvModel = std::variant<StationaryTgd, HistoryCorrelated, AdversarialMatrix, TraceReplay>;

struct EnvSpec {
  int L = 1;
  EnvModel model;

  static EnvSpec stationary(int L, const std::vector<double>& ps) {
    StationaryTgd m;
    for (double p : ps) m.arms.push_back({p, L});
    return {L, m};
  }
  static EnvSpec correlated(int L, std::vector<CorrelatedArm> arms) {
    return {L, HistoryCorrelated{std::move(arms)}};
  }
  static EnvSpec table(int L, std::vector<std::vector<int>> rows) {
    return {L, AdversarialMatrix{AcceptanceTable{std::move(rows)}}};
  }
  static EnvSpec blocks(int L, long block_len, std::vector<double> p_favored, double p_other,
                        std::uint64_t seed) {
    return {L, AdversarialMatrix{BlockGenerator{block_len, std::move(p_favored), p_other, seed}}};
  }
  static EnvSpec constant(int L, std::vector<int> values) {
    return {L, AdversarialMatrix{ConstantGenerator{std::move(values)}}};
  }
  static EnvSpec trace(int L, std::vector<std::vector<int>> traces) {
    return {L, TraceReplay{std::move(traces)}};
  }

  int K() const {
    struct {
      int operator()(const StationaryTgd& m) const { return static_cast<int>(m.arms.size()); }
      int operator()(const HistoryCorrelated& m) const { return static_cast<int>(m.arms.size()); }
      int operator()(const AdversarialMatrix& m) const {
        return std::visit(
            [](const auto& src) -> int {
              using T = std::decay_t<decltype(src)>;
              if constexpr (std::is_same_v<T, AcceptanceTable>) {
                return static_cast<int>(src.rows.size());
              } else if constexpr (std::is_same_v<T, BlockGenerator>) {
                return static_cast<int>(src.p_favored.size());
              } else {
                return static_cast<int>(src.values.size());
              }
            },
            m.source);
      }
      int operator()(const TraceReplay& m) const { return static_cast<int>(m.traces.size()); }
    } visitor;
    return std::visit(visitor, model);
  }

  bool is_deterministic() const {
    return std::holds_alternative<AdversarialMatrix>(model) ||
           std::holds_alternative<TraceReplay>(model);
  }

  std::string kind_name() const {
    switch (model.index()) {
      case 0: return "stationary_tgd";
      case 1: return "history_correlated";
      case 2: return "adversarial_matrix";
      default: return "trace";
    }
  }

  friend bool operator==(const EnvSpec&, const EnvSpec&) = default;
};

namespace detail {

inline void check_length_row(const std::vector<int>& row, int L, const std::string& what) {
  if (row.empty()) throw ConfigError(what + " is empty");
  for (int y : row) {
    if (y < 1 || y > L + 1) {
      throw ConfigError(what + " holds accepted length " + std::to_string(y) + " outside [1, " +
                        std::to_string(L + 1) + "]");
    }
  }
}

}  // namespace detail

inline void validate(const EnvSpec& spec) {
  if (spec.L < 1) throw ConfigError("env.L must be >= 1");
  const int K = spec.K();
  if (K < 1) throw ConfigError("environment must define at least one arm");
  const int L = spec.L;

  if (const auto* m = std::get_if<StationaryTgd>(&spec.model)) {
    for (std::size_t i = 0; i < m->arms.size(); ++i) {
      const auto& a = m->arms[i];
      if (a.L != L) {
        throw ConfigError("env.arms[" + std::to_string(i) + "].L=" + std::to_string(a.L) +
                          " differs from env.L=" + std::to_string(L));
      }
      if (!(a.p >= 0.0 && a.p < 1.0)) {
        throw ConfigError("env.arms[" + std::to_string(i) + "].p must lie in [0, 1)");
      }
    }
  } else if (const auto* m = std::get_if<HistoryCorrelated>(&spec.model)) {
    for (std::size_t i = 0; i < m->arms.size(); ++i) {
      const auto& a = m->arms[i];
      if (!(a.amplitude > 0.0) || a.mean < 1.0 + a.amplitude || a.mean > L + 1.0 - a.amplitude) {
        throw ConfigError("env.arms[" + std::to_string(i) +
                          "] needs amplitude > 0 and mean in [1+amplitude, L+1-amplitude]");
      }
    }
  } else if (const auto* m = std::get_if<AdversarialMatrix>(&spec.model)) {
    if (const auto* t = std::get_if<AcceptanceTable>(&m->source)) {
      const std::size_t cols = t->rows.front().size();
      for (std::size_t i = 0; i < t->rows.size(); ++i) {
        detail::check_length_row(t->rows[i], L, "matrix row " + std::to_string(i));
        if (t->rows[i].size() != cols) throw ConfigError("matrix rows must have equal length");
      }
    } else if (const auto* b = std::get_if<BlockGenerator>(&m->source)) {
      if (b->block_len < 1) throw ConfigError("env.block_len must be >= 1");
      try {
        for (double p : b->p_favored) validate(TGDParams{p, L});
        validate(TGDParams{b->p_other, L});
      } catch (const DomainError& e) {
        throw ConfigError(std::string("block generator: ") + e.what());
      }
    } else {
      detail::check_length_row(std::get<ConstantGenerator>(m->source).values, L, "constant values");
    }
  } else {
    const auto& tr = std::get<TraceReplay>(spec.model);
    for (std::size_t i = 0; i < tr.traces.size(); ++i) {
      detail::check_length_row(tr.traces[i], L, "trace for arm " + std::to_string(i));
    }
  }
}

// Value y[arm][t] of a committed adversarial matrix, t >= 1.
class MatrixView {
 public:
  MatrixView(const AdversarialMatrix& matrix, int L) : matrix_(&matrix) {
    if (const auto* b = std::get_if<BlockGenerator>(&matrix.source)) {
      for (double p : b->p_favored) favored_.emplace_back(TGDParams{p, L});
      other_.emplace_back(TGDParams{b->p_other, L});
    }
  }

  int value(int arm, long t) const {
    const auto idx = static_cast<std::size_t>(arm);
    if (const auto* tab = std::get_if<AcceptanceTable>(&matrix_->source)) {
      const auto& row = tab->rows[idx];
      return row[static_cast<std::size_t>((t - 1) % static_cast<long>(row.size()))];
    }
    if (const auto* b = std::get_if<BlockGenerator>(&matrix_->source)) {
      const long block = (t - 1) / b->block_len;
      const long K = static_cast<long>(b->p_favored.size());
      const double u = counter_uniform(b->seed, idx, static_cast<std::uint64_t>(t));
      return block % K == arm ? favored_[idx].from_uniform(u) : other_.front().from_uniform(u);
    }
    return std::get<ConstantGenerator>(matrix_->source).values[idx];
  }

 private:
  const AdversarialMatrix* matrix_;
  std::vector<TgdSampler> favored_;
  std::vector<TgdSampler> other_;
};

// Materializes rounds 1..T of a committed matrix.
inline std::vector<std::vector<int>> materialize(const EnvSpec& spec, long T) {
  validate(spec);
  const auto* m = std::get_if<AdversarialMatrix>(&spec.model);
  if (m == nullptr) throw ConfigError("materialize requires an adversarial_matrix environment");
  MatrixView view(*m, spec.L);
  std::vector<std::vector<int>> out(static_cast<std::size_t>(spec.K()));
  for (int i = 0; i < spec.K(); ++i) {
    for (long t = 1; t <= T; ++t) out[static_cast<std::size_t>(i)].push_back(view.value(i, t));
  }
  return out;
}

struct StepResult {
  int accepted_len = 0;     // before EOS clipping
  int emitted_tokens = 0;   // after EOS clipping
  bool eos_reached = false;
};

// One episode's environment: the response budget plus per-arm generators.
// Every arm owns a stream derived from the episode seed, so the k-th pull of
// arm i sees the same randomness under any policy.
class Environment {
 public:
  Environment(const EnvSpec& spec, const ResponseLengthModel& rlm, std::uint64_t seed)
      : spec_(&spec), L_(spec.L), K_(spec.K()) {
    validate(spec);
    rlm.validate();
    RngStream length_rng(derive_seed(seed, 0));
    total_ = rlm.draw(length_rng);
    remaining_ = total_;
    for (int i = 0; i < K_; ++i) {
      arm_rngs_.emplace_back(derive_seed(seed, 1, static_cast<std::uint64_t>(i)));
    }
    if (const auto* m = std::get_if<StationaryTgd>(&spec.model)) {
      for (const auto& a : m->arms) samplers_.emplace_back(a);
    } else if (const auto* m = std::get_if<AdversarialMatrix>(&spec.model)) {
      matrix_.emplace_back(*m, L_);
    }
  }

  // t is the 1-based round index.
  StepResult step(int arm, long t) {
    if (remaining_ <= 0) throw StateError("step called after EOS");
    if (arm < 0 || arm >= K_) {
      throw DomainError("arm index " + std::to_string(arm) + " outside [0, " +
                        std::to_string(K_) + ")");
    }
    if (t < 1) throw DomainError("round index must be >= 1");
    const int accepted = draw(arm, t);
    StepResult r;
    r.accepted_len = accepted;
    r.emitted_tokens = static_cast<int>(std::min<long>(accepted, remaining_));
    remaining_ -= r.emitted_tokens;
    r.eos_reached = remaining_ == 0;
    last_emitted_ = r.emitted_tokens;
    return r;
  }

  long remaining() const { return remaining_; }
  long total_length() const { return total_; }
  bool finished() const { return remaining_ == 0; }
  int K() const { return K_; }
  int L() const { return L_; }

 private:
  int draw(int arm, long t) {
    const auto idx = static_cast<std::size_t>(arm);
    switch (spec_->model.index()) {
      case 0:
        return samplers_[idx].sample(arm_rngs_[idx]);
      case 1:
        return draw_correlated(std::get<HistoryCorrelated>(spec_->model).arms[idx],
                               arm_rngs_[idx]);
      case 2:
        return matrix_.front().value(arm, t);
      default: {
        const auto& trace = std::get<TraceReplay>(spec_->model).traces[idx];
        return trace[static_cast<std::size_t>((t - 1) % static_cast<long>(trace.size()))];
      }
    }
  }

  // mean + s * spread, with s a fair sign and spread = amplitude after an odd
  // previous emission, amplitude / 2 after an even one. Randomized rounding
  // keeps the conditional mean at `mean` for every history.
  int draw_correlated(const CorrelatedArm& a, RngStream& rng) const {
    const bool parity = (last_emitted_ & 1) != 0;
    const bool sign = rng.coin() != parity;
    const double spread = parity ? a.amplitude : 0.5 * a.amplitude;
    const double value = a.mean + (sign ? spread : -spread);
    const double base = std::floor(value);
    const double frac = value - base;
    const int rounded = static_cast<int>(base) + (rng.uniform() < frac ? 1 : 0);
    return std::clamp(rounded, 1, L_ + 1);
  }

  const EnvSpec* spec_;
  int L_;
  int K_;
  long total_ = 0;
  long remaining_ = 0;
  int last_emitted_ = 0;
  std::vector<RngStream> arm_rngs_;
  std::vector<TgdSampler> samplers_;
  std::vector<MatrixView> matrix_;
};

// Mean acceptance length of each arm where it is defined by the model
// (stationary and history-correlated environments).
inline std::vector<double> arm_means(const EnvSpec& spec) {
  std::vector<double> out;
  if (const auto* m = std::get_if<StationaryTgd>(&spec.model)) {
    for (const auto& a : m->arms) out.push_back(tgd_mean(a));
  } else if (const auto* m = std::get_if<HistoryCorrelated>(&spec.model)) {
    for (const auto& a : m->arms) out.push_back(a.mean);
  } else {
    throw ConfigError("arm means are only defined for stationary environments");
  }
  return out;
}

// Exact stopping time of the fixed-arm policy on a deterministic environment
// with response length n: the first t with y[arm][1] + ... + y[arm][t] >= n.
inline long exact_fixed_arm_st(const EnvSpec& spec, int arm, long n) {
  if (!spec.is_deterministic()) {
    throw ConfigError("exact fixed-arm stopping time needs an adversarial or trace environment");
  }
  Environment env(spec, ResponseLengthModel::fixed(n), 0);
  long t = 0;
  while (!env.finished()) env.step(arm, ++t);
  return t;
}

struct FixedArmStopping {
  double mean_st = 0.0;
  double std_error = 0.0;   // zero when exact
  double renewal_approx = 0.0;
  bool exact = false;
};

// E[ST(ALG_arm)]. Exact scan for deterministic environments under a fixed
// budget; Monte Carlo over `episodes` otherwise, with the renewal
// approximation E[N] / mu_arm reported alongside where mu_arm is known.
inline FixedArmStopping env_fixed_arm_expected_st(const EnvSpec& spec,
                                                  const ResponseLengthModel& rlm, int arm,
                                                  std::uint64_t master_seed = 0,
                                                  long episodes = 1000) {
  validate(spec);
  rlm.validate();
  if (arm < 0 || arm >= spec.K()) throw ConfigError("arm index out of range");
  FixedArmStopping out;
  if (spec.is_deterministic() && rlm.kind == ResponseLengthModel::Kind::fixed) {
    const long st = exact_fixed_arm_st(spec, arm, rlm.fixed_len);
    out.mean_st = static_cast<double>(st);
    out.exact = true;
    out.renewal_approx = out.mean_st;
    return out;
  }
  if (episodes < 1) throw ConfigError("episodes must be >= 1");
  double sum = 0.0;
  double sum_sq = 0.0;
  for (long e = 0; e < episodes; ++e) {
    Environment env(spec, rlm, derive_seed(master_seed, static_cast<std::uint64_t>(e)));
    long t = 0;
    while (!env.finished()) env.step(arm, ++t);
    sum += static_cast<double>(t);
    sum_sq += static_cast<double>(t) * static_cast<double>(t);
  }
  const double m = static_cast<double>(episodes);
  out.mean_st = sum / m;
  if (episodes > 1) {
    const double var = std::max(0.0, (sum_sq - m * out.mean_st * out.mean_st) / (m - 1.0));
    out.std_error = std::sqrt(var / m);
  }
  if (!spec.is_deterministic()) {
    out.renewal_approx = rlm.expected() / arm_means(spec)[static_cast<std::size_t>(arm)];
  } else {
    out.renewal_approx = out.mean_st;
  }
  return out;
}

}  // namespace banditspec
