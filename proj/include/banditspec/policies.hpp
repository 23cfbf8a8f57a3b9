#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "banditspec/errors.hpp"
#include "banditspec/rng.hpp"

namespace banditspec {

// Ordered (arm, accepted length) records plus per-arm running statistics.
class History {
 public:
  struct Record {
    int arm;
    int accepted;
  };

  History(int K, int L) : K_(K), L_(L), pulls_(static_cast<std::size_t>(K), 0),
                          sums_(static_cast<std::size_t>(K), 0) {
    if (K < 1) throw ConfigError("history needs K >= 1");
    if (L < 1) throw ConfigError("history needs L >= 1");
  }

  void append(int arm, int accepted) {
    if (arm < 0 || arm >= K_) throw DomainError("arm index out of range");
    if (accepted < 1 || accepted > L_ + 1) {
      throw DomainError("accepted length " + std::to_string(accepted) + " outside [1, L+1]");
    }
    records_.push_back({arm, accepted});
    ++pulls_[static_cast<std::size_t>(arm)];
    sums_[static_cast<std::size_t>(arm)] += accepted;
  }

  // t: number of completed rounds.
  long rounds() const { return static_cast<long>(records_.size()); }
  long pulls(int arm) const { return pulls_[static_cast<std::size_t>(arm)]; }
  long long total(int arm) const { return sums_[static_cast<std::size_t>(arm)]; }
  double mean(int arm) const {
    const long n = pulls(arm);
    return n == 0 ? 0.0 : static_cast<double>(total(arm)) / static_cast<double>(n);
  }
  std::span<const long> pull_counts() const { return pulls_; }
  const std::vector<Record>& records() const { return records_; }
  int K() const { return K_; }
  int L() const { return L_; }

  void reserve(std::size_t n) { records_.reserve(n); }

 private:
  int K_;
  int L_;
  std::vector<long> pulls_;
  std::vector<long long> sums_;
  std::vector<Record> records_;
};

// Index of the largest value; ties go to the lowest index.
inline int argmax_lowest(std::span<const double> values) {
  int best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  }
  return best;
}

// ---------------------------------------------------------------------------
// Fixed arm: plays the same arm every round.

class FixedArm {
 public:
  FixedArm(int arm, int K) : arm_(arm), K_(K) {
    if (arm < 0 || arm >= K) {
      throw ConfigError("fixed arm " + std::to_string(arm) + " outside [0, " + std::to_string(K) +
                        ")");
    }
  }

  int select(const History&, RngStream&) const { return arm_; }
  void observe(int, int) {}

  int arm() const { return arm_; }
  int K() const { return K_; }
  std::string name() const { return "fixed_" + std::to_string(arm_); }

 private:
  int arm_;
  int K_;
};

// ---------------------------------------------------------------------------
// UCBSpec

// cr = (L/2) * sqrt( (1+n)/n^2 * (1 + 2 ln(K t^2 sqrt(1+n) / delta)) )
// t counts completed rounds, n the pulls of the arm so far.
inline double ucb_confidence_radius(int L, int K, long t, long n, double delta) {
  if (n < 1) throw DomainError("confidence radius needs at least one pull");
  if (t < 1) throw DomainError("confidence radius needs t >= 1");
  const double nd = static_cast<double>(n);
  const double td = static_cast<double>(t);
  const double log_term = std::log(static_cast<double>(K)) + 2.0 * std::log(td) +
                          0.5 * std::log1p(nd) - std::log(delta);
  return 0.5 * L * std::sqrt((1.0 + nd) / (nd * nd) * (1.0 + 2.0 * log_term));
}

struct UcbIndex {
  long pulls = 0;
  double mean = 0.0;
  double radius = 0.0;
  double index = 0.0;
};

class UcbSpec {
 public:
  UcbSpec(int K, int L, double delta = 0.5) : K_(K), L_(L), delta_(delta) {
    if (K < 1) throw ConfigError("UCBSpec needs K >= 1");
    if (L < 1) throw ConfigError("UCBSpec needs L >= 1");
    if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("UCBSpec delta must lie in (0, 1)");
  }

  // Indices after t = history.rounds() completed rounds. Every arm must have
  // been pulled at least once.
  std::vector<UcbIndex> indices(const History& history) const {
    check(history);
    const long t = history.rounds();
    std::vector<UcbIndex> out(static_cast<std::size_t>(K_));
    for (int i = 0; i < K_; ++i) {
      auto& u = out[static_cast<std::size_t>(i)];
      u.pulls = history.pulls(i);
      if (u.pulls == 0) {
        throw StateError("UCB index requested before arm " + std::to_string(i) + " was pulled");
      }
      u.mean = history.mean(i);
      u.radius = ucb_confidence_radius(L_, K_, t, u.pulls, delta_);
      u.index = u.mean + u.radius;
    }
    return out;
  }

  // Rounds 1..K play arms 0..K-1 in order; afterwards the largest index wins.
  int select(const History& history, RngStream&) const {
    check(history);
    const long t = history.rounds();
    if (t < K_) {
      if (history.pulls(static_cast<int>(t)) != 0) {
        throw StateError("warm start expects arm " + std::to_string(t) + " to be unpulled");
      }
      return static_cast<int>(t);
    }
    int best = 0;
    double best_index = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < K_; ++i) {
      const long n = history.pulls(i);
      if (n == 0) throw StateError("arm " + std::to_string(i) + " has no pulls after warm start");
      const double index = history.mean(i) + ucb_confidence_radius(L_, K_, t, n, delta_);
      if (index > best_index) {
        best = i;
        best_index = index;
      }
    }
    return best;
  }

  void observe(int, int) {}

  double delta() const { return delta_; }
  int K() const { return K_; }
  int L() const { return L_; }
  std::string name() const { return "ucb"; }

 private:
  void check(const History& history) const {
    if (history.K() != K_ || history.L() != L_) throw StateError("history K/L mismatch");
  }

  int K_;
  int L_;
  double delta_;
};

// ---------------------------------------------------------------------------
// EXP3Spec

// eta_t = sqrt(ln K / (t K)), recomputed from the current round index t >= 1.
inline double exp3_learning_rate(long t, int K) {
  if (t < 1) throw DomainError("learning rate needs t >= 1");
  return std::sqrt(std::log(static_cast<double>(K)) / (static_cast<double>(t) * K));
}

// Importance-weighted rejection loss of the pulled arm: (L+1-y) / (L p).
inline double exp3_loss_estimate(int L, int accepted, double prob) {
  if (accepted < 1 || accepted > L + 1) {
    throw DomainError("accepted length " + std::to_string(accepted) + " outside [1, L+1]");
  }
  if (!(prob > 0.0)) throw DomainError("pulled arm must have positive probability");
  return static_cast<double>(L + 1 - accepted) / (static_cast<double>(L) * prob);
}

// p_i proportional to exp(-eta * loss_i). The minimum loss is subtracted
// before exponentiating, so the largest weight is exactly 1. Weights that
// underflow are floored at the smallest positive double so every entry stays
// strictly positive.
inline void exp3_probabilities(std::span<const double> cumulative_losses, double eta,
                               std::vector<double>& p) {
  if (cumulative_losses.empty()) throw DomainError("need at least one arm");
  const double lowest = *std::min_element(cumulative_losses.begin(), cumulative_losses.end());
  p.resize(cumulative_losses.size());
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = std::max(std::exp(-eta * (cumulative_losses[i] - lowest)),
                    std::numeric_limits<double>::denorm_min());
    total += p[i];
  }
  for (double& x : p) x /= total;
  for (double& x : p) x = std::max(x, std::numeric_limits<double>::denorm_min());
}

inline std::vector<double> exp3_probabilities(std::span<const double> cumulative_losses,
                                              double eta) {
  std::vector<double> p;
  exp3_probabilities(cumulative_losses, eta, p);
  return p;
}

// Draws an index from `probs` with one uniform.
inline int sample_index(std::span<const double> probs, RngStream& rng) {
  const double u = rng.uniform();
  double cumulative = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    cumulative += probs[i];
    if (u < cumulative) return static_cast<int>(i);
  }
  // Rounding left the total just under 1; fall back to the last positive entry.
  for (std::size_t i = probs.size(); i-- > 0;) {
    if (probs[i] > 0.0) return static_cast<int>(i);
  }
  return 0;
}

class Exp3Spec {
 public:
  Exp3Spec(int K, int L) : K_(K), L_(L), losses_(static_cast<std::size_t>(K), 0.0) {
    if (K < 1) throw ConfigError("EXP3Spec needs K >= 1");
    if (L < 1) throw ConfigError("EXP3Spec needs L >= 1");
  }

  // Probability vector for round t = rounds() + 1, from losses of rounds 1..t-1.
  std::vector<double> current_probabilities() const {
    return exp3_probabilities(losses_, exp3_learning_rate(rounds_ + 1, K_));
  }

  int select(const History&, RngStream& rng) {
    exp3_probabilities(losses_, exp3_learning_rate(rounds_ + 1, K_), probs_);
    pending_ = true;
    return sample_index(probs_, rng);
  }

  // Adds the importance-weighted loss to the pulled arm only.
  void observe(int arm, int accepted) {
    if (!pending_) throw StateError("observe called without a preceding select");
    if (arm < 0 || arm >= K_) throw DomainError("arm index out of range");
    losses_[static_cast<std::size_t>(arm)] +=
        exp3_loss_estimate(L_, accepted, probs_[static_cast<std::size_t>(arm)]);
    ++rounds_;
    pending_ = false;
  }

  const std::vector<double>& cumulative_losses() const { return losses_; }
  // Distribution used by the most recent select().
  const std::vector<double>& last_probabilities() const { return probs_; }
  long rounds() const { return rounds_; }
  int K() const { return K_; }
  int L() const { return L_; }
  std::string name() const { return "exp3"; }

 private:
  int K_;
  int L_;
  std::vector<double> losses_;
  std::vector<double> probs_;
  long rounds_ = 0;
  bool pending_ = false;
};

using Policy = std::variant<FixedArm, UcbSpec, Exp3Spec>;

inline std::string policy_name(const Policy& policy) {
  return std::visit([](const auto& p) { return p.name(); }, policy);
}

inline int policy_K(const Policy& policy) {
  return std::visit([](const auto& p) { return p.K(); }, policy);
}

// FixedArm carries no speculation length; it accepts any L.
inline int policy_L(const Policy& policy) {
  return std::visit(
      [](const auto& p) -> int {
        if constexpr (std::is_same_v<std::decay_t<decltype(p)>, FixedArm>) {
          return 0;
        } else {
          return p.L();
        }
      },
      policy);
}

}  // namespace banditspec
