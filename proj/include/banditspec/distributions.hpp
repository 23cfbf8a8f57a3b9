#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "banditspec/errors.hpp"
#include "banditspec/rng.hpp"

namespace banditspec {

// Truncated geometric acceptance-length law on {1, ..., L+1}:
//   P(x) = p^(x-1) (1-p)  for x <= L,
//   P(L+1) = p^L.
// p = 0 is the degenerate canonical-decoding arm (always one token).
struct TGDParams {
  double p = 0.0;
  int L = 1;

  friend bool operator==(const TGDParams&, const TGDParams&) = default;
};

inline void validate(const TGDParams& params) {
  if (!(params.p >= 0.0 && params.p < 1.0)) {
    throw DomainError("TGD success probability must lie in [0, 1), got " +
                      std::to_string(params.p));
  }
  if (params.L < 1) {
    throw DomainError("TGD speculation length must be >= 1, got " + std::to_string(params.L));
  }
}

inline TGDParams make_tgd(double p, int L) {
  TGDParams params{p, L};
  validate(params);
  return params;
}

inline double tgd_pmf(const TGDParams& params, int x) {
  validate(params);
  if (x < 1 || x > params.L + 1) {
    throw DomainError("TGD support is {1, ..., " + std::to_string(params.L + 1) + "}, got " +
                      std::to_string(x));
  }
  if (x == params.L + 1) return std::pow(params.p, params.L);
  return std::pow(params.p, x - 1) * (1.0 - params.p);
}

// (1 - p^(L+1)) / (1 - p), evaluated as the finite series 1 + p + ... + p^L so
// that it stays accurate as p approaches 1.
inline double tgd_mean(const TGDParams& params) {
  validate(params);
  double sum = 0.0;
  double term = 1.0;
  for (int k = 0; k <= params.L; ++k) {
    sum += term;
    term *= params.p;
  }
  return sum;
}

// KL(P_a || P_b) in nats. Returns +infinity when P_a is not absolutely
// continuous with respect to P_b (b.p = 0 while a.p > 0).
inline double tgd_kl(const TGDParams& a, const TGDParams& b) {
  validate(a);
  validate(b);
  if (a.L != b.L) {
    throw DomainError("KL requires equal speculation lengths, got L=" + std::to_string(a.L) +
                      " and L=" + std::to_string(b.L));
  }
  if (a.p == b.p) return 0.0;
  if (a.p == 0.0) {
    // All of P_a's mass sits at x = 1.
    return -std::log1p(-b.p);
  }
  if (b.p == 0.0) return std::numeric_limits<double>::infinity();

  // (p_a - p_a^(L+1)) / (1 - p_a) = p_a + ... + p_a^L
  const double excess_mean = tgd_mean(a) - 1.0;
  const double tail = 1.0 - std::pow(a.p, a.L);
  const double kl = excess_mean * std::log(a.p / b.p) + tail * (std::log1p(-a.p) - std::log1p(-b.p));
  return std::max(kl, 0.0);
}

// Unique p in [0, 1) with tgd_mean({p, L}) == mean, by bisection to 1e-12.
// The mean is strictly increasing in p, ranging over [1, L+1).
inline double tgd_p_for_mean(double mean, int L) {
  if (L < 1) throw DomainError("speculation length must be >= 1");
  if (!(mean >= 1.0 && mean < L + 1.0)) {
    throw DomainError("TGD mean must lie in [1, L+1), got " + std::to_string(mean));
  }
  double lo = 0.0;
  double hi = 1.0;
  while (hi - lo > 1e-12) {
    const double mid = 0.5 * (lo + hi);
    if (tgd_mean({mid, L}) < mean) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

// kl_i = inf { KL(P_arm, P_S) : E_S[X] > mu_star } over the TGD family.
// The constraint set is open; the infimum is the value at the boundary law
// whose mean equals mu_star exactly.
inline double tgd_kl_inf(const TGDParams& arm, double mu_star) {
  validate(arm);
  const double arm_mean = tgd_mean(arm);
  constexpr double kMeanTol = 1e-12;
  if (mu_star < arm_mean - kMeanTol) {
    throw DomainError("mu_star " + std::to_string(mu_star) + " is below the arm mean " +
                      std::to_string(arm_mean));
  }
  if (mu_star > arm.L + 1.0) {
    throw DomainError("mu_star exceeds the maximum acceptance length L+1");
  }
  if (mu_star <= arm_mean + kMeanTol) return 0.0;
  // Only p -> 1 reaches mean L+1, and every p < 1 law has mass on x <= L.
  if (mu_star >= arm.L + 1.0) return std::numeric_limits<double>::infinity();
  const double boundary_p = tgd_p_for_mean(mu_star, arm.L);
  return tgd_kl(arm, {boundary_p, arm.L});
}

// Inverse-CDF sampler. P(X <= x) = 1 - p^x for x <= L.
class TgdSampler {
 public:
  explicit TgdSampler(const TGDParams& params) : params_(params) {
    validate(params_);
    cdf_.resize(static_cast<std::size_t>(params_.L));
    double tail = 1.0;
    for (int x = 1; x <= params_.L; ++x) {
      tail *= params_.p;
      cdf_[static_cast<std::size_t>(x - 1)] = 1.0 - tail;
    }
  }

  int sample(RngStream& rng) const { return from_uniform(rng.uniform()); }

  // Maps u in [0, 1) to the smallest x with P(X <= x) > u.
  int from_uniform(double u) const {
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    return static_cast<int>(it - cdf_.begin()) + 1;
  }

  const TGDParams& params() const { return params_; }

 private:
  TGDParams params_;
  std::vector<double> cdf_;
};

inline int tgd_sample(const TGDParams& params, RngStream& rng) {
  return TgdSampler(params).sample(rng);
}

}  // namespace banditspec
