#pragma once

#include <cstdint>
#include <random>

namespace banditspec {

// SplitMix64 finalizer. Bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Splittable seed derivation: child seeds depend only on (parent, index), so
// work can be scheduled in any order without changing which stream it sees.
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index) noexcept {
  return mix64(mix64(parent) ^ mix64(index + 0x632be59bd9b4e019ULL));
}

constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t a,
                                    std::uint64_t b) noexcept {
  return derive_seed(derive_seed(parent, a), b);
}

// 53-bit mantissa conversion, identical on every standard library (unlike
// std::uniform_real_distribution).
constexpr double to_unit_interval(std::uint64_t bits) noexcept {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

// Seeded random stream. Draws are a pure function of the seed and the number
// of prior draws.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed = 0) : engine_(mix64(seed)) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1).
  double uniform() { return to_unit_interval(engine_()); }

  bool coin() { return (engine_() >> 63) != 0; }

 private:
  std::mt19937_64 engine_;
};

// Stateless uniform on [0, 1) addressed by (seed, a, b). Used for tables that
// must be fixed before any policy runs and must not depend on query order.
constexpr double counter_uniform(std::uint64_t seed, std::uint64_t a, std::uint64_t b) noexcept {
  return to_unit_interval(derive_seed(seed, a, b));
}

}  // namespace banditspec
