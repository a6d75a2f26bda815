#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace ssc {

// Seed derivation. Every random stream in the toolkit is a pure function of a
// base seed and a key, so results never depend on call order or threading.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t key);
std::uint64_t mix_seed(std::uint64_t seed, std::string_view key);

/// Thin wrapper over std::mt19937_64. The engine's output sequence is fixed by
/// the standard; the real-valued conversions below are done by hand because
/// std::*_distribution output differs between standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard normal via Box-Muller (no cached second variate).
  double normal();
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

 private:
  std::mt19937_64 engine_;
};

}  // namespace ssc
