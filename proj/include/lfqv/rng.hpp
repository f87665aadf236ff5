#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace lfqv {

// Seeded generator with platform-independent real-valued draws
// (std::*_distribution output varies between standard libraries).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return n ? engine_() % n : 0; }
  // Standard normal via Box-Muller; no cached spare so the state stays a
  // pure function of the number of calls.
  double normal();

 private:
  std::mt19937_64 engine_;
};

// SplitMix64 finalizer; derives independent stream seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace lfqv
