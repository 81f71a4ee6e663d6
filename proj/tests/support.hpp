#pragma once

#include <random>

#include "etdpic/core.hpp"

namespace etdpic::testing {

// Small deterministic generator for property tests.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  PhaseState state(double scale) { return {uniform(-scale, scale), uniform(-scale, scale)}; }
  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

inline Ensemble single(PhaseState s, double w = 1.0) {
  Ensemble e;
  e.add({s, w});
  return e;
}

inline double dist(PhaseState a, PhaseState b) { return norm(a - b); }

}  // namespace etdpic::testing
