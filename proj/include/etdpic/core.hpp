#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace etdpic {

/// A point (r, v) of the 2D phase space. Both components are dimensionless.
struct PhaseState {
  double r = 0.0;
  double v = 0.0;

  friend constexpr PhaseState operator+(PhaseState a, PhaseState b) { return {a.r + b.r, a.v + b.v}; }
  friend constexpr PhaseState operator-(PhaseState a, PhaseState b) { return {a.r - b.r, a.v - b.v}; }
  friend constexpr PhaseState operator*(double s, PhaseState a) { return {s * a.r, s * a.v}; }
  friend constexpr bool operator==(PhaseState, PhaseState) = default;
};

inline double norm(PhaseState s) { return std::hypot(s.r, s.v); }
inline bool is_finite(PhaseState s) { return std::isfinite(s.r) && std::isfinite(s.v); }

/// Applies the rotation matrix r(tau) = [[cos, sin], [-sin, cos]] to s.
/// tau is an angle; callers pass time / eps.
PhaseState rotate(PhaseState s, double tau);

struct Particle {
  PhaseState state;
  double weight = 0.0;
};

/// Thrown when an integration produces a non-finite state.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Weighted macroparticle set. Particle order is stable and weights are
/// fixed at construction: only states can be mutated.
class Ensemble {
 public:
  Ensemble() = default;
  explicit Ensemble(std::span<const Particle> particles);

  void add(Particle p);

  std::size_t size() const { return states_.size(); }
  bool empty() const { return states_.empty(); }

  std::span<PhaseState> states() { return states_; }
  std::span<const PhaseState> states() const { return states_; }
  std::span<const double> weights() const { return weights_; }

  PhaseState& state(std::size_t k) { return states_[k]; }
  const PhaseState& state(std::size_t k) const { return states_[k]; }
  double weight(std::size_t k) const { return weights_[k]; }

  double total_weight() const;

  /// Throws NumericalError naming the first non-finite particle.
  void check_finite(double t) const;

 private:
  std::vector<PhaseState> states_;
  std::vector<double> weights_;
};

/// The small parameter eps in (0, 1].
class Stiffness {
 public:
  explicit Stiffness(double eps);
  double value() const { return eps_; }

 private:
  double eps_;
};

}  // namespace etdpic
