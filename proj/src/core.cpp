#include "etdpic/core.hpp"

#include <sstream>

namespace etdpic {

PhaseState rotate(PhaseState s, double tau) {
  const double c = std::cos(tau);
  const double sn = std::sin(tau);
  return {c * s.r + sn * s.v, -sn * s.r + c * s.v};
}

Ensemble::Ensemble(std::span<const Particle> particles) {
  states_.reserve(particles.size());
  weights_.reserve(particles.size());
  for (const auto& p : particles) add(p);
}

void Ensemble::add(Particle p) {
  if (!(p.weight >= 0.0) || !std::isfinite(p.weight)) {
    throw std::invalid_argument("particle weight must be finite and non-negative");
  }
  states_.push_back(p.state);
  weights_.push_back(p.weight);
}

double Ensemble::total_weight() const {
  double sum = 0.0;
  for (double w : weights_) sum += w;
  return sum;
}

void Ensemble::check_finite(double t) const {
  for (std::size_t k = 0; k < states_.size(); ++k) {
    if (!is_finite(states_[k])) {
      std::ostringstream msg;
      msg << "non-finite state for particle " << k << " at t=" << t;
      throw NumericalError(msg.str());
    }
  }
}

Stiffness::Stiffness(double eps) : eps_(eps) {
  if (!(eps > 0.0 && eps <= 1.0)) {
    throw std::invalid_argument("eps must lie in (0, 1]");
  }
}

}  // namespace etdpic
