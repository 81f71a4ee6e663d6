#include "etdpic/integrators.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace etdpic {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Invokes fn with a force functor r -> E(r). Self-consistent fields must
// already be solved for the current configuration.
template <class Fn>
void with_force(FieldModel& field, Fn&& fn) {
  if (auto* sc = std::get_if<SelfConsistentField>(&field)) {
    fn([sc](double r) { return interpolate(sc->grid, r, &sc->diagnostics); });
  } else if (std::holds_alternative<CubicField>(field)) {
    fn([](double r) { return -r * r * r; });
  } else {
    fn([](double r) { return -r; });
  }
}

[[noreturn]] void throw_non_finite(std::size_t k, double t) {
  std::ostringstream msg;
  msg << "non-finite state for particle " << k << " at t=" << t;
  throw NumericalError(msg.str());
}

void check_duration(double duration) {
  if (!(duration >= 0.0) || !std::isfinite(duration)) {
    throw std::invalid_argument("integration duration must be finite and non-negative");
  }
}

}  // namespace

StepSchedule make_schedule(double duration, double h) {
  if (duration == 0.0) return {};
  auto n = static_cast<std::size_t>(std::ceil(duration / h));
  if (n == 0) n = 1;
  double last = duration - static_cast<double>(n - 1) * h;
  while (n > 1 && last <= 0.0) {
    --n;
    last = duration - static_cast<double>(n - 1) * h;
  }
  return {n, h, last};
}

namespace {

template <class Force>
PhaseState rk4_update(PhaseState s, double inv_eps, double h, const Force& force) {
  auto rhs = [&](PhaseState u) { return PhaseState{u.v * inv_eps, -u.r * inv_eps + force(u.r)}; };
  const PhaseState k1 = rhs(s);
  const PhaseState k2 = rhs(s + (0.5 * h) * k1);
  const PhaseState k3 = rhs(s + (0.5 * h) * k2);
  const PhaseState k4 = rhs(s + h * k3);
  return s + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace

FineStepPolicy FineStepPolicy::exponent(double p) {
  constexpr double allowed[] = {1.25, 1.5, 1.75, 2.0};
  bool ok = false;
  for (double a : allowed) ok = ok || p == a;
  if (!ok) throw std::invalid_argument("fine-step exponent must be one of 1.25, 1.5, 1.75, 2");
  FineStepPolicy policy;
  policy.exponent_ = p;
  return policy;
}

FineStepPolicy FineStepPolicy::absolute(double step) {
  if (!(step > 0.0) || !std::isfinite(step)) {
    throw std::invalid_argument("absolute fine step must be positive");
  }
  FineStepPolicy policy;
  policy.absolute_ = true;
  policy.step_ = step;
  return policy;
}

double FineStepPolicy::step(double eps) const {
  const double h = absolute_ ? step_ : std::pow(eps, exponent_);
  if (!(h <= kTwoPi * eps / 4.0)) {
    throw std::invalid_argument("fine step must not exceed a quarter of the fast period");
  }
  return h;
}

void rk4_step(Ensemble& ensemble, FieldModel& field, double eps, double t, double h) {
  refresh_field(field, ensemble);
  const double inv_eps = 1.0 / eps;
  auto states = ensemble.states();
  with_force(field, [&](const auto& force) {
    for (std::size_t k = 0; k < states.size(); ++k) {
      states[k] = rk4_update(states[k], inv_eps, h, force);
      if (!is_finite(states[k])) throw_non_finite(k, t + h);
    }
  });
}

void rk4_integrate(Ensemble& ensemble, FieldModel& field, Stiffness eps, double t0,
                   double duration, const FineStepPolicy& policy) {
  rk4_fixed_integrate(ensemble, field, eps, t0, duration, policy.step(eps.value()));
}

void rk4_fixed_integrate(Ensemble& ensemble, FieldModel& field, Stiffness eps, double t0,
                         double duration, double step) {
  check_duration(duration);
  if (!(step > 0.0)) throw std::invalid_argument("RK4 step must be positive");
  const StepSchedule plan = make_schedule(duration, step);
  if (plan.n == 0) return;

  if (is_self_consistent(field)) {
    for (std::size_t i = 0; i < plan.n; ++i) {
      const double h = i + 1 == plan.n ? plan.last : plan.h;
      rk4_step(ensemble, field, eps.value(), t0 + static_cast<double>(i) * plan.h, h);
    }
    return;
  }

  // Analytic fields decouple the particles; integrate each one in turn.
  const double inv_eps = 1.0 / eps.value();
  auto states = ensemble.states();
  with_force(field, [&](const auto& force) {
    for (std::size_t k = 0; k < states.size(); ++k) {
      PhaseState s = states[k];
      for (std::size_t i = 0; i < plan.n; ++i) {
        const double h = i + 1 == plan.n ? plan.last : plan.h;
        s = rk4_update(s, inv_eps, h, force);
        if (!is_finite(s)) throw_non_finite(k, t0 + static_cast<double>(i) * plan.h + h);
      }
      states[k] = s;
    }
  });
}

void verlet_integrate(Ensemble& ensemble, FieldModel& field, Stiffness eps, double t0,
                      double duration, double step) {
  check_duration(duration);
  if (!(step > 0.0)) throw std::invalid_argument("Verlet step must be positive");
  const StepSchedule plan = make_schedule(duration, step);
  if (plan.n == 0) return;

  const double inv_eps = 1.0 / eps.value();
  auto states = ensemble.states();
  std::vector<double> accel(states.size());
  auto compute_accel = [&] {
    refresh_field(field, ensemble);
    with_force(field, [&](const auto& force) {
      for (std::size_t k = 0; k < states.size(); ++k) {
        accel[k] = -states[k].r * inv_eps + force(states[k].r);
      }
    });
  };

  compute_accel();
  for (std::size_t i = 0; i < plan.n; ++i) {
    const double h = i + 1 == plan.n ? plan.last : plan.h;
    for (std::size_t k = 0; k < states.size(); ++k) {
      states[k].v += 0.5 * h * accel[k];
      states[k].r += h * states[k].v * inv_eps;
    }
    compute_accel();
    const double t = t0 + static_cast<double>(i) * plan.h + h;
    for (std::size_t k = 0; k < states.size(); ++k) {
      states[k].v += 0.5 * h * accel[k];
      if (!is_finite(states[k])) throw_non_finite(k, t);
    }
  }
}

EtdWeights etd_weights(double eps, double h) {
  const double theta = h / eps;
  const double half_sin = std::sin(0.5 * theta);
  const double one_minus_cos = 2.0 * half_sin * half_sin;
  EtdWeights w;
  w.forcing = {eps * one_minus_cos, eps * std::sin(theta)};
  if (std::abs(theta) < 1e-3) {
    const double t2 = theta * theta;
    w.correction = {eps * t2 * (1.0 / 6.0 - t2 * (1.0 / 120.0 - t2 / 5040.0)),
                    eps * theta * (0.5 - t2 * (1.0 / 24.0 - t2 / 720.0))};
  } else {
    w.correction = {eps * (1.0 - std::sin(theta) / theta), eps * one_minus_cos / theta};
  }
  return w;
}

void etdrk2_integrate(Ensemble& ensemble, FieldModel& field, Stiffness eps, double t0,
                      double duration, double step) {
  check_duration(duration);
  if (!(step > 0.0)) throw std::invalid_argument("ETDRK2 step must be positive");
  const StepSchedule plan = make_schedule(duration, step);
  if (plan.n == 0) return;

  auto states = ensemble.states();
  std::vector<double> force_start(states.size());
  for (std::size_t i = 0; i < plan.n; ++i) {
    const double h = i + 1 == plan.n ? plan.last : plan.h;
    const double theta = h / eps.value();
    const EtdWeights w = etd_weights(eps.value(), h);

    refresh_field(field, ensemble);
    with_force(field, [&](const auto& force) {
      for (std::size_t k = 0; k < states.size(); ++k) {
        force_start[k] = force(states[k].r);
        states[k] = rotate(states[k], theta) + force_start[k] * w.forcing;
      }
    });

    // Predictor positions now sit in the ensemble.
    refresh_field(field, ensemble);
    const double t = t0 + static_cast<double>(i) * plan.h + h;
    with_force(field, [&](const auto& force) {
      for (std::size_t k = 0; k < states.size(); ++k) {
        states[k] = states[k] + (force(states[k].r) - force_start[k]) * w.correction;
        if (!is_finite(states[k])) throw_non_finite(k, t);
      }
    });
  }
}

double linear_period(double eps) { return kTwoPi * eps / std::sqrt(1.0 + eps); }

PhaseState linear_exact(PhaseState state0, Stiffness eps, double s, double t) {
  if (!std::isfinite(t - s)) throw std::invalid_argument("linear_exact needs finite times");
  const double root = std::sqrt(1.0 + eps.value());
  const double phase = root / eps.value() * (t - s);
  const double c = std::cos(phase);
  const double sn = std::sin(phase);
  return {state0.v / root * sn + state0.r * c, state0.v * c - state0.r * root * sn};
}

}  // namespace etdpic
