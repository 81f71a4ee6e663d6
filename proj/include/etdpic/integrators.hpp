#pragma once

#include "etdpic/core.hpp"
#include "etdpic/fields.hpp"

namespace etdpic {

/// Inner step of the fine RK4 solver: eps^p for p in {5/4, 3/2, 7/4, 2}
/// (default 3/2), or an absolute step.
class FineStepPolicy {
 public:
  FineStepPolicy() = default;
  static FineStepPolicy exponent(double p);
  static FineStepPolicy absolute(double step);

  bool is_absolute() const { return absolute_; }
  double exponent_value() const { return exponent_; }

  /// Step for the given eps. Throws std::invalid_argument when the step is
  /// not below a quarter of the nominal fast period 2*pi*eps.
  double step(double eps) const;

 private:
  bool absolute_ = false;
  double exponent_ = 1.5;
  double step_ = 0.0;
};

/// n steps of length h covering `duration`, the last one of length `last`.
struct StepSchedule {
  std::size_t n = 0;
  double h = 0.0;
  double last = 0.0;
};

StepSchedule make_schedule(double duration, double h);

/// One classical RK4 step of R' = V/eps, V' = -R/eps + E(t, R) for every
/// particle. A self-consistent field is re-solved from the ensemble first and
/// held frozen over the four stages.
void rk4_step(Ensemble& ensemble, FieldModel& field, double eps, double t, double h);

/// ceil(duration / step) RK4 steps, the last one shortened so exactly
/// `duration` is covered.
void rk4_integrate(Ensemble& ensemble, FieldModel& field, Stiffness eps, double t0,
                   double duration, const FineStepPolicy& policy);

/// Classical RK4 with an arbitrary fixed step (no fast-period restriction);
/// the coarse-step baseline of the stability comparison.
void rk4_fixed_integrate(Ensemble& ensemble, FieldModel& field, Stiffness eps, double t0,
                         double duration, double step);

/// Kick-drift-kick velocity Verlet with both -R/eps and E in the kick.
void verlet_integrate(Ensemble& ensemble, FieldModel& field, Stiffness eps, double t0,
                      double duration, double step);

/// Second-order exponential Runge-Kutta: the rotation is solved exactly and
/// the force is interpolated linearly in time between t_n and a predictor.
void etdrk2_integrate(Ensemble& ensemble, FieldModel& field, Stiffness eps, double t0,
                      double duration, double step);

/// Closed-form solution of the linear case E = -R, started from state0 at time s.
PhaseState linear_exact(PhaseState state0, Stiffness eps, double s, double t);

/// Period of the linear case, 2*pi*eps / sqrt(1 + eps).
double linear_period(double eps);

/// Kernel weights of the exponential scheme for one step h = theta * eps:
///   forcing    = int_0^h r((h - s)/eps) e2 ds
///   correction = int_0^h (s/h) r((h - s)/eps) e2 ds
struct EtdWeights {
  PhaseState forcing;
  PhaseState correction;
};
EtdWeights etd_weights(double eps, double h);

}  // namespace etdpic
