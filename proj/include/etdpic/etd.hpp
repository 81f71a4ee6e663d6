#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "etdpic/core.hpp"
#include "etdpic/fields.hpp"
#include "etdpic/integrators.hpp"

namespace etdpic {

enum class PeriodKind {
  Nominal,        ///< P = 2*pi*eps
  ExactLinear,    ///< P = 2*pi*eps / sqrt(1 + eps)
  EstimatedMean,  ///< P measured once at t = 0 from the ensemble
};

/// Fast period used by the large-step pusher, resolved to a number.
struct PeriodChoice {
  PeriodKind kind = PeriodKind::Nominal;
  double value = 0.0;
};

double nominal_period(double eps);

/// dt = periods * P + remainder with remainder in [0, P).
struct DtDecomposition {
  std::int64_t periods = 0;
  double remainder = 0.0;
};

DtDecomposition decompose_dt(double dt, double period);

struct EtdConfig {
  double dt;
  Stiffness eps;
  double period;
  FineStepPolicy fine{};
};

/// Advances the whole ensemble from t_n to t_n + dt:
///   1. fine RK4 over one period P,
///   2. linear extrapolation of the one-period increment to N periods,
///   3. fine RK4 over the remainder.
/// Returns the decomposition that was used.
DtDecomposition etd_pic_step(Ensemble& ensemble, FieldModel& field, const EtdConfig& config,
                             double t_n);

struct PeriodEstimate {
  double mean = 0.0;
  /// Per-particle period; empty for excluded particles.
  std::vector<std::optional<double>> periods;
  std::size_t excluded = 0;
};

/// Integrates a copy of the ensemble with the fine solver until every
/// particle has seen three sign changes of V and measures the period as the
/// time between the first and the third. Particles exactly at the origin are
/// excluded. The mean runs over positive-weight particles, or over all of
/// them when none carries weight (tracer-only runs). Throws NumericalError if
/// a particle has not completed within three nominal periods.
PeriodEstimate estimate_periods(const Ensemble& ensemble, FieldModel field, Stiffness eps,
                                const FineStepPolicy& fine);

double estimate_mean_period(const Ensemble& ensemble, const FieldModel& field, Stiffness eps,
                            const FineStepPolicy& fine);

/// Resolves a period policy. EstimatedMean outside (pi*eps, 4*pi*eps) throws.
PeriodChoice resolve_period(PeriodKind kind, const Ensemble& ensemble, const FieldModel& field,
                            Stiffness eps, const FineStepPolicy& fine);

}  // namespace etdpic
