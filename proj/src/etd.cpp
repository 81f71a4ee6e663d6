#include "etdpic/etd.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace etdpic {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

int sign_of(double x) { return (x > 0.0) - (x < 0.0); }

}  // namespace

double nominal_period(double eps) { return kTwoPi * eps; }

DtDecomposition decompose_dt(double dt, double period) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("dt must be positive");
  if (!(period > 0.0) || !std::isfinite(period)) {
    throw std::invalid_argument("period must be positive");
  }
  const double tol = 8.0 * std::numeric_limits<double>::epsilon() * dt;
  auto n = static_cast<std::int64_t>(std::floor(dt / period));
  double rem = dt - static_cast<double>(n) * period;
  if (rem < 0.0) {
    // dt / period rounded up onto an integer.
    if (rem >= -tol) {
      rem = 0.0;
    } else {
      --n;
      rem = dt - static_cast<double>(n) * period;
    }
  }
  if (rem >= period - tol) {
    ++n;
    rem = 0.0;
  }
  return {n, rem};
}

DtDecomposition etd_pic_step(Ensemble& ensemble, FieldModel& field, const EtdConfig& config,
                             double t_n) {
  const DtDecomposition dec = decompose_dt(config.dt, config.period);

  if (dec.periods >= 1) {
    Ensemble one_period = ensemble;
    rk4_integrate(one_period, field, config.eps, t_n, config.period, config.fine);

    // U_N = U_1 + (N - 1)(U_1 - U_0); identical to U_0 + N(U_1 - U_0) and
    // exactly U_1 when N = 1.
    const double extra = static_cast<double>(dec.periods - 1);
    auto states = ensemble.states();
    const auto advanced = one_period.states();
    for (std::size_t k = 0; k < states.size(); ++k) {
      states[k] = dec.periods == 1 ? advanced[k] : advanced[k] + extra * (advanced[k] - states[k]);
    }
    ensemble.check_finite(t_n + static_cast<double>(dec.periods) * config.period);
  }

  const double t_rem = t_n + static_cast<double>(dec.periods) * config.period;
  rk4_integrate(ensemble, field, config.eps, t_rem, dec.remainder, config.fine);
  return dec;
}

PeriodEstimate estimate_periods(const Ensemble& ensemble, FieldModel field, Stiffness eps,
                                const FineStepPolicy& fine) {
  const std::size_t n = ensemble.size();
  PeriodEstimate out;
  out.periods.assign(n, std::nullopt);

  std::vector<bool> included(n, true);
  std::size_t remaining = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const PhaseState s = ensemble.state(k);
    if (s.r == 0.0 && s.v == 0.0) {
      included[k] = false;
      ++out.excluded;
    } else {
      ++remaining;
    }
  }

  struct Crossings {
    int last_sign = 0;
    int count = 0;
    double first = 0.0;
  };
  std::vector<Crossings> track(n);
  for (std::size_t k = 0; k < n; ++k) track[k].last_sign = sign_of(ensemble.state(k).v);

  Ensemble work = ensemble;
  const double h = fine.step(eps.value());
  const double horizon = 3.0 * nominal_period(eps.value());
  std::vector<double> v_prev(n);
  double t = 0.0;
  std::size_t step = 0;
  while (remaining > 0) {
    if (t >= horizon) {
      std::ostringstream msg;
      msg << remaining << " particle(s) did not reach a third extremum within 3 nominal periods";
      throw NumericalError(msg.str());
    }
    for (std::size_t k = 0; k < n; ++k) v_prev[k] = work.state(k).v;
    rk4_step(work, field, eps.value(), t, h);
    const double t_next = static_cast<double>(++step) * h;

    for (std::size_t k = 0; k < n; ++k) {
      if (!included[k] || out.periods[k]) continue;
      const double v = work.state(k).v;
      const int s = sign_of(v);
      auto& c = track[k];
      if (s == 0) continue;
      if (c.last_sign != 0 && s != c.last_sign) {
        const double vp = v_prev[k];
        const double crossing = vp == 0.0 ? t : t + (t_next - t) * vp / (vp - v);
        ++c.count;
        if (c.count == 1) c.first = crossing;
        if (c.count == 3) {
          out.periods[k] = crossing - c.first;
          --remaining;
        }
      }
      c.last_sign = s;
    }
    t = t_next;
  }

  bool any_weighted = false;
  for (std::size_t k = 0; k < n; ++k) any_weighted = any_weighted || (included[k] && ensemble.weight(k) > 0.0);

  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t k = 0; k < n; ++k) {
    if (!out.periods[k]) continue;
    if (any_weighted && ensemble.weight(k) == 0.0) continue;
    sum += *out.periods[k];
    ++count;
  }
  if (count == 0) throw NumericalError("no oscillating particle to measure a period from");
  out.mean = sum / static_cast<double>(count);
  return out;
}

double estimate_mean_period(const Ensemble& ensemble, const FieldModel& field, Stiffness eps,
                            const FineStepPolicy& fine) {
  return estimate_periods(ensemble, field, eps, fine).mean;
}

PeriodChoice resolve_period(PeriodKind kind, const Ensemble& ensemble, const FieldModel& field,
                            Stiffness eps, const FineStepPolicy& fine) {
  const double e = eps.value();
  switch (kind) {
    case PeriodKind::Nominal:
      return {kind, nominal_period(e)};
    case PeriodKind::ExactLinear:
      return {kind, linear_period(e)};
    case PeriodKind::EstimatedMean: {
      const double p = estimate_mean_period(ensemble, field, eps, fine);
      if (!(p > std::numbers::pi * e && p < 4.0 * std::numbers::pi * e)) {
        std::ostringstream msg;
        msg << "estimated mean period " << p << " outside (pi*eps, 4*pi*eps)";
        throw NumericalError(msg.str());
      }
      return {kind, p};
    }
  }
  throw std::invalid_argument("unknown period policy");
}

}  // namespace etdpic
