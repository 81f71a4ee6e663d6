#include "etdpic/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <boost/math/distributions/normal.hpp>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace etdpic {

// ---------------------------------------------------------------------------
// Beam sampling

namespace {

double radical_inverse_base2(std::uint64_t k) {
  double inv = 0.5;
  double out = 0.0;
  while (k) {
    if (k & 1u) out += inv;
    inv *= 0.5;
    k >>= 1u;
  }
  return out;
}

}  // namespace

Ensemble sample_beam(const BeamSpec& spec) {
  if (!(spec.v_th > 0.0) || !(spec.half_width > 0.0)) {
    throw std::invalid_argument("beam needs positive v_th and half width");
  }
  const std::size_t n = spec.n_particles;
  Ensemble out;
  if (n == 0) return out;
  const double w = 1.0 / static_cast<double>(n);
  const double a = spec.half_width;

  if (spec.sampling == Sampling::PseudoRandom) {
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> position(-a, a);
    std::normal_distribution<double> velocity(0.0, spec.v_th);
    for (std::size_t k = 0; k < n; ++k) {
      const double r = position(rng);
      const double v = velocity(rng);
      out.add({{r, v}, w});
    }
    return out;
  }

  // Hammersley set: stratified positions, base-2 radical inverse through the
  // normal quantile for velocities. Cells of the velocity sequence are
  // sampled at their centres so that u stays inside (0, 1).
  const boost::math::normal_distribution<double> normal(0.0, spec.v_th);
  const double levels = std::ldexp(1.0, static_cast<int>(std::ceil(std::log2(static_cast<double>(n)))));
  for (std::size_t k = 0; k < n; ++k) {
    const double r = -a + 2.0 * a * (static_cast<double>(k) + 0.5) / static_cast<double>(n);
    const double u = radical_inverse_base2(k) + 0.5 / levels;
    out.add({{r, boost::math::quantile(normal, u)}, w});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Names

std::string to_string(Case c) {
  switch (c) {
    case Case::Linear: return "linear";
    case Case::Cubic: return "cubic";
    case Case::VlasovPoisson: return "vlasov-poisson";
  }
  return "?";
}

std::string to_string(Scheme s) {
  switch (s) {
    case Scheme::Rk4Ref: return "rk4-ref";
    case Scheme::Rk4: return "rk4";
    case Scheme::Verlet: return "verlet";
    case Scheme::Etdrk2: return "etdrk2";
    case Scheme::EtdPic: return "etd-pic";
    case Scheme::EtdPicModified: return "etd-pic-modified";
  }
  return "?";
}

std::string to_string(Probe p) {
  switch (p) {
    case Probe::Onsm: return "onsm";
    case Probe::Offsm: return "offsm";
    case Probe::None: return "none";
  }
  return "?";
}

std::string to_string(PeriodKind k) {
  switch (k) {
    case PeriodKind::Nominal: return "nominal";
    case PeriodKind::ExactLinear: return "exact-linear";
    case PeriodKind::EstimatedMean: return "estimated-mean";
  }
  return "?";
}

std::string to_string(Sampling s) {
  return s == Sampling::PseudoRandom ? "pseudo-random" : "quiet-start";
}

namespace {

template <class E, std::size_t N>
E parse_enum(const std::string& s, const E (&values)[N], const char* what) {
  for (E v : values) {
    if (to_string(v) == s) return v;
  }
  throw std::invalid_argument(std::string("unknown ") + what + ": " + s);
}

}  // namespace

Case parse_case(const std::string& s) {
  static constexpr Case all[] = {Case::Linear, Case::Cubic, Case::VlasovPoisson};
  return parse_enum(s, all, "case");
}

Scheme parse_scheme(const std::string& s) {
  static constexpr Scheme all[] = {Scheme::Rk4Ref, Scheme::Rk4, Scheme::Verlet, Scheme::Etdrk2, Scheme::EtdPic,
                                   Scheme::EtdPicModified};
  return parse_enum(s, all, "scheme");
}

Probe parse_probe(const std::string& s) {
  static constexpr Probe all[] = {Probe::Onsm, Probe::Offsm, Probe::None};
  return parse_enum(s, all, "probe");
}

PeriodKind parse_period_kind(const std::string& s) {
  static constexpr PeriodKind all[] = {PeriodKind::Nominal, PeriodKind::ExactLinear,
                                       PeriodKind::EstimatedMean};
  return parse_enum(s, all, "period policy");
}

Sampling parse_sampling(const std::string& s) {
  static constexpr Sampling all[] = {Sampling::PseudoRandom, Sampling::QuietStart};
  return parse_enum(s, all, "sampling");
}

PhaseState probe_state(Probe p) {
  switch (p) {
    case Probe::Onsm: return probes::onsm;
    case Probe::Offsm: return probes::offsm;
    case Probe::None: break;
  }
  throw std::invalid_argument("probe 'none' has no state");
}

// ---------------------------------------------------------------------------
// Manifest

void RunManifest::validate() const {
  Stiffness{eps};
  if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("dt must be positive");
  if (!(t_final > 0.0) || !std::isfinite(t_final)) {
    throw std::invalid_argument("t_final must be positive");
  }
  FineStepPolicy::exponent(fine_exponent).step(eps);
  if (!(grid.r_min < 0.0 && 0.0 < grid.r_max)) {
    throw std::invalid_argument("grid domain must contain the origin strictly");
  }
  if (grid.n_cells == 0) throw std::invalid_argument("grid needs at least one cell");
  if (!(beam.v_th > 0.0) || !(beam.half_width > 0.0)) {
    throw std::invalid_argument("beam needs positive v_th and half width");
  }
  if (field_case == Case::VlasovPoisson) {
    if (beam.n_particles == 0) throw std::invalid_argument("vlasov-poisson runs need particles");
    if (grid.r_min > -beam.half_width || grid.r_max < beam.half_width) {
      throw std::invalid_argument("grid domain must contain the initial beam support");
    }
  }
  if (scheme == Scheme::EtdPicModified && period_policy != PeriodKind::EstimatedMean) {
    throw std::invalid_argument("etd-pic-modified uses the estimated-mean period policy");
  }
  if (probe == Probe::None && beam.n_particles == 0) {
    throw std::invalid_argument("run has neither beam particles nor a probe");
  }
  for (double s : snapshot_times) {
    if (!(s >= 0.0 && s <= t_final)) throw std::invalid_argument("snapshot time outside [0, t_final]");
  }
}

std::string format_manifest(const RunManifest& m,
                            const std::vector<std::pair<std::string, std::string>>& extra) {
  std::ostringstream out;
  out << "version=" << kCodeVersion << '\n'
      << "case=" << to_string(m.field_case) << '\n'
      << "scheme=" << to_string(m.scheme) << '\n'
      << "eps=" << format_real(m.eps) << '\n'
      << "dt=" << format_real(m.dt) << '\n'
      << "t_final=" << format_real(m.t_final) << '\n'
      << "period_policy=" << to_string(m.period_policy) << '\n'
      << "fine_exponent=" << format_real(m.fine_exponent) << '\n'
      << "probe=" << to_string(m.probe) << '\n'
      << "probe_onsm=" << format_real(probes::onsm.r) << ',' << format_real(probes::onsm.v) << '\n'
      << "probe_offsm=" << format_real(probes::offsm.r) << ',' << format_real(probes::offsm.v) << '\n'
      << "particles=" << m.beam.n_particles << '\n'
      << "v_th=" << format_real(m.beam.v_th) << '\n'
      << "half_width=" << format_real(m.beam.half_width) << '\n'
      << "seed=" << m.beam.seed << '\n'
      << "sampling=" << to_string(m.beam.sampling) << '\n'
      << "r_min=" << format_real(m.grid.r_min) << '\n'
      << "r_max=" << format_real(m.grid.r_max) << '\n'
      << "cells=" << m.grid.n_cells << '\n'
      << "snapshot_times=";
  for (std::size_t i = 0; i < m.snapshot_times.size(); ++i) {
    out << (i ? "," : "") << format_real(m.snapshot_times[i]);
  }
  out << '\n';
  for (const auto& [k, v] : extra) out << k << '=' << v << '\n';
  return out.str();
}

namespace {

double parse_real(const std::string& key, const std::string& s) {
  std::size_t used = 0;
  double x = 0.0;
  try {
    x = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty()) throw std::invalid_argument("bad number for " + key + ": " + s);
  return x;
}

std::uint64_t parse_uint(const std::string& key, const std::string& s) {
  std::size_t used = 0;
  std::uint64_t x = 0;
  try {
    if (!s.empty() && s[0] == '-') throw std::invalid_argument("negative");
    x = std::stoull(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty()) throw std::invalid_argument("bad integer for " + key + ": " + s);
  return x;
}

}  // namespace

RunManifest parse_manifest(const std::string& text) {
  RunManifest m;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("manifest line without '=': " + line);
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    if (key == "case") m.field_case = parse_case(value);
    else if (key == "scheme") m.scheme = parse_scheme(value);
    else if (key == "eps") m.eps = parse_real(key, value);
    else if (key == "dt") m.dt = parse_real(key, value);
    else if (key == "t_final") m.t_final = parse_real(key, value);
    else if (key == "period_policy") m.period_policy = parse_period_kind(value);
    else if (key == "fine_exponent") m.fine_exponent = parse_real(key, value);
    else if (key == "probe") m.probe = parse_probe(value);
    else if (key == "particles") m.beam.n_particles = parse_uint(key, value);
    else if (key == "v_th") m.beam.v_th = parse_real(key, value);
    else if (key == "half_width") m.beam.half_width = parse_real(key, value);
    else if (key == "seed") m.beam.seed = parse_uint(key, value);
    else if (key == "sampling") m.beam.sampling = parse_sampling(value);
    else if (key == "r_min") m.grid.r_min = parse_real(key, value);
    else if (key == "r_max") m.grid.r_max = parse_real(key, value);
    else if (key == "cells") m.grid.n_cells = parse_uint(key, value);
    else if (key == "snapshot_times") {
      m.snapshot_times.clear();
      std::istringstream items(value);
      std::string item;
      while (std::getline(items, item, ',')) m.snapshot_times.push_back(parse_real(key, item));
    }
    // Everything else (version, probe coordinates, run outputs) is informational.
  }
  return m;
}

FieldModel make_field(Case c, const GridSpec& grid) {
  switch (c) {
    case Case::Linear: return LinearField{};
    case Case::Cubic: return CubicField{};
    case Case::VlasovPoisson:
      return SelfConsistentField{SpatialGrid(grid.r_min, grid.r_max, grid.n_cells)};
  }
  throw std::invalid_argument("unknown case");
}

// ---------------------------------------------------------------------------
// Error metric and time grids

double global_error(const Trajectory& a, const Trajectory& b) {
  if (a.times != b.times || a.states.size() != a.times.size() ||
      b.states.size() != b.times.size()) {
    throw std::invalid_argument("trajectories are not sampled on the same time grid");
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < a.states.size(); ++i) {
    const double d = norm(a.states[i] - b.states[i]);
    if (std::isnan(d)) return std::numeric_limits<double>::infinity();
    worst = std::max(worst, d);
  }
  return worst;
}

std::vector<double> macro_times(double t_final, double dt) {
  if (!(dt > 0.0) || !(t_final > 0.0)) throw std::invalid_argument("macro_times needs dt, t_final > 0");
  const double ratio = t_final / dt;
  const double nearest = std::round(ratio);
  const auto n = static_cast<std::size_t>(std::abs(ratio - nearest) < 1e-9 * std::max(1.0, ratio)
                                              ? nearest
                                              : std::ceil(ratio));
  std::vector<double> times(n + 1);
  for (std::size_t i = 0; i < n; ++i) times[i] = static_cast<double>(i) * dt;
  times[n] = t_final;
  return times;
}

// ---------------------------------------------------------------------------
// Reference solutions

namespace {

// Integrates ensemble on the fixed fine grid t_i = i*h from t = 0 and reports
// the exact state at each requested time via a side step on a copy, so the
// sample at time t is bitwise rk4_integrate(0 -> t).
void integrate_sampled(Ensemble& ensemble, FieldModel& field, Stiffness eps,
                       const FineStepPolicy& fine, const std::vector<double>& sorted_times,
                       const std::function<void(std::size_t, const Ensemble&)>& record) {
  const double h = fine.step(eps.value());
  std::size_t done = 0;  // full grid steps applied to `ensemble`
  for (std::size_t i = 0; i < sorted_times.size(); ++i) {
    const double t = sorted_times[i];
    const StepSchedule plan = make_schedule(t, h);
    if (plan.n == 0) {
      record(i, ensemble);
      continue;
    }
    if (plan.n - 1 < done) throw std::logic_error("sample times must be sorted");
    for (; done < plan.n - 1; ++done) {
      rk4_step(ensemble, field, eps.value(), static_cast<double>(done) * h, h);
    }
    Ensemble side = ensemble;
    rk4_step(side, field, eps.value(), static_cast<double>(plan.n - 1) * h, plan.last);
    record(i, side);
  }
}

std::vector<double> sorted_unique(std::vector<double> times) {
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  return times;
}

}  // namespace

Ensemble initial_ensemble(const RunManifest& m) {
  Ensemble e = sample_beam(m.beam);
  if (m.probe != Probe::None) e.add({probe_state(m.probe), 0.0});
  return e;
}

ReferenceCache::Samples compute_reference(const RunManifest& m, const std::vector<double>& times) {
  const Stiffness eps(m.eps);
  const auto sorted = sorted_unique(times);
  ReferenceCache::Samples out;

  if (m.field_case == Case::Linear) {
    for (double t : sorted) {
      out.onsm[t] = linear_exact(probes::onsm, eps, 0.0, t);
      out.offsm[t] = linear_exact(probes::offsm, eps, 0.0, t);
    }
    return out;
  }

  Ensemble e;
  if (m.field_case == Case::VlasovPoisson) e = sample_beam(m.beam);
  const std::size_t first_tracer = e.size();
  e.add({probes::onsm, 0.0});
  e.add({probes::offsm, 0.0});
  FieldModel field = make_field(m.field_case, m.grid);
  integrate_sampled(e, field, eps, FineStepPolicy::exponent(m.fine_exponent), sorted,
                    [&](std::size_t i, const Ensemble& s) {
                      out.onsm[sorted[i]] = s.state(first_tracer);
                      out.offsm[sorted[i]] = s.state(first_tracer + 1);
                    });
  return out;
}

std::string ReferenceCache::key(const RunManifest& m) const {
  std::ostringstream k;
  k << to_string(m.field_case) << '|' << format_real(m.eps) << '|' << format_real(m.fine_exponent);
  if (m.field_case == Case::VlasovPoisson) {
    k << '|' << m.beam.n_particles << '|' << format_real(m.beam.v_th) << '|'
      << format_real(m.beam.half_width) << '|' << m.beam.seed << '|' << to_string(m.beam.sampling)
      << '|' << format_real(m.grid.r_min) << '|' << format_real(m.grid.r_max) << '|'
      << m.grid.n_cells;
  }
  return k.str();
}

void ReferenceCache::prefetch(const RunManifest& m, const std::vector<double>& times) {
  const std::string k = key(m);
  std::vector<double> missing;
  {
    std::lock_guard lock(mutex_);
    const auto& have = entries_[k].onsm;
    for (double t : times) {
      if (!have.count(t)) missing.push_back(t);
    }
  }
  if (missing.empty()) return;
  Samples fresh = compute_reference(m, missing);
  std::lock_guard lock(mutex_);
  ++computations_;
  auto& entry = entries_[k];
  entry.onsm.merge(fresh.onsm);
  entry.offsm.merge(fresh.offsm);
}

Trajectory ReferenceCache::get(const RunManifest& m, Probe probe, const std::vector<double>& times) {
  prefetch(m, times);
  std::lock_guard lock(mutex_);
  const auto& entry = entries_.at(key(m));
  const auto& samples = probe == Probe::Onsm ? entry.onsm : entry.offsm;
  Trajectory out;
  for (double t : times) {
    out.times.push_back(t);
    out.states.push_back(samples.at(t));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Runs

namespace {

Ensemble without_tracers(const Ensemble& e, std::size_t beam_size) {
  Ensemble out;
  for (std::size_t k = 0; k < beam_size; ++k) out.add({e.state(k), e.weight(k)});
  return out;
}

}  // namespace

RunResult run_case(const RunManifest& m, ReferenceCache* cache, bool with_error) {
  m.validate();
  const auto started = std::chrono::steady_clock::now();
  RunResult result;

  const Stiffness eps(m.eps);
  const FineStepPolicy fine = FineStepPolicy::exponent(m.fine_exponent);
  Ensemble ensemble = initial_ensemble(m);
  const std::size_t beam_size = m.beam.n_particles;
  FieldModel field = make_field(m.field_case, m.grid);
  const auto times = macro_times(m.t_final, m.dt);

  // Each requested snapshot is taken at the first macro time at or after it.
  std::set<std::size_t> snapshot_steps;
  for (double s : m.snapshot_times) {
    const auto it = std::lower_bound(times.begin(), times.end(), s - 1e-12);
    snapshot_steps.insert(static_cast<std::size_t>(it - times.begin()));
  }

  auto record = [&](std::size_t i, const Ensemble& e) {
    if (m.probe != Probe::None) {
      result.trajectory.times.push_back(times[i]);
      result.trajectory.states.push_back(e.state(beam_size));
    }
    if (snapshot_steps.count(i)) result.snapshots.emplace_back(times[i], without_tracers(e, beam_size));
  };

  try {
    switch (m.scheme) {
      case Scheme::Rk4Ref: {
        Ensemble last;
        integrate_sampled(ensemble, field, eps, fine, times, [&](std::size_t i, const Ensemble& e) {
          record(i, e);
          if (i + 1 == times.size()) last = e;
        });
        ensemble = std::move(last);
        result.macro_steps = times.size() - 1;
        break;
      }
      case Scheme::Rk4:
      case Scheme::Verlet:
      case Scheme::Etdrk2: {
        record(0, ensemble);
        for (std::size_t i = 0; i + 1 < times.size(); ++i) {
          const double seg = times[i + 1] - times[i];
          if (m.scheme == Scheme::Rk4) {
            rk4_fixed_integrate(ensemble, field, eps, times[i], seg, m.dt);
          } else if (m.scheme == Scheme::Verlet) {
            verlet_integrate(ensemble, field, eps, times[i], seg, m.dt);
          } else {
            etdrk2_integrate(ensemble, field, eps, times[i], seg, m.dt);
          }
          ++result.macro_steps;
          record(i + 1, ensemble);
        }
        break;
      }
      case Scheme::EtdPic:
      case Scheme::EtdPicModified: {
        result.period = resolve_period(m.period_policy, ensemble, field, eps, fine);
        record(0, ensemble);
        for (std::size_t i = 0; i + 1 < times.size(); ++i) {
          const EtdConfig config{times[i + 1] - times[i], eps, result.period.value, fine};
          result.decompositions.push_back(etd_pic_step(ensemble, field, config, times[i]));
          ++result.macro_steps;
          record(i + 1, ensemble);
        }
        break;
      }
    }
  } catch (const NumericalError& e) {
    result.status = "diverged";
    result.message = e.what();
  }

  result.final_ensemble = without_tracers(ensemble, beam_size);

  if (m.probe != Probe::None && with_error) {
    if (result.status == "ok") {
      Trajectory ref;
      if (cache) {
        ref = cache->get(m, m.probe, times);
      } else {
        const auto samples = compute_reference(m, times);
        const auto& chosen = m.probe == Probe::Onsm ? samples.onsm : samples.offsm;
        for (double t : times) {
          ref.times.push_back(t);
          ref.states.push_back(chosen.at(t));
        }
      }
      result.global_error = global_error(result.trajectory, ref);
      if (!std::isfinite(*result.global_error)) result.status = "diverged";
      result.reference = std::move(ref);
    } else {
      result.global_error = std::numeric_limits<double>::infinity();
    }
  }

  result.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

ErrorRow error_row(const RunManifest& m, const RunResult& r) {
  ErrorRow row{m.field_case, m.scheme, m.probe, m.eps, m.dt, 0, 0.0, 0.0,
               r.global_error.value_or(std::numeric_limits<double>::quiet_NaN()), r.wall_time_s,
               r.status};
  if (!r.decompositions.empty()) {
    row.periods = r.decompositions.front().periods;
    row.remainder = r.decompositions.front().remainder;
    row.period = r.period.value;
  }
  return row;
}

std::vector<ErrorRow> sweep_errors(const RunManifest& base, const std::vector<double>& eps_list,
                                   const std::vector<double>& dt_list, Probe probe,
                                   ReferenceCache& cache, unsigned jobs) {
  if (eps_list.empty() || dt_list.empty()) throw std::invalid_argument("sweep lists must be nonempty");
  if (probe == Probe::None) throw std::invalid_argument("error sweeps need a probe");

  std::vector<RunManifest> cells;
  for (double eps : eps_list) {
    for (double dt : dt_list) {
      RunManifest m = base;
      m.eps = eps;
      m.dt = dt;
      m.probe = probe;
      m.snapshot_times.clear();
      m.validate();
      cells.push_back(m);
    }
  }

  auto parallel_for = [&](std::size_t n, const std::function<void(std::size_t)>& body) {
    const unsigned workers = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(n)));
    if (workers == 1) {
      for (std::size_t i = 0; i < n; ++i) body(i);
      return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i; (i = next++) < n;) body(i);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  };

  // One reference pass per eps over the union of all macro grids.
  parallel_for(eps_list.size(), [&](std::size_t i) {
    std::vector<double> all;
    for (double dt : dt_list) {
      const auto t = macro_times(base.t_final, dt);
      all.insert(all.end(), t.begin(), t.end());
    }
    cache.prefetch(cells[i * dt_list.size()], sorted_unique(all));
  });

  std::vector<ErrorRow> rows(cells.size());
  parallel_for(cells.size(), [&](std::size_t i) {
    rows[i] = error_row(cells[i], run_case(cells[i], &cache));
  });
  return rows;
}

}  // namespace etdpic
