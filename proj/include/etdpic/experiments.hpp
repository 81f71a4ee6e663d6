#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "etdpic/core.hpp"
#include "etdpic/etd.hpp"
#include "etdpic/fields.hpp"
#include "etdpic/integrators.hpp"

namespace etdpic {

inline constexpr const char* kCodeVersion = "etdpic 0.1.0";

enum class Sampling { PseudoRandom, QuietStart };

/// Semi-Gaussian beam: r uniform on [-half_width, half_width], v normal with
/// standard deviation v_th, equal weights 1 / n_particles.
struct BeamSpec {
  std::size_t n_particles = 10000;
  double v_th = 0.0727518214392;
  double half_width = 0.75;
  std::uint64_t seed = 1;
  Sampling sampling = Sampling::PseudoRandom;
};

Ensemble sample_beam(const BeamSpec& spec);

/// Probe initial conditions near (onsm) and away from (offsm) the slow manifold.
namespace probes {
inline constexpr PhaseState onsm{0.306825, 7e-6};
inline constexpr PhaseState offsm{0.748725, 0.142892};
}  // namespace probes

enum class Case { Linear, Cubic, VlasovPoisson };
enum class Scheme { Rk4Ref, Rk4, Verlet, Etdrk2, EtdPic, EtdPicModified };
enum class Probe { Onsm, Offsm, None };

std::string to_string(Case c);
std::string to_string(Scheme s);
std::string to_string(Probe p);
std::string to_string(PeriodKind k);
std::string to_string(Sampling s);
Case parse_case(const std::string& s);
Scheme parse_scheme(const std::string& s);
Probe parse_probe(const std::string& s);
PeriodKind parse_period_kind(const std::string& s);
Sampling parse_sampling(const std::string& s);

PhaseState probe_state(Probe p);

struct GridSpec {
  double r_min = -1.5;
  double r_max = 1.5;
  std::size_t n_cells = 128;
};

/// Everything needed to re-execute a run.
struct RunManifest {
  Case field_case = Case::Cubic;
  Scheme scheme = Scheme::EtdPic;
  double eps = 1e-3;
  double dt = 0.7;
  double t_final = 3.5;
  PeriodKind period_policy = PeriodKind::Nominal;
  double fine_exponent = 1.5;
  Probe probe = Probe::Onsm;
  BeamSpec beam{};
  GridSpec grid{};
  std::vector<double> snapshot_times{};

  /// Throws std::invalid_argument on an inconsistent manifest.
  void validate() const;
};

/// key=value text; `extra` lines (run outputs) are appended verbatim.
std::string format_manifest(const RunManifest& m,
                            const std::vector<std::pair<std::string, std::string>>& extra = {});
RunManifest parse_manifest(const std::string& text);

FieldModel make_field(Case c, const GridSpec& grid);

struct Trajectory {
  std::vector<double> times;
  std::vector<PhaseState> states;
};

/// Max over the shared sample times of the Euclidean phase-space distance.
/// Throws std::invalid_argument if the time grids differ.
double global_error(const Trajectory& a, const Trajectory& b);

/// 0, dt, 2 dt, ..., t_final; the last interval is shortened when t_final is
/// not a multiple of dt.
std::vector<double> macro_times(double t_final, double dt);

/// Fine RK4 reference trajectories of both probes, cached per configuration.
/// A sample at time t equals rk4_integrate from 0 to t bitwise, independently
/// of which other times were requested.
class ReferenceCache {
 public:
  struct Samples {
    std::map<double, PhaseState> onsm;
    std::map<double, PhaseState> offsm;
  };

  /// Reference for the probe at the given times; computes missing samples.
  Trajectory get(const RunManifest& m, Probe probe, const std::vector<double>& times);

  /// Computes (and caches) every requested time in one integration pass.
  void prefetch(const RunManifest& m, const std::vector<double>& times);

  std::size_t computations() const { return computations_; }

 private:
  std::string key(const RunManifest& m) const;
  std::mutex mutex_;
  std::map<std::string, Samples> entries_;
  std::size_t computations_ = 0;
};

/// Reference samples computed from scratch (no cache). For the linear case
/// the closed-form solution is used instead of RK4.
ReferenceCache::Samples compute_reference(const RunManifest& m, const std::vector<double>& times);

Ensemble initial_ensemble(const RunManifest& m);

struct RunResult {
  std::string status = "ok";
  std::string message;
  PeriodChoice period{};
  std::vector<DtDecomposition> decompositions;
  Trajectory trajectory;  ///< probe trajectory at macro times (empty when probe = none)
  std::optional<Trajectory> reference;
  std::optional<double> global_error;
  Ensemble final_ensemble;  ///< beam only, tracers removed
  std::vector<std::pair<double, Ensemble>> snapshots;
  std::size_t macro_steps = 0;
  double wall_time_s = 0.0;
};

/// Runs the scheme and, when a probe is selected and `with_error` is set,
/// the reference and the global error. Numerical failures are reported via
/// status = "diverged" with partial outputs.
RunResult run_case(const RunManifest& m, ReferenceCache* cache = nullptr, bool with_error = true);

struct ErrorRow {
  Case field_case;
  Scheme scheme;
  Probe probe;
  double eps;
  double dt;
  std::int64_t periods;
  double remainder;
  double period;
  double global_error;
  double wall_time_s;
  std::string status;
};

ErrorRow error_row(const RunManifest& m, const RunResult& r);

/// One row per (eps, dt), eps-major. References are cached per eps. With
/// jobs > 1 cells run concurrently; rows keep their order.
std::vector<ErrorRow> sweep_errors(const RunManifest& base, const std::vector<double>& eps_list,
                                   const std::vector<double>& dt_list, Probe probe,
                                   ReferenceCache& cache, unsigned jobs = 1);

// CSV persistence (csv.cpp).
std::string format_real(double x);
void write_error_csv(const std::string& path, const std::vector<ErrorRow>& rows);
void write_trajectory_csv(const std::string& path, const Trajectory& t,
                          const std::string& error_marker = "");
void write_snapshot_csv(const std::string& path, const Ensemble& e);
void write_grid_csv(const std::string& path, const SpatialGrid& g);
void write_text(const std::string& path, const std::string& text);

/// Writes manifest.txt, trajectory, snapshot(s) and (when available) the
/// single-row error CSV into dir.
void write_run_outputs(const std::string& dir, const RunManifest& m, const RunResult& r);

}  // namespace etdpic
