#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "etdpic/experiments.hpp"
#include "support.hpp"

using namespace etdpic;

namespace {

RunManifest cubic_manifest(Scheme s, double eps, double dt, Probe p = Probe::Onsm) {
  RunManifest m;
  m.field_case = Case::Cubic;
  m.scheme = s;
  m.eps = eps;
  m.dt = dt;
  m.t_final = 3.5;
  m.probe = p;
  m.beam.n_particles = 0;
  if (s == Scheme::EtdPicModified) m.period_policy = PeriodKind::EstimatedMean;
  return m;
}

RunManifest small_vp(Scheme s) {
  RunManifest m;
  m.field_case = Case::VlasovPoisson;
  m.scheme = s;
  m.eps = 1e-2;
  m.dt = 0.35;
  m.t_final = 0.7;
  m.beam.n_particles = 300;
  m.grid.n_cells = 32;
  m.snapshot_times = {0.3, 0.7};
  if (s == Scheme::EtdPicModified) m.period_policy = PeriodKind::EstimatedMean;
  return m;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

// Drops the wall_time_s column (second to last) of an error CSV.
std::string without_timing(const std::string& csv) {
  std::istringstream in(csv);
  std::string line, out;
  while (std::getline(in, line)) {
    const auto last = line.rfind(',');
    const auto before = line.rfind(',', last - 1);
    out += line.substr(0, before) + line.substr(last) + '\n';
  }
  return out;
}

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("etdpic_test_" + name);
  std::filesystem::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("sample_beam statistics") {
  for (Sampling s : {Sampling::PseudoRandom, Sampling::QuietStart}) {
    BeamSpec spec;
    spec.sampling = s;
    const Ensemble e = sample_beam(spec);
    REQUIRE(e.size() == 10000);
    double mean = 0.0, sq = 0.0, rmin = 1.0, rmax = -1.0;
    for (std::size_t k = 0; k < e.size(); ++k) {
      mean += e.state(k).v;
      sq += e.state(k).v * e.state(k).v;
      rmin = std::min(rmin, e.state(k).r);
      rmax = std::max(rmax, e.state(k).r);
      CHECK(e.weight(k) == 1.0 / 10000);
    }
    mean /= 1e4;
    const double sd = std::sqrt(sq / 1e4 - mean * mean);
    CHECK(std::abs(mean) <= 3 * spec.v_th / 100);
    CHECK(std::abs(sd - spec.v_th) <= 0.02 * spec.v_th);
    CHECK(rmin >= -0.75);
    CHECK(rmax <= 0.75);
    CHECK(e.total_weight() == doctest::Approx(1.0).epsilon(1e-12));
  }
  BeamSpec a, b;
  b.seed = 2;
  CHECK(sample_beam(a).state(5) == sample_beam(a).state(5));
  CHECK_FALSE(sample_beam(a).state(5) == sample_beam(b).state(5));
  BeamSpec none;
  none.n_particles = 0;
  CHECK(sample_beam(none).empty());
}

TEST_CASE("global_error semantics") {
  Trajectory a{{0, 1, 2}, {{0, 0}, {1, 1}, {2, 2}}};
  CHECK(global_error(a, a) == 0.0);
  Trajectory b = a;
  for (auto& s : b.states) s.r += 0.25;
  CHECK(global_error(a, b) == doctest::Approx(0.25));
  Trajectory c = a;
  c.states[1] = {1 + 3.0, 1 + 4.0};
  CHECK(global_error(a, c) == doctest::Approx(5.0));
  Trajectory d = a;
  d.states[2].v = std::numeric_limits<double>::quiet_NaN();
  CHECK(std::isinf(global_error(a, d)));
  Trajectory e{{0, 1, 3}, a.states};
  CHECK_THROWS_AS(global_error(a, e), std::invalid_argument);
}

TEST_CASE("macro_times") {
  const auto t = macro_times(3.5, 0.875);
  REQUIRE(t.size() == 5);
  CHECK(t.back() == 3.5);
  const auto u = macro_times(3.5, 0.7);
  CHECK(u.size() == 6);
  CHECK(u.back() == 3.5);
  const auto v = macro_times(1.0, 0.3);
  REQUIRE(v.size() == 5);
  CHECK(v[3] == doctest::Approx(0.9));
  CHECK(v.back() == 1.0);
}

TEST_CASE("manifest round trip and validation") {
  RunManifest m = small_vp(Scheme::EtdPicModified);
  m.beam.seed = 77;
  m.beam.sampling = Sampling::QuietStart;
  m.fine_exponent = 1.75;
  m.grid = {-2.0, 1.75, 100};
  const RunManifest back = parse_manifest(format_manifest(m, {{"status", "ok"}}));
  CHECK(format_manifest(back) == format_manifest(m));
  CHECK(format_manifest(m).find("probe_offsm=" + format_real(0.748725) + "," + format_real(0.142892)) !=
        std::string::npos);

  RunManifest bad = cubic_manifest(Scheme::EtdPicModified, 1e-3, 0.7);
  bad.period_policy = PeriodKind::Nominal;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = small_vp(Scheme::EtdPic);
  bad.grid = {-0.5, 0.5, 16};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cubic_manifest(Scheme::EtdPic, 1e-3, 0.7, Probe::None);
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cubic_manifest(Scheme::EtdPic, 0.0, 0.7);
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cubic_manifest(Scheme::EtdPic, 1e-3, 0.7);
  bad.snapshot_times = {4.0};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  CHECK_THROWS_AS(parse_manifest("case=quadratic\n"), std::invalid_argument);
}

TEST_CASE("names round trip") {
  for (Scheme s : {Scheme::Rk4Ref, Scheme::Rk4, Scheme::Verlet, Scheme::Etdrk2, Scheme::EtdPic,
                   Scheme::EtdPicModified}) {
    CHECK(parse_scheme(to_string(s)) == s);
  }
  for (Case c : {Case::Linear, Case::Cubic, Case::VlasovPoisson}) CHECK(parse_case(to_string(c)) == c);
  CHECK(parse_probe("offsm") == Probe::Offsm);
  CHECK(parse_period_kind("exact-linear") == PeriodKind::ExactLinear);
  CHECK_THROWS_AS(parse_scheme("rk5"), std::invalid_argument);
}

TEST_CASE("run_case: four macro steps at dt = 0.875") {
  RunManifest m = small_vp(Scheme::EtdPic);
  m.dt = 0.875;
  m.t_final = 3.5;
  m.snapshot_times.clear();
  m.probe = Probe::None;
  const RunResult r = run_case(m);
  CHECK(r.status == "ok");
  CHECK(r.macro_steps == 4);
  CHECK(r.decompositions.size() == 4);
  CHECK(r.final_ensemble.size() == 300);
  for (std::size_t k = 0; k < 300; ++k) CHECK(is_finite(r.final_ensemble.state(k)));
}

TEST_CASE("run_case: rk4-ref has zero error against its own reference") {
  for (Case c : {Case::Linear, Case::Cubic, Case::VlasovPoisson}) {
    RunManifest m = small_vp(Scheme::Rk4Ref);
    m.field_case = c;
    const RunResult r = run_case(m);
    REQUIRE(r.global_error);
    if (c == Case::Linear) {
      CHECK(*r.global_error < 2e-4);
    } else {
      CHECK(*r.global_error == 0.0);
    }
  }
}

TEST_CASE("rk4-ref error shrinks with the fine step") {
  // Fine solutions at step eps^p compared against a still finer one.
  RunManifest m = cubic_manifest(Scheme::Rk4Ref, 1e-2, 0.35, Probe::Offsm);
  m.fine_exponent = 2.0;
  const RunResult finest = run_case(m, nullptr, false);
  double previous = std::numeric_limits<double>::infinity();
  for (double p : {1.25, 1.5, 1.75}) {
    m.fine_exponent = p;
    const RunResult r = run_case(m, nullptr, false);
    const double err = global_error(r.trajectory, finest.trajectory);
    CHECK(err < previous);
    previous = err;
  }
}

TEST_CASE("snapshots are taken at the first macro time at or after the request") {
  const RunResult r = run_case(small_vp(Scheme::Etdrk2));
  REQUIRE(r.snapshots.size() == 2);
  CHECK(r.snapshots[0].first == doctest::Approx(0.35));
  CHECK(r.snapshots[1].first == doctest::Approx(0.7));
  CHECK(r.snapshots[1].second.size() == 300);
  for (std::size_t k = 0; k < 300; ++k) CHECK(r.snapshots[1].second.state(k) == r.final_ensemble.state(k));
}

TEST_CASE("divergence is reported, not thrown") {
  RunManifest m = cubic_manifest(Scheme::Verlet, 1e-2, 0.03);
  m.t_final = 3.14;
  const RunResult r = run_case(m);
  CHECK(r.status == "diverged");
  REQUIRE(r.global_error);
  CHECK(std::isinf(*r.global_error));
  CHECK(r.message.find("non-finite") != std::string::npos);
}

TEST_CASE("runs are deterministic") {
  for (Scheme s : {Scheme::Rk4Ref, Scheme::Verlet, Scheme::Etdrk2, Scheme::EtdPic, Scheme::EtdPicModified}) {
    const RunManifest m = small_vp(s);
    const RunResult a = run_case(m), b = run_case(m);
    CHECK(a.trajectory.states == b.trajectory.states);
    REQUIRE(a.final_ensemble.size() == b.final_ensemble.size());
    for (std::size_t k = 0; k < a.final_ensemble.size(); ++k) {
      CHECK(a.final_ensemble.state(k) == b.final_ensemble.state(k));
    }
    CHECK(a.global_error == b.global_error);

    const auto da = scratch("det_a"), db = scratch("det_b");
    write_run_outputs(da.string(), m, a);
    write_run_outputs(db.string(), m, b);
    for (const auto& f : std::filesystem::directory_iterator(da)) {
      const auto name = f.path().filename();
      REQUIRE(std::filesystem::exists(db / name));
      if (name == "errors.csv") {
        CHECK(without_timing(slurp(f.path())) == without_timing(slurp(db / name)));
      } else {
        CHECK(slurp(f.path()) == slurp(db / name));
      }
    }
    std::filesystem::remove_all(da);
    std::filesystem::remove_all(db);
  }
}

TEST_CASE("cached references equal fresh ones") {
  for (Case c : {Case::Cubic, Case::VlasovPoisson}) {
    RunManifest m = small_vp(Scheme::Rk4Ref);
    m.field_case = c;
    ReferenceCache cache;
    // Warm the cache with a different grid first.
    cache.prefetch(m, macro_times(0.7, 0.175));
    for (double dt : {0.35, 0.7, 0.1}) {
      const auto times = macro_times(0.7, dt);
      const auto fresh = compute_reference(m, times);
      for (Probe p : {Probe::Onsm, Probe::Offsm}) {
        const Trajectory cached = cache.get(m, p, times);
        const auto& want = p == Probe::Onsm ? fresh.onsm : fresh.offsm;
        for (std::size_t i = 0; i < times.size(); ++i) CHECK(cached.states[i] == want.at(times[i]));
      }
    }
    // 0.35 and 0.7 grids are subsets of the warm-up grid; 0.1 is not.
    CHECK(cache.computations() == 2);
  }
}

TEST_CASE("reference sample equals a direct fine solve") {
  RunManifest m = cubic_manifest(Scheme::Rk4Ref, 1e-2, 0.35);
  const auto samples = compute_reference(m, {0.0, 0.35, 1.0});
  Ensemble e = testing::single(probes::offsm, 0.0);
  FieldModel f = CubicField{};
  rk4_integrate(e, f, Stiffness(1e-2), 0.0, 1.0, FineStepPolicy{});
  CHECK(samples.offsm.at(1.0) == e.state(0));
  CHECK(samples.onsm.at(0.0) == probes::onsm);
}

TEST_CASE("sweep rows match single runs") {
  RunManifest base = cubic_manifest(Scheme::EtdPic, 1e-2, 0.35);
  ReferenceCache cache;
  const std::vector<double> eps{1e-2, 1e-3}, dts{0.35, 0.7};
  const auto rows = sweep_errors(base, eps, dts, Probe::Offsm, cache, 1);
  const auto rows_par = sweep_errors(base, eps, dts, Probe::Offsm, cache, 3);
  REQUIRE(rows.size() == 4);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    RunManifest m = base;
    m.eps = eps[i / 2];
    m.dt = dts[i % 2];
    m.probe = Probe::Offsm;
    const ErrorRow single = error_row(m, run_case(m));
    CHECK(rows[i].eps == m.eps);
    CHECK(rows[i].dt == m.dt);
    CHECK(rows[i].global_error == single.global_error);
    CHECK(rows_par[i].global_error == single.global_error);
    CHECK(rows[i].periods == single.periods);
    CHECK(rows[i].status == "ok");
  }
  CHECK(rows[1].periods == 11);
}

TEST_CASE("CSV writers") {
  const auto dir = scratch("csv");
  const RunManifest m = small_vp(Scheme::EtdPic);
  write_run_outputs(dir.string(), m, run_case(m));
  const std::string errors = slurp(dir / "errors.csv");
  CHECK(errors.rfind("case,scheme,probe,eps,dt,N,Delta,period,global_error,wall_time_s,status\n", 0) == 0);
  CHECK(slurp(dir / "trajectory_onsm.csv").rfind("t,r,v\n", 0) == 0);
  CHECK(slurp(dir / "reference_onsm.csv").rfind("t,r,v\n", 0) == 0);
  CHECK(slurp(dir / "snapshot_final.csv").rfind("r,v,weight\n", 0) == 0);
  CHECK(std::filesystem::exists(dir / "snapshot_t0.34999999999999998.csv"));
  const std::string manifest = slurp(dir / "manifest.txt");
  CHECK(manifest.find("step.0=5,") != std::string::npos);
  CHECK(manifest.find("period_used=") != std::string::npos);
  CHECK(format_real(0.1) == "0.10000000000000001");
  CHECK(format_real(std::numeric_limits<double>::infinity()) == "inf");
  std::filesystem::remove_all(dir);
}
