// Command-line driver: run, sweep, estimate-period, dump-grid.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "etdpic/experiments.hpp"

using namespace etdpic;

namespace {

struct Options {
  std::string field_case = "cubic";
  std::string scheme = "etd-pic";
  double eps = 1e-3;
  double dt = 0.7;
  std::vector<double> eps_list{1e-2, 1e-3, 1e-4, 1e-5};
  std::vector<double> dt_list{0.035, 0.07, 0.175, 0.35, 0.5, 0.7, 0.875};
  double t_final = 3.5;
  std::size_t particles = 10000;
  std::size_t cells = 128;
  std::string domain = "-1.5,1.5";
  std::uint64_t seed = 1;
  std::string period_policy;
  double fine_exponent = 1.5;
  std::string probe = "onsm";
  std::string sampling = "pseudo-random";
  std::vector<double> snapshot_times;
  std::string out;
  std::string manifest;
  unsigned jobs = 1;
};

class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void add_common(CLI::App* cmd, Options& o, bool lists) {
  cmd->add_option("--case", o.field_case, "Force field: linear | cubic | vlasov-poisson")
      ->capture_default_str();
  cmd->add_option("--scheme", o.scheme,
                  "Pusher: rk4-ref | rk4 | verlet | etdrk2 | etd-pic | etd-pic-modified")
      ->capture_default_str();
  if (lists) {
    cmd->add_option("--eps", o.eps_list, "Comma-separated stiffness values")
        ->delimiter(',')
        ->capture_default_str();
    cmd->add_option("--dt", o.dt_list, "Comma-separated macro steps")
        ->delimiter(',')
        ->capture_default_str();
  } else {
    cmd->add_option("--eps", o.eps, "Stiffness parameter in (0, 1]")->capture_default_str();
    cmd->add_option("--dt", o.dt, "Macro time step (step size for verlet/etdrk2)")
        ->capture_default_str();
  }
  cmd->add_option("--t-final", o.t_final, "Final time")->capture_default_str();
  cmd->add_option("--particles", o.particles, "Beam macroparticles (0: probe only)")
      ->capture_default_str();
  cmd->add_option("--cells", o.cells, "Grid cells")->capture_default_str();
  cmd->add_option("--domain", o.domain, "Grid domain \"rmin,rmax\"")->capture_default_str();
  cmd->add_option("--seed", o.seed, "Beam sampling seed")->capture_default_str();
  cmd->add_option("--sampling", o.sampling, "Beam sampling: pseudo-random | quiet-start")
      ->capture_default_str();
  cmd->add_option("--period-policy", o.period_policy,
                  "nominal | exact-linear | estimated-mean (default: nominal, "
                  "estimated-mean for etd-pic-modified)");
  cmd->add_option("--fine-exponent", o.fine_exponent,
                  "Fine RK4 step eps^p, p in {1.25, 1.5, 1.75, 2}")
      ->capture_default_str();
  cmd->add_option("--probe", o.probe, "Tracer probe: onsm | offsm | none")->capture_default_str();
  cmd->add_option("--out", o.out, "Output directory (default: $ETDPIC_OUT or ./out)");
}

std::pair<double, double> parse_domain(const std::string& s) {
  const auto comma = s.find(',');
  if (comma == std::string::npos) throw ValidationError("--domain expects \"rmin,rmax\"");
  try {
    std::size_t a = 0, b = 0;
    const std::string lo = s.substr(0, comma), hi = s.substr(comma + 1);
    const double rmin = std::stod(lo, &a), rmax = std::stod(hi, &b);
    if (a != lo.size() || b != hi.size()) throw std::invalid_argument("trailing");
    return {rmin, rmax};
  } catch (const std::exception&) {
    throw ValidationError("--domain expects \"rmin,rmax\"");
  }
}

RunManifest to_manifest(const Options& o) {
  try {
    RunManifest m;
    m.field_case = parse_case(o.field_case);
    m.scheme = parse_scheme(o.scheme);
    m.eps = o.eps;
    m.dt = o.dt;
    m.t_final = o.t_final;
    if (o.period_policy.empty()) {
      m.period_policy = m.scheme == Scheme::EtdPicModified ? PeriodKind::EstimatedMean
                                                           : PeriodKind::Nominal;
    } else {
      m.period_policy = parse_period_kind(o.period_policy);
    }
    m.fine_exponent = o.fine_exponent;
    m.probe = parse_probe(o.probe);
    m.beam.n_particles = o.particles;
    m.beam.seed = o.seed;
    m.beam.sampling = parse_sampling(o.sampling);
    const auto [rmin, rmax] = parse_domain(o.domain);
    m.grid = {rmin, rmax, o.cells};
    m.snapshot_times = o.snapshot_times;
    return m;
  } catch (const std::invalid_argument& e) {
    throw ValidationError(e.what());
  }
}

void validate(const RunManifest& m) {
  try {
    m.validate();
  } catch (const std::invalid_argument& e) {
    throw ValidationError(e.what());
  }
}

std::string output_dir(const Options& o) {
  if (!o.out.empty()) return o.out;
  if (const char* env = std::getenv("ETDPIC_OUT"); env && *env) return env;
  return "out";
}

int cmd_run(const Options& o) {
  RunManifest m;
  if (!o.manifest.empty()) {
    std::ifstream in(o.manifest);
    if (!in) throw ValidationError("cannot read manifest " + o.manifest);
    std::stringstream text;
    text << in.rdbuf();
    try {
      m = parse_manifest(text.str());
    } catch (const std::invalid_argument& e) {
      throw ValidationError(e.what());
    }
  } else {
    m = to_manifest(o);
  }
  validate(m);
  const RunResult r = run_case(m);
  const std::string dir = output_dir(o);
  write_run_outputs(dir, m, r);

  std::cout << "case,scheme,probe,eps,dt,N,Delta,period,global_error,wall_time_s,status\n";
  const ErrorRow row = error_row(m, r);
  std::cout << to_string(row.field_case) << ',' << to_string(row.scheme) << ','
            << to_string(row.probe) << ',' << format_real(row.eps) << ',' << format_real(row.dt)
            << ',' << row.periods << ',' << format_real(row.remainder) << ','
            << format_real(row.period) << ',' << format_real(row.global_error) << ','
            << format_real(row.wall_time_s) << ',' << row.status << '\n';
  std::cout << "macro_steps=" << r.macro_steps << " outputs=" << dir << '\n';
  if (r.status != "ok") {
    std::cerr << "numerical failure: " << r.message << '\n';
    return 2;
  }
  return 0;
}

int cmd_sweep(const Options& o) {
  RunManifest base = to_manifest(o);
  base.eps = o.eps_list.front();
  base.dt = o.dt_list.front();
  if (base.probe == Probe::None) throw ValidationError("sweep needs --probe onsm or offsm");
  for (double e : o.eps_list) {
    for (double d : o.dt_list) {
      RunManifest m = base;
      m.eps = e;
      m.dt = d;
      validate(m);
    }
  }
  ReferenceCache cache;
  const auto rows = sweep_errors(base, o.eps_list, o.dt_list, base.probe, cache, o.jobs);
  const std::string dir = output_dir(o);
  std::filesystem::create_directories(dir);
  const std::string name = "errors_" + to_string(base.field_case) + "_" + to_string(base.scheme) +
                           "_" + to_string(base.probe) + ".csv";
  const std::string path = (std::filesystem::path(dir) / name).string();
  write_error_csv(path, rows);
  write_text((std::filesystem::path(dir) / "sweep_manifest.txt").string(), format_manifest(base));

  std::ifstream back(path);
  std::cout << back.rdbuf();
  for (const auto& row : rows) {
    if (row.status != "ok") return 2;
  }
  return 0;
}

int cmd_estimate_period(const Options& o) {
  RunManifest m = to_manifest(o);
  validate(m);
  const Ensemble e = initial_ensemble(m);
  const FieldModel field = make_field(m.field_case, m.grid);
  const PeriodEstimate est =
      estimate_periods(e, field, Stiffness(m.eps), FineStepPolicy::exponent(m.fine_exponent));
  const double nominal = nominal_period(m.eps);
  const double eps2 = m.eps * m.eps;
  std::cout << "nominal_period=" << format_real(nominal) << '\n';
  std::cout << "mean_period=" << format_real(est.mean) << '\n';
  std::cout << "mean_offset_over_eps2=" << format_real((est.mean - nominal) / eps2) << '\n';
  if (m.probe != Probe::None) {
    const double p = est.periods[m.beam.n_particles].value();
    std::cout << "period=" << format_real(p) << '\n';
    std::cout << "probe_offset_over_eps2=" << format_real((p - nominal) / eps2) << '\n';
  }
  std::cout << "excluded=" << est.excluded << '\n';
  return 0;
}

int cmd_dump_grid(const Options& o) {
  RunManifest m = to_manifest(o);
  m.field_case = Case::VlasovPoisson;
  validate(m);
  const Ensemble e = sample_beam(m.beam);
  FieldModel field = make_field(m.field_case, m.grid);
  refresh_field(field, e);
  const auto& sc = std::get<SelfConsistentField>(field);
  const std::string dir = output_dir(o);
  std::filesystem::create_directories(dir);
  const std::string path = (std::filesystem::path(dir) / "grid_t0.csv").string();
  write_grid_csv(path, sc.grid);
  std::cout << "grid=" << path << " deposits_outside=" << sc.diagnostics.deposits_outside << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Large-step exponential particle pusher for a highly oscillatory 1D Vlasov-Poisson "
               "system"};
  app.require_subcommand(1);
  Options o;

  auto* run = app.add_subcommand("run", "Run one scheme and report the probe error");
  add_common(run, o, false);
  run->add_option("--snapshot-times", o.snapshot_times, "Comma-separated snapshot times")
      ->delimiter(',');
  run->add_option("--manifest", o.manifest, "Re-execute a manifest.txt (other flags ignored)");

  auto* sweep = app.add_subcommand("sweep", "Error table over eps x dt");
  add_common(sweep, o, true);
  sweep->add_option("--jobs", o.jobs, "Parallel sweep cells")->capture_default_str();

  auto* period = app.add_subcommand("estimate-period", "Measure fast periods at t = 0");
  add_common(period, o, false);

  auto* grid = app.add_subcommand("dump-grid", "Write the initial density and field on the grid");
  add_common(grid, o, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*run) return cmd_run(o);
    if (*sweep) return cmd_sweep(o);
    if (*period) return cmd_estimate_period(o);
    if (*grid) return cmd_dump_grid(o);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
