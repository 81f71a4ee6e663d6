#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "etdpic/experiments.hpp"

namespace etdpic {

std::string format_real(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  return out;
}

}  // namespace

void write_text(const std::string& path, const std::string& text) {
  auto out = open_out(path);
  out << text;
}

void write_error_csv(const std::string& path, const std::vector<ErrorRow>& rows) {
  auto out = open_out(path);
  out << "case,scheme,probe,eps,dt,N,Delta,period,global_error,wall_time_s,status\n";
  for (const auto& r : rows) {
    out << to_string(r.field_case) << ',' << to_string(r.scheme) << ',' << to_string(r.probe) << ','
        << format_real(r.eps) << ',' << format_real(r.dt) << ',' << r.periods << ','
        << format_real(r.remainder) << ',' << format_real(r.period) << ','
        << format_real(r.global_error) << ',' << format_real(r.wall_time_s) << ',' << r.status
        << '\n';
  }
}

void write_trajectory_csv(const std::string& path, const Trajectory& t,
                          const std::string& error_marker) {
  auto out = open_out(path);
  out << "t,r,v\n";
  for (std::size_t i = 0; i < t.times.size(); ++i) {
    out << format_real(t.times[i]) << ',' << format_real(t.states[i].r) << ','
        << format_real(t.states[i].v) << '\n';
  }
  if (!error_marker.empty()) out << "# error: " << error_marker << '\n';
}

void write_snapshot_csv(const std::string& path, const Ensemble& e) {
  auto out = open_out(path);
  out << "r,v,weight\n";
  for (std::size_t k = 0; k < e.size(); ++k) {
    out << format_real(e.state(k).r) << ',' << format_real(e.state(k).v) << ','
        << format_real(e.weight(k)) << '\n';
  }
}

void write_grid_csv(const std::string& path, const SpatialGrid& g) {
  auto out = open_out(path);
  out << "r,rho,E\n";
  for (std::size_t j = 0; j < g.n_nodes(); ++j) {
    out << format_real(g.node(j)) << ',' << format_real(g.density()[j]) << ','
        << format_real(g.field()[j]) << '\n';
  }
}

void write_run_outputs(const std::string& dir, const RunManifest& m, const RunResult& r) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path base(dir);

  std::vector<std::pair<std::string, std::string>> extra{
      {"status", r.status},
      {"macro_steps", std::to_string(r.macro_steps)},
  };
  if (!r.message.empty()) extra.emplace_back("message", r.message);
  if (m.scheme == Scheme::EtdPic || m.scheme == Scheme::EtdPicModified) {
    extra.emplace_back("period_used", format_real(r.period.value));
    for (std::size_t i = 0; i < r.decompositions.size(); ++i) {
      extra.emplace_back("step." + std::to_string(i),
                         std::to_string(r.decompositions[i].periods) + "," +
                             format_real(r.decompositions[i].remainder));
    }
  }
  if (r.global_error) {
    extra.emplace_back("reference", m.field_case == Case::Linear ? "linear-exact" : "rk4-fine");
    extra.emplace_back("global_error", format_real(*r.global_error));
  }
  write_text((base / "manifest.txt").string(), format_manifest(m, extra));

  if (m.probe != Probe::None) {
    write_trajectory_csv((base / ("trajectory_" + to_string(m.probe) + ".csv")).string(),
                         r.trajectory, r.status == "ok" ? "" : r.status + ": " + r.message);
    if (r.reference) {
      write_trajectory_csv((base / ("reference_" + to_string(m.probe) + ".csv")).string(),
                           *r.reference);
    }
  }
  if (!r.final_ensemble.empty() && r.status == "ok") {
    write_snapshot_csv((base / "snapshot_final.csv").string(), r.final_ensemble);
  }
  for (const auto& [t, e] : r.snapshots) {
    write_snapshot_csv((base / ("snapshot_t" + format_real(t) + ".csv")).string(), e);
  }
  if (r.global_error) {
    write_error_csv((base / "errors.csv").string(), {error_row(m, r)});
  }
}

}  // namespace etdpic
