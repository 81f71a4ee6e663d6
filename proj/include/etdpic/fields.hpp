#pragma once

#include <cstddef>
#include <span>
#include <variant>
#include <vector>

#include "etdpic/core.hpp"

namespace etdpic {

/// Uniform 1D grid over [r_min, r_max] with n_cells + 1 nodes. It carries the
/// deposited density and the field solved from it on the same nodes.
class SpatialGrid {
 public:
  SpatialGrid(double r_min, double r_max, std::size_t n_cells);

  double r_min() const { return r_min_; }
  double r_max() const { return r_max_; }
  std::size_t n_cells() const { return n_cells_; }
  std::size_t n_nodes() const { return n_cells_ + 1; }
  double cell_width() const { return h_; }
  double node(std::size_t j) const { return r_min_ + static_cast<double>(j) * h_; }
  bool contains(double r) const { return r >= r_min_ && r <= r_max_; }

  std::span<double> density() { return density_; }
  std::span<const double> density() const { return density_; }
  std::span<double> field() { return field_; }
  std::span<const double> field() const { return field_; }

 private:
  double r_min_;
  double r_max_;
  std::size_t n_cells_;
  double h_;
  std::vector<double> density_;
  std::vector<double> field_;
};

struct FieldDiagnostics {
  std::size_t deposits_outside = 0;
  std::size_t gathers_outside = 0;
};

/// E(t, r) = -r
struct LinearField {};
/// E(t, r) = -r^3
struct CubicField {};
/// Field solved on a grid from the current ensemble.
struct SelfConsistentField {
  SpatialGrid grid;
  FieldDiagnostics diagnostics{};
};

using FieldModel = std::variant<LinearField, CubicField, SelfConsistentField>;

inline bool is_self_consistent(const FieldModel& m) {
  return std::holds_alternative<SelfConsistentField>(m);
}

/// Cloud-in-cell deposition. Overwrites grid.density() with weight per unit
/// length; particles outside the grid deposit nothing.
void deposit(const Ensemble& ensemble, SpatialGrid& grid, FieldDiagnostics* diag = nullptr);

/// Solves (1/r) d(rE)/dr = rho by integrating s*rho(s) from the origin with
/// the trapezoidal rule. Overwrites grid.field().
void solve_poisson(SpatialGrid& grid);

/// Linear interpolation of the grid field; 0 outside the domain.
double interpolate(const SpatialGrid& grid, double r, FieldDiagnostics* diag = nullptr);

/// Deposit and solve for a self-consistent model; no-op for analytic fields.
void refresh_field(FieldModel& model, const Ensemble& ensemble);

double eval_field(FieldModel& model, double t, double r);

}  // namespace etdpic
