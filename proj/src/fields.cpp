#include "etdpic/fields.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace etdpic {

SpatialGrid::SpatialGrid(double r_min, double r_max, std::size_t n_cells)
    : r_min_(r_min), r_max_(r_max), n_cells_(n_cells) {
  if (!(std::isfinite(r_min) && std::isfinite(r_max) && r_min < r_max)) {
    throw std::invalid_argument("grid domain must satisfy r_min < r_max");
  }
  if (n_cells == 0) throw std::invalid_argument("grid needs at least one cell");
  h_ = (r_max - r_min) / static_cast<double>(n_cells);
  density_.assign(n_cells + 1, 0.0);
  field_.assign(n_cells + 1, 0.0);
}

namespace {

// Cell index j and offset alpha in [0, 1] such that r = node(j) + alpha*h.
struct CellLocation {
  std::size_t j;
  double alpha;
};

CellLocation locate(const SpatialGrid& grid, double r) {
  const double x = (r - grid.r_min()) / grid.cell_width();
  auto j = static_cast<std::size_t>(std::floor(x));
  j = std::min(j, grid.n_cells() - 1);
  return {j, x - static_cast<double>(j)};
}

}  // namespace

void deposit(const Ensemble& ensemble, SpatialGrid& grid, FieldDiagnostics* diag) {
  auto rho = grid.density();
  std::fill(rho.begin(), rho.end(), 0.0);
  const double inv_h = 1.0 / grid.cell_width();
  const auto states = ensemble.states();
  const auto weights = ensemble.weights();
  for (std::size_t k = 0; k < states.size(); ++k) {
    const double r = states[k].r;
    if (!grid.contains(r)) {
      if (diag) ++diag->deposits_outside;
      continue;
    }
    const auto [j, alpha] = locate(grid, r);
    const double w = weights[k] * inv_h;
    rho[j] += w * (1.0 - alpha);
    rho[j + 1] += w * alpha;
  }
}

void solve_poisson(SpatialGrid& grid) {
  if (!(grid.r_min() <= 0.0 && 0.0 <= grid.r_max())) {
    throw std::invalid_argument("Poisson solve needs the origin inside the grid");
  }
  const auto rho = grid.density();
  auto field = grid.field();
  const std::size_t n = grid.n_cells();
  const double h = grid.cell_width();

  // Cell [node(z), node(z+1)] contains the origin; integrand s*rho(s) vanishes there.
  const auto [z, alpha0] = locate(grid, 0.0);
  const double rho0 = (1.0 - alpha0) * rho[z] + alpha0 * rho[z + 1];

  // field temporarily holds the signed integral of s*rho(s) from 0 to node(j).
  auto g = [&](std::size_t j) { return grid.node(j) * rho[j]; };
  field[z] = 0.5 * grid.node(z) * g(z);
  field[z + 1] = 0.5 * grid.node(z + 1) * g(z + 1);
  for (std::size_t j = z + 2; j <= n; ++j) {
    field[j] = field[j - 1] + 0.5 * h * (g(j - 1) + g(j));
  }
  for (std::size_t j = z; j-- > 0;) {
    field[j] = field[j + 1] - 0.5 * h * (g(j) + g(j + 1));
  }

  for (std::size_t j = 0; j <= n; ++j) {
    const double rj = grid.node(j);
    field[j] = std::abs(rj) < 0.5 * h ? 0.5 * rj * rho0 : field[j] / rj;
  }
}

double interpolate(const SpatialGrid& grid, double r, FieldDiagnostics* diag) {
  if (!grid.contains(r)) {
    if (diag) ++diag->gathers_outside;
    return 0.0;
  }
  const auto [j, alpha] = locate(grid, r);
  const auto e = grid.field();
  return (1.0 - alpha) * e[j] + alpha * e[j + 1];
}

void refresh_field(FieldModel& model, const Ensemble& ensemble) {
  if (auto* sc = std::get_if<SelfConsistentField>(&model)) {
    deposit(ensemble, sc->grid, &sc->diagnostics);
    solve_poisson(sc->grid);
  }
}

double eval_field(FieldModel& model, double /*t*/, double r) {
  struct Visitor {
    double r;
    double operator()(const LinearField&) const { return -r; }
    double operator()(const CubicField&) const { return -r * r * r; }
    double operator()(SelfConsistentField& sc) const {
      return interpolate(sc.grid, r, &sc.diagnostics);
    }
  };
  return std::visit(Visitor{r}, model);
}

}  // namespace etdpic
