#pragma once

#include <string>
#include <vector>

#include "avtrack/flux_model.hpp"
#include "avtrack/tracker.hpp"

namespace avtrack {

/**
 * First-order Godunov oracle on a fixed uniform grid, with the moving
 * bottleneck realised as a capacity cap on the interface nearest the
 * vehicle.  Used only for L1 cross-validation of the exact tracker.
 */
struct FvGrid {
  double x0 = 0.0;  // left edge of cell 0
  double dx = 0.0;
  double t = 0.0;
  std::vector<double> cells;  // cell averages, in [0, R]
  double av_y = 0.0;
  double av_u = 0.0;     // control value in force at time t
  double deficit = 0.0;  // mass held back by the cap, relative to plain Godunov
  std::string scenario_hash;  // provenance tag matched against the tracker run

  double x_left(std::size_t j) const { return x0 + static_cast<double>(j) * dx; }
  double x_right(std::size_t j) const { return x0 + static_cast<double>(j + 1) * dx; }
  double mass() const;
};

/** Godunov interface flux for a concave flux function. */
double godunov_flux(const FluxModel& m, double a, double b);

/** Exact cell averages of a piecewise-constant datum over [x_lo, x_hi]. */
FvGrid fv_init(const FluxModel& m, const StepFunction& rho0, const StepFunction& control,
               double y0, double x_lo, double x_hi, double dx);

/**
 * One explicit step of size dt.  Ghost cells copy the edge cells.  The
 * interface nearest the vehicle carries the capped flux
 * min{Godunov, F_alpha(w) + w * rho_downwind} with w = min{u, v(rho_downwind)},
 * and the vehicle advances by explicit Euler at speed w.
 * Throws when dt exceeds the CFL bound dx / V.
 */
void fv_step(FvGrid& grid, const FluxModel& m, const StepFunction& control, double dt);

/** Run to t_end with dt = cfl * dx / V, landing exactly on control jumps. */
FvGrid fv_run(const FluxModel& m, const StepFunction& rho0, const StepFunction& control, double y0,
              double x_lo, double x_hi, double dx, double t_end, double cfl = 0.9);

/**
 * L1 distance between the tracker profile at time grid.t and the cell
 * averages, integrated exactly over the grid window.
 * Throws when the scenario hashes disagree.
 */
double l1_compare(const RunHistory& h, const FvGrid& grid);

}  // namespace avtrack
