#pragma once
#include <vector>

#include "avtrack/flux_model.hpp"

namespace avtrack {

/** Density and speed grids at refinement nu, with cached per-point tables.
 *
 * Closure invariant: for every grid speed u, both band endpoints
 * rho_check(u) and rho_hat(u) are grid densities, so the simulator can test
 * band membership and build nonclassical fronts by index arithmetic alone.
 * The nonclassical jump (rho_hat(u) left, rho_check(u) right) then travels at
 * the grid chord between its endpoints, which equals u exactly. */
struct Grids {
  explicit Grids(const FluxModel& m) : model(m) {}

  FluxModel model;
  int nu = 0;

  std::vector<double> rho;    // density grid: ascending, rho.front()=0, rho.back()=R
  std::vector<double> speed;  // speed grid: ascending, speed.front()=0, speed.back()=V

  std::vector<double> f_of;  // flux at each grid density
  std::vector<double> v_of;  // mean traffic speed at each grid density, v_of[0]=V

  // per grid speed: band endpoints as density-grid indices, capacity value
  std::vector<int> hat_idx, check_idx;
  std::vector<double> cap_of;

  double delta_rho = 0, eps_rho = 0;  // min / max adjacent density spacing
  double delta_u = 0, eps_u = 0;      // min / max adjacent speed spacing
  int ladder_depth = 0;               // J: last ladder speed index below the terminator
  bool clipped = false;               // a refined speed overshot the ladder terminator

  /** Index of an exact grid member (1e-9 slack); throws std::invalid_argument
   * if the value is not on the grid. */
  int rho_index(double value) const;
  int speed_index(double value) const;

  /** Nearest grid index; exact midpoint ties resolve toward the smaller value. */
  int nearest_rho_index(double value) const;
  int nearest_speed_index(double value) const;

  /** Nearest grid density, ties toward the smaller value. */
  double quantize_density(double value) const { return rho[nearest_rho_index(value)]; }
  double quantize_speed(double value) const { return speed[nearest_speed_index(value)]; }

  /** Chord slope of the flux between two grid densities; requires i != j. */
  double chord(int i, int j) const;

  /** True when grid density index k lies strictly inside the inadmissible band
   * of grid speed index s. */
  bool in_band(int k, int s) const { return check_idx[s] < k && k < hat_idx[s]; }
};

/** Builds the refinement-nu grids.  nu in [1, 12].
 *
 * 1. Speed ladder from 0 by band contact (rho_hat(next) = rho_check(prev))
 *    until within 2^-nu of V; the first such terminator stays in the grid.
 * 2. The gap [0, u_1] splits into 2^nu equal speeds; each is chained down the
 *    ladder by band contact, inserting the shared band-endpoint densities.
 * 3. [rho_hat(0), R] splits into 2^nu equal density cells.
 * 4. Closure pass: band endpoints of every grid speed become grid densities;
 *    V joins the speed grid; duplicates within 1e-12 merge. */
Grids build_grids(const FluxModel& model, int nu);

/** Projects a value sequence onto a grid with total variation under control:
 * per-point nearest (ties toward the smaller value); if that projection
 * inflates total variation, it is rebuilt by dynamic programming over the two
 * bracketing grid points of each value, minimizing (total variation, then sum
 * of distances) lexicographically.  The result never exceeds the input's
 * total variation by more than 1e-12, each output lies within one grid gap of
 * its input, and grid-valued inputs pass through unchanged. */
std::vector<double> quantize_sequence(const std::vector<double>& grid,
                                      const std::vector<double>& values);

/** quantize_sequence on the density grid. */
std::vector<double> quantize_density_profile(const Grids& g, const std::vector<double>& values);
/** quantize_sequence on the speed grid. */
std::vector<double> quantize_control(const Grids& g, const std::vector<double>& values);

/** Piecewise-linear interpolant of the flux with nodes at the grid densities.
 * Agrees with the exact flux at every node and is concave because chords of a
 * concave flux decrease left to right. */
class PiecewiseLinearFlux {
 public:
  explicit PiecewiseLinearFlux(const Grids& g) : g_(&g) {}
  double operator()(double rho) const;
  /** Slope over cell [rho[cell], rho[cell+1]]. */
  double slope(int cell) const { return g_->chord(cell + 1, cell); }

 private:
  const Grids* g_;
};

double total_variation(const std::vector<double>& values);

}  // namespace avtrack
