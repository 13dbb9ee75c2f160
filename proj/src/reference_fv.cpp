#include "avtrack/reference_fv.hpp"

#include <algorithm>
#include <cmath>

#include "avtrack/check.hpp"

namespace avtrack {

double FvGrid::mass() const {
  double acc = 0.0;
  for (double c : cells) acc += c;
  return acc * dx;
}

double godunov_flux(const FluxModel& m, double a, double b) {
  if (a <= b) return std::min(m.f(a), m.f(b));
  return m.f(std::clamp(m.rho_crit(), b, a));
}

FvGrid fv_init(const FluxModel& m, const StepFunction& rho0, const StepFunction& control,
               double y0, double x_lo, double x_hi, double dx) {
  AVTRACK_CHECK(dx > 0.0 && x_hi > x_lo, "fv_init: degenerate window");
  AVTRACK_CHECK(!rho0.values.empty() && !control.values.empty(), "fv_init: empty data");
  for (double v : rho0.values)
    AVTRACK_CHECK(v >= 0.0 && v <= m.R(), "fv_init: density outside [0, R]");

  FvGrid g;
  g.x0 = x_lo;
  g.dx = dx;
  g.av_y = y0;
  g.av_u = control(0.0);
  const auto n = static_cast<std::size_t>(std::ceil((x_hi - x_lo) / dx - 1e-12));
  g.cells.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double xl = g.x_left(j);
    const double xr = g.x_right(j);
    auto it = std::upper_bound(rho0.breaks.begin(), rho0.breaks.end(), xl);
    if (it == rho0.breaks.end() || *it >= xr) {
      // One piece covers the whole cell: keep its value bit-exact.
      g.cells[j] = rho0.values[static_cast<std::size_t>(it - rho0.breaks.begin())];
      continue;
    }
    // Exact average of the piecewise-constant datum over the cell.
    double acc = 0.0;
    double x = xl;
    while (x < xr) {
      const double stop = (it == rho0.breaks.end()) ? xr : std::min(*it, xr);
      const std::size_t piece = static_cast<std::size_t>(it - rho0.breaks.begin());
      acc += rho0.values[piece] * (stop - x);
      x = stop;
      if (it != rho0.breaks.end() && *it <= x) ++it;
    }
    g.cells[j] = acc / dx;
  }
  return g;
}

void fv_step(FvGrid& g, const FluxModel& m, const StepFunction& control, double dt) {
  AVTRACK_CHECK(dt > 0.0, "fv_step: dt must be positive");
  AVTRACK_CHECK(dt <= g.dx / m.V() * (1.0 + 1e-12), "fv_step: CFL violation");
  const auto n = g.cells.size();
  AVTRACK_CHECK(n >= 2, "fv_step: grid too small");

  g.av_u = control(g.t);

  // Interface i sits between cells i-1 and i; ghost cells copy the edges.
  std::vector<double> flux(n + 1);
  flux[0] = m.f(g.cells.front());
  flux[n] = m.f(g.cells.back());
  for (std::size_t i = 1; i < n; ++i) flux[i] = godunov_flux(m, g.cells[i - 1], g.cells[i]);

  // Capacity cap on the interface nearest the vehicle.  The downwind cell
  // average stands in for the right trace; the cap is the bottleneck
  // capacity translated back to the ground frame.
  const auto i_av = static_cast<long>(std::lround((g.av_y - g.x0) / g.dx));
  double w = g.av_u;
  if (i_av >= 1 && i_av < static_cast<long>(n)) {
    const double down = g.cells[static_cast<std::size_t>(i_av)];
    w = std::min(g.av_u, m.v(down));
    const double cap = m.F_alpha(w) + w * down;
    if (flux[static_cast<std::size_t>(i_av)] > cap) {
      g.deficit += (flux[static_cast<std::size_t>(i_av)] - cap) * dt;
      flux[static_cast<std::size_t>(i_av)] = cap;
    }
  } else if (i_av >= static_cast<long>(n)) {
    w = std::min(g.av_u, m.v(g.cells.back()));
  } else {
    w = std::min(g.av_u, m.v(g.cells.front()));
  }

  const double lambda = dt / g.dx;
  for (std::size_t j = 0; j < n; ++j) g.cells[j] -= lambda * (flux[j + 1] - flux[j]);
  g.av_y += dt * w;
  g.t += dt;
}

FvGrid fv_run(const FluxModel& m, const StepFunction& rho0, const StepFunction& control, double y0,
              double x_lo, double x_hi, double dx, double t_end, double cfl) {
  AVTRACK_CHECK(cfl > 0.0 && cfl <= 1.0, "fv_run: cfl outside (0, 1]");
  AVTRACK_CHECK(t_end >= 0.0, "fv_run: negative horizon");
  FvGrid g = fv_init(m, rho0, control, y0, x_lo, x_hi, dx);
  const double dt_max = cfl * dx / m.V();
  while (g.t < t_end - 1e-14) {
    double stop = t_end;
    auto it = std::upper_bound(control.breaks.begin(), control.breaks.end(), g.t);
    if (it != control.breaks.end()) stop = std::min(stop, *it);
    const double dt = std::min(dt_max, stop - g.t);
    if (dt <= 1e-14) {
      g.t = stop;
      continue;
    }
    fv_step(g, m, control, dt);
  }
  g.t = t_end;
  return g;
}

double l1_compare(const RunHistory& h, const FvGrid& g) {
  AVTRACK_CHECK(h.scenario_hash == g.scenario_hash, "l1_compare: scenario hash mismatch");
  const StepFunction prof = h.profile(g.t);
  double acc = 0.0;
  for (std::size_t j = 0; j < g.cells.size(); ++j) {
    const double xl = g.x_left(j);
    const double xr = g.x_right(j);
    double x = xl;
    auto it = std::upper_bound(prof.breaks.begin(), prof.breaks.end(), xl);
    while (x < xr) {
      const double stop = (it == prof.breaks.end()) ? xr : std::min(*it, xr);
      const std::size_t piece = static_cast<std::size_t>(it - prof.breaks.begin());
      acc += std::abs(prof.values[piece] - g.cells[j]) * (stop - x);
      x = stop;
      if (it != prof.breaks.end() && *it <= x) ++it;
    }
  }
  return acc;
}

}  // namespace avtrack
