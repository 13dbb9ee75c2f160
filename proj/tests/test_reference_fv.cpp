#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "avtrack/check.hpp"
#include "avtrack/mesh.hpp"
#include "avtrack/reference_fv.hpp"

namespace {

const avtrack::FluxModel& unit_model() {
  static avtrack::FluxModel m = avtrack::FluxModel::greenshields(1.0, 1.0, 0.75);
  return m;
}

const avtrack::Grids& grids2() {
  static avtrack::Grids g = avtrack::build_grids(unit_model(), 2);
  return g;
}

avtrack::StepFunction constant(double v) { return {{}, {v}}; }

avtrack::StepFunction one_step(double x, double a, double b) { return {{x}, {a, b}}; }

avtrack::RunHistory track(const avtrack::Grids& g, const avtrack::StepFunction& rho0,
                          const avtrack::StepFunction& u, double y0, double t_end) {
  avtrack::Tracker tr(g, rho0, u, y0);
  tr.advance_to(t_end);
  return tr.finalize();
}

double cell_at(const avtrack::FvGrid& g, double x) {
  const auto j = static_cast<std::size_t>(std::floor((x - g.x0) / g.dx));
  return g.cells.at(j);
}

}  // namespace

TEST_CASE("interface flux selects the correct Riemann branch") {
  const auto& m = unit_model();
  CHECK(std::abs(avtrack::godunov_flux(m, 0.2, 0.8) - 0.16) <= 1e-15);
  CHECK(std::abs(avtrack::godunov_flux(m, 0.8, 0.2) - 0.25) <= 1e-15);
  CHECK(std::abs(avtrack::godunov_flux(m, 0.3, 0.1) - 0.21) <= 1e-15);
  CHECK(std::abs(avtrack::godunov_flux(m, 0.1, 0.3) - 0.09) <= 1e-15);
  CHECK(std::abs(avtrack::godunov_flux(m, 0.5, 0.5) - 0.25) <= 1e-15);
}

TEST_CASE("cell averages are exact for piecewise-constant data") {
  const auto g = avtrack::fv_init(unit_model(), one_step(0.5, 0.0, 1.0), constant(0.5), 0.0, 0.0,
                                  1.0, 1.0 / 3.0);
  REQUIRE(g.cells.size() == 3);
  CHECK(std::abs(g.cells[0] - 0.0) <= 1e-15);
  CHECK(std::abs(g.cells[1] - 0.5) <= 1e-12);
  CHECK(std::abs(g.cells[2] - 1.0) <= 1e-15);
}

TEST_CASE("an unconstrained cruise leaves uniform traffic untouched") {
  // v(0.35) = 0.65 > u would allow u = 0.6; the constraint holds with slack,
  // so the scheme must reduce to plain Godunov on constant data.
  const auto g = avtrack::fv_run(unit_model(), constant(0.35), constant(0.6), 0.0, -1.0, 1.0, 1e-2,
                                 0.5);
  for (double c : g.cells) CHECK(c == 0.35);
  CHECK(g.deficit == 0.0);
  CHECK(std::abs(g.av_y - 0.3) <= 1e-9);
}

TEST_CASE("a complete jam pins the vehicle in place") {
  const auto g =
      avtrack::fv_run(unit_model(), constant(1.0), constant(0.5), 0.1, -1.0, 1.0, 1e-2, 1.0);
  for (double c : g.cells) CHECK(c == 1.0);
  CHECK(std::abs(g.av_y - 0.1) <= 1e-12);
  CHECK(g.deficit == 0.0);
}

TEST_CASE("the capped interface reproduces the bottleneck plateaus") {
  // Datum (0.4 | 0.6) at the vehicle, desired speed 0.1: the exact solution
  // carries plateaus 0.675 behind and 0.225 ahead of the vehicle.
  const auto g = avtrack::fv_run(unit_model(), one_step(0.0, 0.4, 0.6), constant(0.1), 0.0, -1.0,
                                 1.0, 1e-3, 1.0);
  CHECK(std::abs(cell_at(g, 0.0125) - 0.675) <= 2e-2);
  CHECK(std::abs(cell_at(g, 0.1375) - 0.225) <= 2e-2);
  CHECK(std::abs(g.av_y - 0.1) <= 2e-2);
  CHECK(g.deficit > 0.0);

  // Equal far-field fluxes: total mass is conserved to rounding.
  const auto g0 = avtrack::fv_init(unit_model(), one_step(0.0, 0.4, 0.6), constant(0.1), 0.0, -1.0,
                                   1.0, 1e-3);
  CHECK(std::abs(g.mass() - g0.mass()) <= 1e-10);
}

TEST_CASE("distance to the exact solution shrinks at first order") {
  // Pure conservation-law shock: the vehicle idles far outside the window.
  const auto& gr = grids2();
  const auto h = track(gr, one_step(0.0, 1.0 / 12.0, 0.5), constant(1.0), 50.0, 0.5);

  double prev = -1.0;
  for (double dx : {4e-3, 2e-3, 1e-3}) {
    const auto g = avtrack::fv_run(gr.model, one_step(0.0, 1.0 / 12.0, 0.5), constant(1.0), 50.0,
                                   -1.0, 1.0, dx, 0.5);
    const double err = avtrack::l1_compare(h, g);
    if (prev >= 0.0) CHECK(err <= 0.65 * prev);
    prev = err;
  }
  CHECK(prev <= 5e-3);
}

TEST_CASE("oracle and tracker agree on the constrained triple") {
  const auto& gr = grids2();
  const auto h = track(gr, one_step(0.0, 3.0 / 8.0, 0.5), constant(1.0 / 6.0), 0.0, 1.0);

  double prev = -1.0;
  for (double dx : {4e-3, 2e-3, 1e-3}) {
    const auto g = avtrack::fv_run(gr.model, one_step(0.0, 3.0 / 8.0, 0.5), constant(1.0 / 6.0),
                                   0.0, -1.25, 1.25, dx, 1.0);
    const double err = avtrack::l1_compare(h, g);
    CHECK(err <= 5e-2);
    if (prev >= 0.0) CHECK(err <= prev);
    prev = err;
  }
  CHECK(prev <= 2.5e-2);
}

TEST_CASE("oracle and tracker agree across a control jump") {
  const auto& gr = grids2();
  const avtrack::StepFunction u{{0.5}, {2.0 / 3.0, 1.0 / 6.0}};
  const auto h = track(gr, constant(0.5), u, 0.0, 1.0);
  const auto g =
      avtrack::fv_run(gr.model, constant(0.5), u, 0.0, -1.5, 1.5, 1e-3, 1.0);
  CHECK(avtrack::l1_compare(h, g) <= 5e-2);
  CHECK(std::abs(g.av_y - h.av_position(1.0)) <= 2e-2);
}

TEST_CASE("time step and scenario guards reject misuse") {
  const auto& m = unit_model();
  auto g = avtrack::fv_init(m, constant(0.5), constant(0.5), 0.0, -1.0, 1.0, 1e-2);
  CHECK_THROWS_AS(avtrack::fv_step(g, m, constant(0.5), 2e-2), avtrack::InvariantError);
  CHECK_THROWS_AS(avtrack::fv_step(g, m, constant(0.5), -1.0), avtrack::InvariantError);

  const auto h = track(grids2(), constant(0.5), constant(0.5), 0.0, 1.0);
  auto g2 = avtrack::fv_run(m, constant(0.5), constant(0.5), 0.0, -1.0, 1.0, 1e-2, 1.0);
  g2.scenario_hash = "mismatch";
  CHECK_THROWS_AS(avtrack::l1_compare(h, g2), avtrack::InvariantError);
}
