#pragma once
#include <vector>

#include "avtrack/flux_model.hpp"

namespace avtrack {

enum class WaveKind {
  Shock,       // admissible jump, left density < right density
  Rarefaction, // continuous fan, left density > right density
  Bottleneck,  // nonclassical jump rho_hat(u) -> rho_check(u) riding the AV
};

/** One self-similar wave.  Shock and Bottleneck waves propagate at the single
 * speed s_lo == s_hi; a Rarefaction spans the ray fan [s_lo, s_hi]. */
struct Wave {
  WaveKind kind;
  double left, right;  // densities adjacent on each side
  double s_lo, s_hi;
};

/** Branch of the solver that produced a solution; the coverage tests exercise
 * every reachable branch.  Naming: data type (Shock / Rar / Equal) x position
 * of the classical wave relative to the desired speed u (Slow / Fast / Tie /
 * Span) x resolution (Free: AV travels at u through unconstrained traffic;
 * Saturated: AV stuck at the slower traffic speed; Ride: AV rides the
 * classical shock; Constrained: capacity drop splits the wave, with the
 * flavor of the classical part on each side of the nonclassical jump). */
enum class RiemannCase {
  kClassical,  // solved without any bottleneck
  kEqualFree,
  kEqualConstrained,
  kShockSlowFree,
  kShockSlowSaturated,
  kShockSlowConstrained,
  kShockFastFree,
  kShockFastConstrained,
  kShockTieRide,
  kShockTieConstrained,
  kRarSlowFree,
  kRarSlowSaturated,
  kRarSlowConstrainedShock,
  kRarSlowConstrainedFan,
  kRarFastFree,
  kRarFastConstrainedShock,
  kRarFastConstrainedFan,
  kRarSpanShockShock,
  kRarSpanShockFan,
  kRarSpanFanShock,
  kRarSpanFanFan,
  kRarSpanFree,  // fan spans u yet the capacity margin vanishes (u near V)
};
const char* to_string(RiemannCase c);

struct RiemannSolution {
  FluxModel model;
  std::vector<Wave> waves;  // speed-ordered, adjacent states matching
  double rho_left, rho_right;
  double u = 0;         // desired bottleneck speed the problem was posed with
  double av_speed = 0;  // slope of the bottleneck trajectory through the origin
  bool constrained = false;
  RiemannCase label = RiemannCase::kClassical;

  /** Density on the ray x/t = xi, right-continuous in xi. */
  double operator()(double xi) const;
};

/** Self-similar solution without the bottleneck: one shock, one fan, or
 * nothing.  Requires densities in [0, R]. */
RiemannSolution classical_riemann(const FluxModel& model, double rho_l, double rho_r);

/** Self-similar solution with the bottleneck through the origin at desired
 * speed u in [0, V].  When the classical solution's density on the ray u
 * violates the capacity constraint f(rho) - u*rho <= F_alpha(u) by more than
 * 1e-12, the wave splits around the nonclassical jump and the AV travels at
 * exactly u; otherwise the solution is classical and the AV speed is the
 * fixed point of s = min(u, v(density on ray s+)), found by bisection (the
 * map is a strictly decreasing contraction minus identity). */
RiemannSolution constrained_riemann(const FluxModel& model, double rho_l, double rho_r, double u);

}  // namespace avtrack
