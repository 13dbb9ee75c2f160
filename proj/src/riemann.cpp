#include "avtrack/riemann.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "avtrack/check.hpp"

namespace avtrack {
namespace {

constexpr double kTie = 1e-12;  // speed/constraint ties resolve to the classical branch

void require_density(const FluxModel& m, double rho, const char* who) {
  if (!(rho >= -1e-9 * m.R() && rho <= m.R() * (1.0 + 1e-9)))
    throw std::invalid_argument(std::string(who) + ": density " + std::to_string(rho) +
                                " outside [0, R]");
}

/** Appends the classical wave between a and b (nothing when a == b). */
void append_classical(const FluxModel& m, double a, double b, std::vector<Wave>& out) {
  if (a == b) return;
  if (a < b) {
    double s = m.chord(a, b);
    out.push_back({WaveKind::Shock, a, b, s, s});
  } else {
    out.push_back({WaveKind::Rarefaction, a, b, m.fp(a), m.fp(b)});
  }
}

}  // namespace

const char* to_string(RiemannCase c) {
  switch (c) {
    case RiemannCase::kClassical: return "classical";
    case RiemannCase::kEqualFree: return "equal-free";
    case RiemannCase::kEqualConstrained: return "equal-constrained";
    case RiemannCase::kShockSlowFree: return "shock-slow-free";
    case RiemannCase::kShockSlowSaturated: return "shock-slow-saturated";
    case RiemannCase::kShockSlowConstrained: return "shock-slow-constrained";
    case RiemannCase::kShockFastFree: return "shock-fast-free";
    case RiemannCase::kShockFastConstrained: return "shock-fast-constrained";
    case RiemannCase::kShockTieRide: return "shock-tie-ride";
    case RiemannCase::kShockTieConstrained: return "shock-tie-constrained";
    case RiemannCase::kRarSlowFree: return "rar-slow-free";
    case RiemannCase::kRarSlowSaturated: return "rar-slow-saturated";
    case RiemannCase::kRarSlowConstrainedShock: return "rar-slow-constrained-shock";
    case RiemannCase::kRarSlowConstrainedFan: return "rar-slow-constrained-fan";
    case RiemannCase::kRarFastFree: return "rar-fast-free";
    case RiemannCase::kRarFastConstrainedShock: return "rar-fast-constrained-shock";
    case RiemannCase::kRarFastConstrainedFan: return "rar-fast-constrained-fan";
    case RiemannCase::kRarSpanShockShock: return "rar-span-shock-shock";
    case RiemannCase::kRarSpanShockFan: return "rar-span-shock-fan";
    case RiemannCase::kRarSpanFanShock: return "rar-span-fan-shock";
    case RiemannCase::kRarSpanFanFan: return "rar-span-fan-fan";
    case RiemannCase::kRarSpanFree: return "rar-span-free";
  }
  return "unknown";
}

double RiemannSolution::operator()(double xi) const {
  for (const Wave& w : waves) {
    if (xi < w.s_lo) return w.left;
    if (w.kind == WaveKind::Rarefaction && xi < w.s_hi) return model.fp_inverse(xi);
  }
  return waves.empty() ? rho_left : waves.back().right;
}

RiemannSolution classical_riemann(const FluxModel& model, double rho_l, double rho_r) {
  require_density(model, rho_l, "classical_riemann");
  require_density(model, rho_r, "classical_riemann");
  RiemannSolution sol{model, {}, rho_l, rho_r};
  sol.u = sol.av_speed = std::nan("");
  sol.label = RiemannCase::kClassical;
  append_classical(model, rho_l, rho_r, sol.waves);
  return sol;
}

RiemannSolution constrained_riemann(const FluxModel& model, double rho_l, double rho_r,
                                    double u) {
  require_density(model, rho_l, "constrained_riemann");
  require_density(model, rho_r, "constrained_riemann");
  if (!(u >= -1e-12 && u <= model.V() * (1.0 + 1e-12)))
    throw std::invalid_argument("constrained_riemann: u outside [0, V]");
  u = std::clamp(u, 0.0, model.V());

  RiemannSolution classical = classical_riemann(model, rho_l, rho_r);
  BottleneckGeometry geo = model.geometry_at(u);
  double tau = classical(u);  // right-continuous trace on the bottleneck ray
  bool constrained = model.f(tau) - u * tau > geo.F_alpha + kTie;

  RiemannSolution sol{model, {}, rho_l, rho_r};
  sol.u = u;
  sol.constrained = constrained;

  if (constrained) {
    append_classical(model, rho_l, geo.rho_hat, sol.waves);
    sol.waves.push_back({WaveKind::Bottleneck, geo.rho_hat, geo.rho_check, u, u});
    append_classical(model, geo.rho_check, rho_r, sol.waves);
    sol.av_speed = u;
    // every classical piece stays on its side of the bottleneck ray
    for (const Wave& w : sol.waves) {
      if (w.kind == WaveKind::Bottleneck) continue;
      if (w.s_hi < u)
        AVTRACK_CHECK(w.s_hi <= u + 1e-9, "left piece crossed the bottleneck ray");
      else
        AVTRACK_CHECK(w.s_lo >= u - 1e-9, "right piece crossed the bottleneck ray");
    }
  } else {
    sol.waves = classical.waves;
    // AV speed: fixed point of s -> min(u, v(rho(s+))); the right-hand side is
    // non-increasing in s, so the crossing with the identity is unique
    double lo = 0.0, hi = model.V();
    auto excess = [&](double s) { return std::min(u, model.v(classical(s))) - s; };
    if (excess(0.0) <= 0.0) {
      sol.av_speed = 0.0;
    } else {
      for (int it = 0; it < 100; ++it) {
        double mid = 0.5 * (lo + hi);
        if (excess(mid) > 0.0) lo = mid; else hi = mid;
      }
      sol.av_speed = 0.5 * (lo + hi);
    }
  }

  // label the branch
  if (rho_l == rho_r) {
    sol.label = constrained ? RiemannCase::kEqualConstrained : RiemannCase::kEqualFree;
  } else if (rho_l < rho_r) {
    double sigma = model.chord(rho_l, rho_r);
    if (constrained) {
      sol.label = std::abs(sigma - u) <= kTie ? RiemannCase::kShockTieConstrained
                  : sigma < u                 ? RiemannCase::kShockSlowConstrained
                                              : RiemannCase::kShockFastConstrained;
    } else if (std::abs(sigma - u) <= kTie) {
      sol.label = RiemannCase::kShockTieRide;
    } else if (sigma < u) {
      sol.label = model.v(rho_r) >= u - kTie ? RiemannCase::kShockSlowFree
                                             : RiemannCase::kShockSlowSaturated;
    } else {
      // v(rho_l) >= sigma > u, so the AV travels freely at u
      sol.label = RiemannCase::kShockFastFree;
    }
  } else {
    double sl = model.fp(rho_l), sr = model.fp(rho_r);
    if (constrained) {
      if (sr < u - kTie) {
        sol.label = rho_l > geo.rho_hat + kTie ? RiemannCase::kRarSlowConstrainedFan
                                               : RiemannCase::kRarSlowConstrainedShock;
      } else if (sl > u + kTie) {
        sol.label = rho_r < geo.rho_check - kTie ? RiemannCase::kRarFastConstrainedFan
                                                 : RiemannCase::kRarFastConstrainedShock;
      } else {
        bool fan_left = rho_l > geo.rho_hat + kTie;
        bool fan_right = rho_r < geo.rho_check - kTie;
        sol.label = fan_left ? (fan_right ? RiemannCase::kRarSpanFanFan
                                          : RiemannCase::kRarSpanFanShock)
                             : (fan_right ? RiemannCase::kRarSpanShockFan
                                          : RiemannCase::kRarSpanShockShock);
      }
    } else if (sr <= u + kTie) {
      sol.label = model.v(rho_r) >= u - kTie ? RiemannCase::kRarSlowFree
                                             : RiemannCase::kRarSlowSaturated;
    } else if (sl >= u - kTie) {
      sol.label = RiemannCase::kRarFastFree;
    } else {
      sol.label = RiemannCase::kRarSpanFree;
    }
  }
  return sol;
}

}  // namespace avtrack
