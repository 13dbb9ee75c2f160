// Acceptance gate: ten numbered end-to-end checks, one pass/fail line each.
// Exit code is the number of failed checks.  Tolerances are pinned inline.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <set>
#include <string>
#include <vector>

#include "avtrack/flux_model.hpp"
#include "avtrack/mesh.hpp"
#include "avtrack/reference_fv.hpp"
#include "avtrack/riemann.hpp"
#include "avtrack/scenario.hpp"
#include "avtrack/tracker.hpp"

namespace {

using namespace avtrack;

const FluxModel& model() {
  static FluxModel m = FluxModel::greenshields(1.0, 1.0, 0.75);
  return m;
}

struct Check {
  bool ok = true;
  std::string detail;

  void require(bool cond, const std::string& what) {
    if (!cond && ok) {
      ok = false;
      detail = what;
    }
  }
  void bound(double value, double limit, const std::string& what) {
    require(value <= limit,
            what + " = " + std::to_string(value) + " exceeds " + std::to_string(limit));
  }
};

RunHistory run(int nu, const StepFunction& rho0, const StepFunction& control, double y0,
               double t_end) {
  Tracker tr(build_grids(model(), nu), rho0, control, y0);
  tr.advance_to(t_end);
  return tr.finalize();
}

/** Worst structural violation of one Riemann solution: state chaining, speed
 * ordering, jump admissibility, Rankine-Hugoniot residual, fan end speeds,
 * and the nonclassical jump pinned to the band endpoints with capacity met
 * as an equality.  Structural breaks count as 1e9. */
double structural_residual(const RiemannSolution& sol) {
  const FluxModel& m = sol.model;
  double worst = 0.0;
  auto fail = [&](bool okay) {
    if (!okay) worst = std::max(worst, 1e9);
  };
  double prev_hi = -2.0 * m.V();
  double state = sol.rho_left;
  int bottlenecks = 0;
  for (const Wave& w : sol.waves) {
    fail(w.left == state);
    fail(w.s_lo >= prev_hi - 1e-9);
    fail(w.s_lo <= w.s_hi + 1e-15);
    switch (w.kind) {
      case WaveKind::Shock: {
        fail(w.left < w.right);
        worst = std::max(worst,
                         std::abs(m.f(w.right) - m.f(w.left) - w.s_lo * (w.right - w.left)));
        break;
      }
      case WaveKind::Rarefaction:
        fail(w.left > w.right);
        worst = std::max(worst, std::abs(w.s_lo - m.fp(w.left)));
        worst = std::max(worst, std::abs(w.s_hi - m.fp(w.right)));
        break;
      case WaveKind::Bottleneck: {
        ++bottlenecks;
        const BottleneckGeometry geo = m.geometry_at(sol.u);
        fail(w.left == geo.rho_hat);
        fail(w.right == geo.rho_check);
        fail(w.s_lo == sol.u);
        worst = std::max(worst, std::abs(m.f(w.left) - sol.u * w.left - geo.F_alpha));
        worst = std::max(worst, std::abs(m.f(w.right) - sol.u * w.right - geo.F_alpha));
        break;
      }
    }
    prev_hi = w.s_hi;
    state = w.right;
  }
  fail(state == sol.rho_right);
  fail(bottlenecks == (sol.constrained ? 1 : 0));
  return worst;
}

// ---------------------------------------------------------------------------

/** 1. Bottleneck geometry against its closed forms, 1e3 speeds, under 1 s. */
Check closed_form_geometry(double& seconds_cap) {
  seconds_cap = 1.0;
  Check c;
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double u = double(i) / 999.0;
    const BottleneckGeometry g = model().geometry_at(u);
    worst = std::max(worst, std::abs(g.rho_check - 0.25 * (1.0 - u)));
    worst = std::max(worst, std::abs(g.rho_hat - 0.75 * (1.0 - u)));
    worst = std::max(worst, std::abs(g.rho_star - (1.0 - u)));
    worst = std::max(worst, std::abs(g.F_alpha - 0.1875 * (1.0 - u) * (1.0 - u)));
  }
  c.bound(worst, 1e-10, "geometry deviation");
  return c;
}

/** 2. Band-contact speed ladder equals 1 - 3^-n through n = 20. */
Check speed_ladder(double&) {
  Check c;
  const std::vector<double> w = model().omega_sequence(1e-10);
  c.require(w.size() >= 21, "ladder shorter than 21 entries");
  double worst = 0.0;
  for (std::size_t n = 0; n < w.size() && n <= 20; ++n)
    worst = std::max(worst, std::abs(w[n] - (1.0 - std::pow(3.0, -double(n)))));
  c.bound(worst, 1e-10, "ladder deviation");
  for (std::size_t n = 1; n < w.size(); ++n)
    c.require(w[n] > w[n - 1], "ladder not strictly increasing");
  c.bound(1.0 - w.back(), 1e-10, "ladder limit gap");
  return c;
}

/** 3. Grid closure: band endpoints of every grid speed are grid densities;
 * minimal spacing stays above 1e-4 * 2^-nu. */
Check grid_closure(double&) {
  Check c;
  for (int nu = 2; nu <= 5; ++nu) {
    const Grids g = build_grids(model(), nu);
    double worst = 0.0;
    for (double u : g.speed) {
      if (u >= model().V()) continue;
      const BottleneckGeometry geo = model().geometry_at(u);
      for (double endpoint : {geo.rho_check, geo.rho_hat})
        worst = std::max(worst, std::abs(g.rho[g.nearest_rho_index(endpoint)] - endpoint));
    }
    c.bound(worst, 1e-10, "band endpoint off the grid at nu=" + std::to_string(nu));
    const double spacing = std::min(g.delta_rho, g.delta_u);
    c.require(spacing >= 1e-4 * std::pow(2.0, -nu),
              "grid spacing collapsed at nu=" + std::to_string(nu));
  }
  return c;
}

/** 4. Riemann solver over a 50^3 lattice: every branch label reached, worst
 * structural residual 1e-12, constraint respected along the vehicle ray. */
Check riemann_lattice(double& seconds_cap) {
  seconds_cap = 30.0;
  Check c;
  const int N = 50;
  std::set<RiemannCase> seen;
  double worst_rh = 0.0, worst_trace = 0.0;
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j)
      for (int k = 0; k < N; ++k) {
        const double rl = double(i) / (N - 1);
        const double rr = double(j) / (N - 1);
        const double u = double(k) / (N - 1);
        const RiemannSolution sol = constrained_riemann(model(), rl, rr, u);
        seen.insert(sol.label);
        worst_rh = std::max(worst_rh, structural_residual(sol));
        const double cap = model().F_alpha(sol.av_speed);
        for (double side : {-1e-9, 1e-9}) {
          const double tr = sol(sol.av_speed + side);
          worst_trace = std::max(worst_trace, model().f(tr) - sol.av_speed * tr - cap);
        }
        c.require(sol.av_speed >= 0.0 && sol.av_speed <= model().V(),
                  "vehicle speed outside [0, V]");
      }
  c.bound(worst_rh, 1e-12, "Rankine-Hugoniot / structure residual");
  c.bound(worst_trace, 1e-9, "constraint excess along the vehicle ray");
  for (int l = int(RiemannCase::kEqualFree); l <= int(RiemannCase::kRarSpanFanFan); ++l)
    c.require(seen.count(RiemannCase(l)) == 1,
              std::string("unreached solver branch: ") + to_string(RiemannCase(l)));
  return c;
}

// Shared sweep for checks 5-7: one hundred randomized runs at nu=4, T=5.
struct SweepStats {
  double worst_rise = -1e9;     // largest ledger increase
  double smallest_drop = 1e9;   // smallest strict decrease
  int count_rises = 0;          // flat events that grew the front list
  double worst_mass = 0.0;      // mass-balance defect
  int tv_violations = 0;        // TV above the initial functional
  double worst_av_law = 0.0;    // speed-law residual at sampled times
  double worst_av_range = 0.0;  // excess outside [0, V]
  double quantum = 0.0;
  long events = 0;
  bool done = false;
};

SweepStats& sweep() {
  static SweepStats st;
  if (st.done) return st;
  const double T = 5.0;
  const Grids g = build_grids(model(), 4);
  st.quantum = std::min(g.delta_rho, 3.0 * g.delta_u);
  for (unsigned seed = 1; seed <= 100; ++seed) {
    const Scenario s = random_scenario(seed, 4, 20, 10, T);
    Tracker tr(g, s.rho0, s.control, s.y0);
    tr.advance_to(T);
    const RunHistory& h = tr.finalize();
    st.events += long(h.ledger.rows.size()) - 1;

    const auto& rows = h.ledger.rows;
    for (std::size_t i = 1; i < rows.size(); ++i) {
      st.worst_rise = std::max(st.worst_rise, rows[i].d_upsilon);
      if (rows[i].d_upsilon < -1e-9)
        st.smallest_drop = std::min(st.smallest_drop, -rows[i].d_upsilon);
      else if (rows[i].front_count > rows[i - 1].front_count)
        ++st.count_rises;
    }

    const auto [lo, hi] = h.support();
    const double gain = T * (model().f(h.rho_far_left) - model().f(h.rho_far_right));
    st.worst_mass =
        std::max(st.worst_mass, std::abs(h.mass_in(T, lo - 0.5, hi + 0.5) -
                                         h.mass_in(0.0, lo - 0.5, hi + 0.5) - gain));
    for (int k = 0; k <= 10; ++k)
      if (h.profile(0.5 * k).total_variation() > h.ledger.upsilon0() + 1e-9)
        ++st.tv_violations;

    for (int k = 0; k < 1000; ++k) {
      const double t = (k + 0.5) * T / 1000.0;
      const AvSegment& seg = h.av_segment_at(t);
      st.worst_av_law = std::max(
          st.worst_av_law, std::abs(seg.speed - std::min(seg.u, model().v(seg.trace_right))));
      st.worst_av_law = std::max(st.worst_av_law, std::abs(seg.u - h.control(t)));
      st.worst_av_range = std::max({st.worst_av_range, -seg.speed, seg.speed - model().V()});
    }
  }
  st.done = true;
  return st;
}

/** 5. Ledger monotonicity: no event raises the functional; strict drops are
 * at least one grid quantum; flat events never grow the front list. */
Check ledger_monotonicity(double& seconds_cap) {
  seconds_cap = 120.0;
  Check c;
  const SweepStats& st = sweep();
  c.require(st.events > 1000, "sweep produced too few events to be meaningful");
  c.bound(st.worst_rise, 1e-9, "functional increase");
  c.require(st.smallest_drop >= st.quantum - 1e-9,
            "strict decrease below one grid quantum: " + std::to_string(st.smallest_drop));
  c.require(st.count_rises == 0, "front count grew across a constant-functional event");
  return c;
}

/** 6. Conservation and total variation across the same sweep. */
Check conservation_and_tv(double&) {
  Check c;
  const SweepStats& st = sweep();
  c.bound(st.worst_mass, 1e-10, "mass-balance defect");
  c.require(st.tv_violations == 0, "TV exceeded the initial functional");
  return c;
}

/** 7. Vehicle speed law at 1e3 sampled times per run. */
Check vehicle_speed_law(double&) {
  Check c;
  const SweepStats& st = sweep();
  c.bound(st.worst_av_law, 1e-12, "speed-law residual");
  c.require(st.worst_av_range <= 0.0, "vehicle speed left [0, V]");
  return c;
}

/** 8. Grid refinement: distance to a nu=8 reference decreases over
 * nu = 3..6 and ends below 5e-2, on five fixed scenarios. */
Check refinement_convergence(double&) {
  Check c;
  struct Fixed {
    StepFunction rho0, control;
    double y0;
  };
  const double T = 1.5;
  const std::vector<Fixed> cases = {
      {{{-1.0, 0.4}, {0.0, 0.62, 0.0}}, {{}, {0.17}}, 0.0},
      {{{-1.5, -0.3, 0.8}, {0.0, 0.31, 0.83, 0.0}}, {{0.6}, {0.43, 0.11}}, -0.6},
      {{{-0.5, 0.5}, {0.0, 0.95, 0.0}}, {{0.7}, {0.05, 0.77}}, -1.0},
      {{{-2.0, -1.0, 0.0, 1.0}, {0.0, 0.45, 0.2, 0.66, 0.0}}, {{0.5, 1.0}, {0.3, 0.9, 0.15}},
       0.25},
      {{{-1.0, 0.0, 1.2}, {0.0, 0.58, 0.12, 0.0}}, {{}, {0.34}}, 1.0},
  };
  for (std::size_t k = 0; k < cases.size(); ++k) {
    const Fixed& fx = cases[k];
    const RunHistory ref = run(8, fx.rho0, fx.control, fx.y0, T);
    double prev = 1e9;
    for (int nu : {3, 4, 5, 6}) {
      const double err = l1_space_time(run(nu, fx.rho0, fx.control, fx.y0, T), ref, T);
      c.require(err <= prev + 1e-12, "distance grew under refinement (scenario " +
                                         std::to_string(k) + ", nu=" + std::to_string(nu) + ")");
      prev = err;
      if (nu == 6)
        c.bound(err, 5e-2, "finest-grid distance (scenario " + std::to_string(k) + ")");
    }
  }
  return c;
}

/** 9. Cross-validation against the finite-volume reference under
 * simultaneous refinement, on the worked jump and five random scenarios. */
Check oracle_cross_validation(double& seconds_cap) {
  seconds_cap = 300.0;
  Check c;
  struct Pair {
    StepFunction rho0, control;
    double y0;
  };
  std::vector<Pair> cases;
  cases.push_back({{{0.0}, {0.4, 0.6}}, {{}, {0.1}}, 0.0});
  for (unsigned seed = 1; seed <= 5; ++seed) {
    const Scenario s = random_scenario(seed, 6, 6, 3, 1.0);
    cases.push_back({s.rho0, s.control, s.y0});
  }
  const double T = 1.0;
  // One quantization, shared by every refinement level of both solvers.
  const Grids coarse = build_grids(model(), 4);
  for (std::size_t k = 0; k < cases.size(); ++k) {
    Pair& p = cases[k];
    p.rho0.values = quantize_density_profile(coarse, p.rho0.values);
    p.rho0.compress();
    p.control.values = quantize_control(coarse, p.control.values);
    p.control.compress();
    double lo = p.y0, hi = p.y0;
    for (double b : p.rho0.breaks) {
      lo = std::min(lo, b);
      hi = std::max(hi, b);
    }
    const double pad = 1.0 + model().V() * T;
    double prev = 1e9;
    const std::pair<int, double> levels[] = {{4, 2e-3}, {5, 1e-3}, {6, 5e-4}};
    for (const auto& [nu, dx] : levels) {
      RunHistory h = run(nu, p.rho0, p.control, p.y0, T);
      h.scenario_hash = "cross";
      FvGrid fv = fv_run(model(), p.rho0, p.control, p.y0, lo - pad, hi + pad, dx, T, 0.9);
      fv.scenario_hash = "cross";
      const double err = l1_compare(h, fv);
      c.require(err <= prev + 1e-12, "distance grew under refinement (scenario " +
                                         std::to_string(k) + ", nu=" + std::to_string(nu) + ")");
      prev = err;
      if (nu == 6)
        c.bound(err, 5e-2, "finest-level distance (scenario " + std::to_string(k) + ")");
    }
  }
  return c;
}

/** 10. Validator soundness: clean runs yield empty reports; every injected
 * fault is flagged. */
Check validator_soundness(double&) {
  Check c;
  const RunHistory clean =
      run(2, StepFunction{{}, {0.5}}, StepFunction{{0.5}, {2.0 / 3.0, 1.0 / 6.0}}, 0.0, 1.0);
  const RunHistory clean2 = run(3, StepFunction{{0.0}, {0.4, 0.6}}, StepFunction{{}, {0.1}},
                                0.0, 1.0);
  c.require(validate_history(clean).issues.empty(), "clean run reported issues");
  c.require(validate_history(clean2).issues.empty(), "second clean run reported issues");

  {
    RunHistory bad = clean;
    bad.fronts.at(0).speed += 1e-3;
    c.require(!validate_history(bad).ok(), "perturbed front speed not flagged");
  }
  {
    RunHistory bad = clean;
    bool found = false;
    for (auto& f : bad.fronts)
      if (f.kind == FrontKind::kBottleneck) {
        f.left -= 0.03;
        found = true;
        break;
      }
    c.require(found && !validate_history(bad).ok(), "off-band nonclassical state not flagged");
  }
  {
    RunHistory bad = clean;
    bad.av.front().speed += 0.01;
    c.require(!validate_history(bad).ok(), "broken speed law not flagged");
  }
  {
    RunHistory bad = clean;
    bool found = false;
    for (auto& s : bad.av)
      if (s.mode == AvMode::kBottleneck) {
        s.trace_right = 0.5;
        found = true;
        break;
      }
    c.require(found && !validate_history(bad).ok(), "capacity-violating trace not flagged");
  }
  {
    RunHistory bad = clean;
    bad.ledger.rows.back().upsilon += 0.25;
    c.require(!validate_history(bad).ok(), "inflated ledger row not flagged");
  }
  return c;
}

}  // namespace

int main() {
  struct Entry {
    int number;
    const char* label;
    Check (*body)(double&);
  };
  const Entry entries[] = {
      {1, "closed-form bottleneck geometry", closed_form_geometry},
      {2, "band-contact speed ladder", speed_ladder},
      {3, "grid closure and spacing", grid_closure},
      {4, "Riemann lattice exhaustiveness", riemann_lattice},
      {5, "ledger monotonicity", ledger_monotonicity},
      {6, "conservation and total variation", conservation_and_tv},
      {7, "vehicle speed law", vehicle_speed_law},
      {8, "grid refinement convergence", refinement_convergence},
      {9, "finite-volume cross-validation", oracle_cross_validation},
      {10, "validator soundness", validator_soundness},
  };
  int failures = 0;
  for (const Entry& e : entries) {
    double seconds_cap = 0.0;  // 0 means no runtime requirement
    const auto start = std::chrono::steady_clock::now();
    Check c;
    try {
      c = e.body(seconds_cap);
    } catch (const std::exception& ex) {
      c.ok = false;
      c.detail = std::string("exception: ") + ex.what();
    }
    const double seconds = std::chrono::duration<double>(
        std::chrono::steady_clock::now() - start).count();
    if (seconds_cap > 0.0 && seconds >= seconds_cap) {
      c.ok = false;
      c.detail = "runtime " + std::to_string(seconds) + " s over the " +
                 std::to_string(seconds_cap) + " s cap";
    }
    std::printf("criterion %2d: %s  %-36s (%.2f s)%s%s\n", e.number, c.ok ? "PASS" : "FAIL",
                e.label, seconds, c.ok ? "" : "  ", c.ok ? "" : c.detail.c_str());
    failures += c.ok ? 0 : 1;
  }
  return failures;
}
