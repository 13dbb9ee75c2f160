#include "avtrack/cli.hpp"

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "avtrack/check.hpp"
#include "avtrack/mesh.hpp"
#include "avtrack/output.hpp"
#include "avtrack/reference_fv.hpp"
#include "avtrack/riemann.hpp"
#include "avtrack/scenario.hpp"

namespace avtrack {
namespace {

namespace fs = std::filesystem;

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  AVTRACK_CHECK(in.good(), "cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path pick_out_dir(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("AVTRACK_OUTPUT_DIR")) return env;
  return ".";
}

RunHistory solve_scenario(const Scenario& s) {
  const Grids grids = build_grids(scenario_model(s), s.nu);
  Tracker tracker(grids, s.rho0, s.control, s.y0);
  tracker.advance_to(s.t_end);
  RunHistory h = tracker.finalize();
  h.scenario_hash = scenario_hash(s);
  return h;
}

std::vector<double> snapshot_times(const Scenario& s) {
  if (!s.snapshots.empty()) return s.snapshots;
  return {s.t_end};
}

/** Quantizes through the tracker's grids so the oracle evolves the same
 * datum the tracker does. */
Scenario quantized_copy(const Scenario& s) {
  const Grids grids = build_grids(scenario_model(s), s.nu);
  Scenario q = s;
  q.rho0.values = quantize_density_profile(grids, s.rho0.values);
  q.control.values = quantize_control(grids, s.control.values);
  return q;
}

std::pair<double, double> fv_window(const RunHistory& h) {
  const auto [lo, hi] = h.support();
  const double pad = 1.0 + h.grids.model.V() * h.t_end;
  return {lo - pad, hi + pad};
}

int cmd_solve(const std::string& scenario_path, const std::string& out_flag) {
  const Scenario s = parse_scenario(slurp(scenario_path));
  const RunHistory h = solve_scenario(s);
  const fs::path dir = pick_out_dir(out_flag);
  fs::create_directories(dir);
  write_file(dir / "fronts.csv", csv_fronts(h));
  write_file(dir / "trajectory.csv", csv_trajectory(h));
  write_file(dir / "ledger.csv", csv_ledger(h));
  write_file(dir / "snapshots.csv", csv_snapshots(h, snapshot_times(s)));
  int files = 4;
  if (s.diagram) {
    write_file(dir / "diagram.svg", svg_diagram(h));
    ++files;
  }
  const auto& rows = h.ledger.rows;
  std::cout << "scenario " << h.scenario_hash << ": " << rows.size() - 1 << " events, upsilon "
            << fmt_double(rows.front().upsilon) << " -> " << fmt_double(rows.back().upsilon)
            << ", " << files << " files in " << dir.string() << "\n";
  return 0;
}

int cmd_riemann(double rho_l, double rho_r, double u, double R, double V, double alpha) {
  const FluxModel m = FluxModel::greenshields(R, V, alpha);
  const RiemannSolution sol = constrained_riemann(m, rho_l, rho_r, u);
  std::cout << "case " << to_string(sol.label) << ", av_speed " << fmt_double(sol.av_speed)
            << (sol.constrained ? ", constrained" : ", unconstrained") << "\n";
  std::cout << "kind,left,right,s_lo,s_hi\n";
  for (const auto& w : sol.waves) {
    const char* kind = w.kind == WaveKind::Shock        ? "shock"
                       : w.kind == WaveKind::Rarefaction ? "rarefaction"
                                                         : "bottleneck";
    std::cout << kind << ',' << fmt_double(w.left) << ',' << fmt_double(w.right) << ','
              << fmt_double(w.s_lo) << ',' << fmt_double(w.s_hi) << "\n";
  }
  return 0;
}

int cmd_grid(int nu, double R, double V, double alpha) {
  const Grids g = build_grids(FluxModel::greenshields(R, V, alpha), nu);
  std::cout << "speeds (" << g.speed.size() << "):";
  for (double u : g.speed) std::cout << ' ' << fmt_double(u);
  std::cout << "\ndensities (" << g.rho.size() << "):";
  for (double r : g.rho) std::cout << ' ' << fmt_double(r);
  std::cout << "\ndelta_rho " << fmt_double(g.delta_rho) << ", eps_rho " << fmt_double(g.eps_rho)
            << ", delta_u " << fmt_double(g.delta_u) << ", eps_u " << fmt_double(g.eps_u) << "\n";
  return 0;
}

int cmd_validate(const std::string& scenario_path, const std::string& dir_flag) {
  const Scenario s = parse_scenario(slurp(scenario_path));
  const RunHistory h = solve_scenario(s);
  const fs::path dir = pick_out_dir(dir_flag);

  const ValidationReport rep = validate_history(h);
  bool ok = rep.ok();
  if (!ok) std::cout << rep.summary();

  std::vector<std::pair<std::string, std::string>> expect = {
      {"fronts.csv", csv_fronts(h)},
      {"trajectory.csv", csv_trajectory(h)},
      {"ledger.csv", csv_ledger(h)},
      {"snapshots.csv", csv_snapshots(h, snapshot_times(s))},
  };
  if (s.diagram) expect.emplace_back("diagram.svg", svg_diagram(h));
  for (const auto& [name, body] : expect) {
    const fs::path p = dir / name;
    std::string stored;
    try {
      stored = slurp(p.string());
    } catch (const InvariantError&) {
      std::cout << name << ": missing\n";
      ok = false;
      continue;
    }
    if (stored != body) {
      std::cout << name << ": MISMATCH against a fresh run\n";
      ok = false;
    } else {
      std::cout << name << ": ok\n";
    }
  }
  std::cout << (ok ? "validate: pass\n" : "validate: FAIL\n");
  return ok ? 0 : 1;
}

int cmd_compare(const std::string& scenario_path, double dx, int levels) {
  const Scenario s = quantized_copy(parse_scenario(slurp(scenario_path)));
  const RunHistory h = solve_scenario(s);
  const auto [lo, hi] = fv_window(h);
  const FluxModel m = scenario_model(s);
  std::cout << "dx,l1_distance\n";
  for (int k = 0; k < levels; ++k) {
    const double step = dx / static_cast<double>(1 << k);
    FvGrid g = fv_run(m, s.rho0, s.control, s.y0, lo, hi, step, s.t_end);
    g.scenario_hash = h.scenario_hash;
    std::cout << fmt_double(step) << ',' << fmt_double(l1_compare(h, g)) << "\n";
  }
  return 0;
}

int cmd_sweep(const std::string& scenario_path, std::vector<int> nus, double dx, int levels,
              int threads) {
  Scenario base = parse_scenario(slurp(scenario_path));
  if (nus.empty()) nus = {base.nu, base.nu + 1, base.nu + 2};
  std::sort(nus.begin(), nus.end());
  const int nu_ref = nus.back() + 2;

  // Quantize once at the coarsest level: finer grids contain the coarser
  // points, so every run then shares the same datum and far fields.
  base.nu = nus.front();
  base = quantized_copy(base);

  // Tracker runs at each refinement level, in parallel.
  std::vector<Scenario> cases;
  for (int nu : nus) {
    Scenario s = base;
    s.nu = nu;
    cases.push_back(s);
  }
  Scenario ref = base;
  ref.nu = nu_ref;
  cases.push_back(ref);

  std::vector<RunHistory> runs(cases.size(), RunHistory{build_grids(scenario_model(base), 2)});
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < cases.size(); i = next.fetch_add(1))
      runs[i] = solve_scenario(cases[i]);
  };
  const int n_threads = std::max(1, std::min<int>(threads, static_cast<int>(cases.size())));
  std::vector<std::thread> pool;
  for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
  for (auto& th : pool) th.join();

  const RunHistory& fine = runs.back();
  std::cout << "kind,level,l1_distance\n";
  for (std::size_t i = 0; i + 1 < runs.size(); ++i) {
    RunHistory coarse = runs[i];
    coarse.scenario_hash = fine.scenario_hash;  // same scenario, coarser grid
    std::cout << "tracker,nu=" << nus[i] << ',' << fmt_double(l1_distance(coarse, fine, base.t_end))
              << "\n";
  }
  const Scenario finest = cases.back();
  const auto [lo, hi] = fv_window(fine);
  for (int k = 0; k < levels; ++k) {
    const double step = dx / static_cast<double>(1 << k);
    FvGrid g = fv_run(scenario_model(finest), finest.rho0, finest.control, finest.y0, lo, hi, step,
                      finest.t_end);
    g.scenario_hash = fine.scenario_hash;
    std::cout << "oracle,dx=" << fmt_double(step) << ',' << fmt_double(l1_compare(fine, g)) << "\n";
  }
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Exact wave-front tracking for a conservation-law traffic model with a "
               "speed-controlled vehicle bottleneck"};
  app.require_subcommand(1);

  std::string scenario_path, out_flag;
  double rho_l = 0.0, rho_r = 0.0, u = 0.0, R = 1.0, V = 1.0, alpha = 0.75, dx = 4e-3;
  int nu = 2, levels = 3, threads = static_cast<int>(std::thread::hardware_concurrency());
  std::vector<int> nus;

  auto* solve = app.add_subcommand("solve", "run a scenario and emit result tables");
  solve->add_option("scenario", scenario_path, "scenario config file")->required();
  solve->add_option("--out", out_flag, "output directory (default $AVTRACK_OUTPUT_DIR or .)");

  auto* riemann = app.add_subcommand("riemann", "solve one bottleneck Riemann problem");
  riemann->add_option("--left", rho_l, "upstream density")->required();
  riemann->add_option("--right", rho_r, "downstream density")->required();
  riemann->add_option("--u", u, "desired vehicle speed")->required();
  riemann->add_option("--R", R, "jam density");
  riemann->add_option("--V", V, "free-flow speed");
  riemann->add_option("--alpha", alpha, "capacity-drop fraction");

  auto* grid = app.add_subcommand("grid", "print the discrete speed/density grids");
  grid->add_option("--nu", nu, "refinement level")->required();
  grid->add_option("--R", R, "jam density");
  grid->add_option("--V", V, "free-flow speed");
  grid->add_option("--alpha", alpha, "capacity-drop fraction");

  auto* validate = app.add_subcommand("validate", "re-run a scenario and check stored outputs");
  validate->add_option("scenario", scenario_path, "scenario config file")->required();
  validate->add_option("dir", out_flag, "directory holding the stored outputs")->required();

  auto* compare = app.add_subcommand("compare", "tracker vs finite-volume oracle distances");
  compare->add_option("scenario", scenario_path, "scenario config file")->required();
  compare->add_option("--dx", dx, "coarsest oracle cell width");
  compare->add_option("--levels", levels, "number of halvings");

  auto* sweep = app.add_subcommand("sweep", "refinement study across grid levels and cell widths");
  sweep->add_option("scenario", scenario_path, "scenario config file")->required();
  sweep->add_option("--nus", nus, "tracker refinement levels");
  sweep->add_option("--dx", dx, "coarsest oracle cell width");
  sweep->add_option("--levels", levels, "number of oracle halvings");
  sweep->add_option("--threads", threads, "parallel runs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (solve->parsed()) return cmd_solve(scenario_path, out_flag);
    if (riemann->parsed()) return cmd_riemann(rho_l, rho_r, u, R, V, alpha);
    if (grid->parsed()) return cmd_grid(nu, R, V, alpha);
    if (validate->parsed()) return cmd_validate(scenario_path, out_flag);
    if (compare->parsed()) return cmd_compare(scenario_path, dx, levels);
    if (sweep->parsed()) return cmd_sweep(scenario_path, nus, dx, levels, threads);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace avtrack
