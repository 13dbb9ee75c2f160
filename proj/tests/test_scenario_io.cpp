#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <vector>

#include "avtrack/check.hpp"
#include "avtrack/cli.hpp"
#include "avtrack/mesh.hpp"
#include "avtrack/output.hpp"
#include "avtrack/scenario.hpp"

namespace {

namespace fs = std::filesystem;

avtrack::Scenario demo_scenario() {
  avtrack::Scenario s;
  s.nu = 2;
  s.rho0 = {{0.0}, {0.375, 0.5}};
  s.control = {{}, {1.0 / 6.0}};
  s.y0 = 0.0;
  s.t_end = 1.0;
  s.snapshots = {0.5, 1.0};
  return s;
}

avtrack::RunHistory run_demo() {
  const avtrack::Scenario s = demo_scenario();
  const auto grids = avtrack::build_grids(avtrack::scenario_model(s), s.nu);
  avtrack::Tracker tr(grids, s.rho0, s.control, s.y0);
  tr.advance_to(s.t_end);
  auto h = tr.finalize();
  h.scenario_hash = avtrack::scenario_hash(s);
  return h;
}

bool same(const avtrack::Scenario& a, const avtrack::Scenario& b) {
  return a.flux == b.flux && a.R == b.R && a.V == b.V && a.alpha == b.alpha && a.nu == b.nu &&
         a.rho0.breaks == b.rho0.breaks && a.rho0.values == b.rho0.values &&
         a.control.breaks == b.control.breaks && a.control.values == b.control.values &&
         a.y0 == b.y0 && a.t_end == b.t_end && a.snapshots == b.snapshots &&
         a.diagram == b.diagram && a.seed == b.seed;
}

fs::path fresh_dir(const char* tag) {
  const fs::path p = fs::temp_directory_path() /
                     (std::string("avtrack_io_") + tag + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int cli(std::initializer_list<const char*> args) {
  std::vector<const char*> argv{"avtrack"};
  argv.insert(argv.end(), args.begin(), args.end());
  return avtrack::run_cli(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("shortest round-trip printing reparses bit-exact") {
  for (double v : {1.0 / 3.0, 0.1, 5e-7, 2.0 / 3.0, 1e300, -0.0, 0.6250000000000001}) {
    const std::string text = avtrack::fmt_double(v);
    const avtrack::Scenario s = avtrack::parse_scenario(
        "nu 2\nrho0_values [0.5]\ncontrol_values [" +
        avtrack::fmt_double(std::min(std::abs(v), 1.0) * 0.5) + "]\nt_end 1\ny0 " + text + "\n");
    CHECK(s.y0 == v);
  }
}

TEST_CASE("scenario text round-trips through print and parse") {
  avtrack::Scenario s = demo_scenario();
  s.control = {{0.3, 0.7}, {1.0 / 3.0, 0.1, 5.0 / 7.0}};
  s.rho0 = {{-2.0 / 3.0, 0.1}, {0.23, 0.61, 0.47}};
  s.alpha = 0.35;
  s.nu = 4;
  s.diagram = true;
  s.seed = 123456789012345ull;
  const avtrack::Scenario back = avtrack::parse_scenario(avtrack::print_scenario(s));
  CHECK(same(s, back));
  CHECK(avtrack::print_scenario(back) == avtrack::print_scenario(s));
  CHECK(avtrack::scenario_hash(back) == avtrack::scenario_hash(s));
}

TEST_CASE("hand-written config with comments parses") {
  const std::string text =
      "# a comment\n"
      "\n"
      "flux greenshields\n"
      "nu 3   # trailing comment\n"
      "rho0_breaks [ -1 0.5 ]\n"
      "rho0_values [0.1 0.9 0.3]\n"
      "control_breaks []\n"
      "control_values [0.25]\n"
      "y0 -0.5\n"
      "t_end 2.5\n";
  const avtrack::Scenario s = avtrack::parse_scenario(text);
  CHECK(s.nu == 3);
  CHECK(s.rho0.breaks == std::vector<double>{-1.0, 0.5});
  CHECK(s.rho0.values.size() == 3);
  CHECK(s.control.breaks.empty());
  CHECK(s.t_end == 2.5);
  CHECK(s.snapshots.empty());
  CHECK(!s.diagram);
}

TEST_CASE("malformed or out-of-range configs are rejected with diagnostics") {
  const auto reject = [](const std::string& text, const std::string& needle) {
    try {
      (void)avtrack::parse_scenario(text);
      FAIL_CHECK("expected rejection: " << needle);
    } catch (const avtrack::InvariantError& e) {
      CHECK(std::string(e.what()).find(needle) != std::string::npos);
    }
  };
  const std::string ok = "nu 2\nrho0_values [0.5]\ncontrol_values [0.5]\nt_end 1\n";
  reject(ok + "alpha 1.5\n", "alpha");
  reject(ok + "bogus 3\n", "unknown key");
  reject(ok + "nu 3\n", "duplicate");
  reject(ok + "y0 six\n", "bad number");
  reject("rho0_values [0.5]\ncontrol_values [0.5]\nt_end -1\nnu 2\n", "t_end");
  reject("nu 2\ncontrol_values [0.5]\nt_end 1\n", "rho0_values");
  reject("nu 2\nrho0_values [1.5]\ncontrol_values [0.5]\nt_end 1\n", "outside");
  reject("nu 2\nrho0_values [0.5]\ncontrol_values [0.5 0.25]\nt_end 1\n", "one more value");
  reject("nu 2\nrho0_breaks [1 1]\nrho0_values [0.1 0.2 0.3]\ncontrol_values [0.5]\nt_end 1\n",
         "strictly increasing");
  reject("nu 2\nrho0_values 0.5\ncontrol_values [0.5]\nt_end 1\n", "bracketed");
  reject("nu 15\nrho0_values [0.5]\ncontrol_values [0.5]\nt_end 1\n", "nu must lie");
  reject(ok + "diagram maybe\n", "diagram");
  reject(ok + "flux trapezoid\n", "flux family");
}

TEST_CASE("scenario hash is stable and sensitive") {
  const avtrack::Scenario s = demo_scenario();
  const std::string h1 = avtrack::scenario_hash(s);
  CHECK(h1.size() == 16);
  CHECK(h1 == avtrack::scenario_hash(s));
  avtrack::Scenario t = s;
  t.y0 = 0.25;
  CHECK(avtrack::scenario_hash(t) != h1);
}

TEST_CASE("random scenarios are seed-deterministic and valid") {
  const auto a = avtrack::random_scenario(42, 4, 20, 10, 5.0);
  const auto b = avtrack::random_scenario(42, 4, 20, 10, 5.0);
  CHECK(avtrack::print_scenario(a) == avtrack::print_scenario(b));
  CHECK(a.seed == 42);
  CHECK(a.nu == 4);
  CHECK(a.rho0.breaks.size() <= 20);
  CHECK(a.control.breaks.size() <= 10);
  const auto c = avtrack::random_scenario(43, 4, 20, 10, 5.0);
  CHECK(avtrack::print_scenario(c) != avtrack::print_scenario(a));
  // Parse-of-print closes the loop.
  CHECK(same(avtrack::parse_scenario(avtrack::print_scenario(a)), a));
}

TEST_CASE("result tables carry the hash header and are byte-deterministic") {
  const auto h = run_demo();
  const std::string fronts = avtrack::csv_fronts(h);
  const std::string traj = avtrack::csv_trajectory(h);
  const std::string ledger = avtrack::csv_ledger(h);
  const std::string snaps = avtrack::csv_snapshots(h, {0.5, 1.0});

  for (const auto* text : {&fronts, &traj, &ledger, &snaps}) {
    CHECK(text->rfind("# scenario " + h.scenario_hash, 0) == 0);
    CHECK(text->find("[") != std::string::npos);  // units in the column header
  }
  CHECK(fronts.find("t_event [T],x [L],left [veh/L],right [veh/L],kind,speed [L/T]") !=
        std::string::npos);

  const auto h2 = run_demo();
  CHECK(avtrack::csv_fronts(h2) == fronts);
  CHECK(avtrack::csv_trajectory(h2) == traj);
  CHECK(avtrack::csv_ledger(h2) == ledger);
  CHECK(avtrack::csv_snapshots(h2, {0.5, 1.0}) == snaps);

  // The demo run holds one bottleneck front from t=0; three fronts total.
  int lines = 0;
  for (char c : fronts) lines += c == '\n';
  CHECK(lines == 2 + 3);
  CHECK(fronts.find("bottleneck") != std::string::npos);

  // Snapshot rows: one -inf opener plus one row per break, per time.
  int snap_lines = 0;
  for (char c : snaps) snap_lines += c == '\n';
  CHECK(snap_lines == 2 + 2 * 4);
  CHECK(snaps.find("-inf") != std::string::npos);
}

TEST_CASE("the diagram is a self-contained svg with the vehicle path") {
  const auto h = run_demo();
  const std::string svg = avtrack::svg_diagram(h);
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("<polyline") != std::string::npos);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(avtrack::svg_diagram(run_demo()) == svg);
}

TEST_CASE("file writing round-trips and reports unwritable paths") {
  const fs::path dir = fresh_dir("write");
  avtrack::write_file(dir / "x.csv", "abc\n");
  CHECK(slurp(dir / "x.csv") == "abc\n");
  CHECK_THROWS_AS(avtrack::write_file(dir / "no_such" / "x.csv", "abc"), avtrack::InvariantError);
  fs::remove_all(dir);
}

TEST_CASE("cli solve emits the result files and validate accepts them") {
  const fs::path dir = fresh_dir("cli");
  const fs::path scen = dir / "scenario.txt";
  avtrack::write_file(scen, avtrack::print_scenario(demo_scenario()));
  const fs::path out = dir / "out";

  CHECK(cli({"solve", scen.c_str(), "--out", out.c_str()}) == 0);
  for (const char* name : {"fronts.csv", "trajectory.csv", "ledger.csv", "snapshots.csv"})
    CHECK(fs::exists(out / name));
  CHECK(!fs::exists(out / "diagram.svg"));

  // Deterministic re-run: byte-identical files.
  const std::string before = slurp(out / "fronts.csv");
  CHECK(cli({"solve", scen.c_str(), "--out", out.c_str()}) == 0);
  CHECK(slurp(out / "fronts.csv") == before);

  CHECK(cli({"validate", scen.c_str(), out.c_str()}) == 0);

  // Any byte flip must be caught.
  std::ofstream corrupt(out / "trajectory.csv", std::ios::app | std::ios::binary);
  corrupt << "tampered\n";
  corrupt.close();
  CHECK(cli({"validate", scen.c_str(), out.c_str()}) == 1);
  fs::remove_all(dir);
}

TEST_CASE("cli solve honors the output directory environment variable") {
  const fs::path dir = fresh_dir("env");
  const fs::path scen = dir / "scenario.txt";
  avtrack::Scenario s = demo_scenario();
  s.diagram = true;
  avtrack::write_file(scen, avtrack::print_scenario(s));
  const fs::path out = dir / "from_env";
  ::setenv("AVTRACK_OUTPUT_DIR", out.c_str(), 1);
  CHECK(cli({"solve", scen.c_str()}) == 0);
  ::unsetenv("AVTRACK_OUTPUT_DIR");
  CHECK(fs::exists(out / "diagram.svg"));
  CHECK(fs::exists(out / "fronts.csv"));
  fs::remove_all(dir);
}

TEST_CASE("cli riemann, grid, compare and sweep run to completion") {
  const fs::path dir = fresh_dir("sub");
  const fs::path scen = dir / "scenario.txt";
  avtrack::Scenario s = demo_scenario();
  s.t_end = 0.5;
  s.snapshots.clear();
  avtrack::write_file(scen, avtrack::print_scenario(s));

  CHECK(cli({"riemann", "--left", "0.4", "--right", "0.6", "--u", "0.1"}) == 0);
  CHECK(cli({"grid", "--nu", "2"}) == 0);
  CHECK(cli({"compare", scen.c_str(), "--dx", "8e-3", "--levels", "2"}) == 0);
  CHECK(cli({"sweep", scen.c_str(), "--nus", "2", "3", "--dx", "8e-3", "--levels", "2",
             "--threads", "2"}) == 0);
  fs::remove_all(dir);
}

TEST_CASE("cli reports failures with nonzero exit codes") {
  CHECK(cli({"solve", "/no/such/scenario.txt"}) == 1);
  CHECK(cli({"frobnicate"}) != 0);
  CHECK(cli({}) != 0);

  const fs::path dir = fresh_dir("badscen");
  const fs::path scen = dir / "bad.txt";
  avtrack::write_file(scen, "nu 2\nrho0_values [2.5]\ncontrol_values [0.5]\nt_end 1\n");
  CHECK(cli({"solve", scen.c_str()}) == 1);
  fs::remove_all(dir);
}
