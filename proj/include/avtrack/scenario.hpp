#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "avtrack/flux_model.hpp"
#include "avtrack/tracker.hpp"

namespace avtrack {

/** Complete description of one simulation run, parsed from (and printed to)
 * the line-oriented config format documented in the README. */
struct Scenario {
  std::string flux = "greenshields";
  double R = 1.0;
  double V = 1.0;
  double alpha = 0.75;
  int nu = 2;
  StepFunction rho0{{}, {0.0}};
  StepFunction control{{}, {0.0}};
  double y0 = 0.0;
  double t_end = 1.0;
  std::vector<double> snapshots;  // requested profile dump times
  bool diagram = false;
  std::uint64_t seed = 0;  // stamp for randomized sweeps
};

/** Shortest decimal string that parses back to exactly v. */
std::string fmt_double(double v);

/** Parses the config text.  Throws InvariantError with a line-numbered
 * message on malformed or out-of-range input. */
Scenario parse_scenario(const std::string& text);

/** Canonical text form; parse_scenario(print_scenario(s)) reproduces s
 * bit-exact. */
std::string print_scenario(const Scenario& s);

/** 16-digit hex digest of the canonical text (FNV-1a). */
std::string scenario_hash(const Scenario& s);

FluxModel scenario_model(const Scenario& s);

/** Seed-deterministic scenario with at most the given numbers of initial
 * density jumps and control jumps, drawn on the unit model. */
Scenario random_scenario(std::uint64_t seed, int nu, int max_rho_jumps, int max_u_jumps,
                         double t_end);

}  // namespace avtrack
